// Command-line front end: verification, schedules, analysis curves, toy
// training and sampling.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ssd/analysis.h"
#include "ssd/config.h"
#include "ssd/denoiser.h"
#include "ssd/errors.h"
#include "ssd/io.h"
#include "ssd/routing.h"
#include "ssd/sampler.h"
#include "ssd/verify.h"

namespace fs = std::filesystem;
using namespace ssd;

namespace {

/// Flags shared by most subcommands; unset flags leave the config alone.
struct CommonFlags {
  std::string config;
  std::optional<std::string> schedule, levels, out;
  std::optional<int> T, channels;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app, bool with_out = true) {
    app->add_option("--config", config, "JSON run config");
    app->add_option("--schedule", schedule, "equal | convex:G | tanh:G | sigmoid:G | explicit");
    app->add_option("--levels", levels, "ascending resolutions, e.g. 8,16,32 or 2..32");
    app->add_option("--T", T, "number of diffusion steps");
    app->add_option("--channels", channels, "image channels");
    app->add_option("--seed", seed, "RNG seed");
    if (with_out) app->add_option("--out", out, "output file or directory");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config.empty()) cfg = load_config(config);
    if (schedule) cfg.schedule = *schedule;
    if (levels) cfg.levels = parse_levels(*levels);
    if (T) cfg.T = *T;
    if (channels) cfg.channels = *channels;
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return cfg;
  }
};

/// Writes to `path` or, when empty, to stdout.
class Sink {
 public:
  explicit Sink(const std::optional<std::string>& path) {
    if (path) {
      file_.open(*path, std::ios::binary);
      if (!file_) throw ResourceError("cannot open " + *path);
    }
  }
  std::ostream& os() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string yes_no(bool b) { return b ? "1" : "0"; }

int cmd_verify(std::uint64_t seed) {
  const std::vector<CheckResult> results = run_verify_suite(seed);
  bool all = true;
  std::cout << std::left << std::setw(26) << "check" << std::setw(6) << "pass" << std::setw(14)
            << "error" << std::setw(10) << "tol" << "detail\n";
  for (const CheckResult& r : results) {
    all = all && r.pass;
    std::ostringstream err, tol;
    err << std::setprecision(3) << std::scientific << r.error;
    tol << std::setprecision(0) << std::scientific << r.tol;
    std::cout << std::setw(26) << r.name << std::setw(6) << (r.pass ? "ok" : "FAIL")
              << std::setw(14) << err.str() << std::setw(10) << tol.str() << r.detail << "\n";
  }
  std::cout << (all ? "all checks passed" : "verification FAILED") << "\n";
  return all ? 0 : 1;
}

int cmd_schedule(const RunConfig& cfg, const std::optional<std::string>& out) {
  const ResolutionSchedule rs = build_schedule(cfg);
  const NoiseSchedule ns = build_noise(cfg);
  Sink sink(out);
  CsvWriter csv(sink.os(),
                {"t", "resolution", "transition", "alpha_bar", "sigma", "min_snr_weight"});
  for (int t = 0; t <= rs.T(); ++t) {
    csv.row({std::to_string(t), std::to_string(rs.resolution(t)), yes_no(rs.is_transition(t)),
             fmt(ns.alpha_bar(t)), fmt(ns.sigma(t)), t == 0 ? "" : fmt(min_snr_weight(ns, t))});
  }
  return 0;
}

int cmd_info_curves(const RunConfig& cfg, const std::optional<std::string>& out, int quad,
                    int points) {
  const fs::path dir = out ? fs::path(*out) : fs::path(cfg.output_dir);
  fs::create_directories(dir);
  const NoiseSchedule ns = build_noise(cfg);
  const InfoCurve it = info_t_curve(ns, quad);
  {
    CsvWriter csv(dir / "info_t.csv", {"t", "info"});
    for (const auto& [t, v] : it.points) csv.row({std::to_string(static_cast<int>(t)), fmt(v)});
  }
  const InfoCurve ir = info_r_curve(points);
  {
    CsvWriter csv(dir / "info_r.csv", {"r", "info"});
    for (const auto& [r, v] : ir.points) csv.row({fmt(r), fmt(v)});
  }
  std::cout << "wrote " << (dir / "info_t.csv").string() << " and "
            << (dir / "info_r.csv").string() << "\n";
  return 0;
}

int cmd_psd_check(const RunConfig& cfg, const std::optional<std::string>& out) {
  const FeasibilityReport rep =
      check_psd_feasibility(build_noise(cfg), build_schedule(cfg), cfg.channels);
  Sink sink(out);
  CsvWriter csv(sink.os(), {"t", "transition", "sigma_sq", "lambda_max", "bound", "margin", "pass"});
  for (const FeasibilityEntry& e : rep.entries) {
    csv.row({std::to_string(e.t), yes_no(e.transition), fmt(e.sigma_sq), fmt(e.lambda),
             fmt(e.bound), fmt(e.margin), yes_no(e.pass)});
  }
  std::cerr << (rep.pass ? "all steps feasible"
                         : std::to_string(rep.infeasible_steps.size()) + " infeasible steps")
            << "\n";
  return 0;
}

int cmd_backtrack(const RunConfig& cfg, const std::optional<std::string>& out, int t,
                  const std::vector<double>& cs) {
  const NoiseSchedule ns = build_noise(cfg);
  Sink sink(out);
  CsvWriter csv(sink.os(), {"t", "c", "s", "achieved_c"});
  for (double c : cs) {
    try {
      const Backtrack b = backtrack_timestep(ns, t, c);
      csv.row({std::to_string(t), fmt(c), std::to_string(b.s), fmt(b.achieved_c)});
    } catch (const NotFoundError& e) {
      std::cerr << e.what() << "\n";
      csv.row({std::to_string(t), fmt(c), "", ""});
    }
  }
  return 0;
}

int cmd_flops(const RunConfig& cfg, const std::optional<std::string>& out) {
  const ResolutionSchedule rs = build_schedule(cfg);
  const ChainCost cost = chain_cost(rs, cfg.unet_levels, cfg.channel_profile);
  Sink sink(out);
  CsvWriter csv(sink.os(), {"t", "r_in", "r_out", "entry_depth", "exit_depth", "zero_skips",
                            "macs_flexi", "macs_full"});
  const std::uint64_t full =
      plan_route(rs.r_max(), rs.r_max(), cfg.unet_levels, rs.r_max(), cfg.channel_profile)
          .mac_estimate;
  for (int t = 1; t <= rs.T(); ++t) {
    const RoutingPlan plan = plan_route(rs.resolution(t), rs.resolution(t - 1), cfg.unet_levels,
                                        rs.r_max(), cfg.channel_profile);
    csv.row({std::to_string(t), std::to_string(rs.resolution(t)),
             std::to_string(rs.resolution(t - 1)), std::to_string(plan.entry_depth),
             std::to_string(plan.exit_depth), std::to_string(plan.zero_filled_skips.size()),
             std::to_string(plan.mac_estimate), std::to_string(full)});
  }
  std::cerr << "total MACs flexi=" << cost.flexi << " full=" << cost.baseline << " ratio="
            << static_cast<double>(cost.flexi) / static_cast<double>(cost.baseline) << "\n";
  return 0;
}

std::vector<Tensor> load_dataset(const RunConfig& cfg) {
  if (!cfg.data.path.empty()) {
    Tensor img = read_stf(cfg.data.path);
    require_shape(img.shape(),
                  Shape{cfg.channels, cfg.levels.back(), cfg.levels.back()}, "dataset image");
    return {img};
  }
  return make_blob_dataset(cfg.data.count, cfg.channels, cfg.levels.back(), cfg.data.seed);
}

int cmd_train(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  const DiffusionProcess p(build_noise(cfg), build_schedule(cfg), cfg.channels, cfg.lanczos);
  const std::vector<Tensor> data = load_dataset(cfg);
  MlpDenoiser m(p, cfg.train.hidden, cfg.seed);
  std::cerr << "parameters: " << m.parameter_count() << " in " << m.nets().size() << " nets\n";

  TrainOptions opts;
  opts.iters = cfg.train.iters;
  opts.batch = cfg.train.batch;
  opts.eval_every = cfg.train.eval_every;
  opts.eval_size = cfg.train.eval_size;
  opts.seed = cfg.seed;
  opts.adamw.lr = cfg.train.lr;
  opts.adamw.weight_decay = cfg.train.weight_decay;

  CsvWriter csv(dir / "loss.csv", {"iter", "train_loss", "eval_loss"});
  train_denoiser(m, p, data, opts, [&](const TrainRecord& r) {
    csv.row({std::to_string(r.iter), r.iter == 0 ? "" : fmt(r.train_loss), fmt(r.eval_loss)});
    std::cerr << "iter " << r.iter << " eval " << r.eval_loss << "\n";
  });
  write_checkpoint(dir / "denoiser.ssdw", m.export_tensors());
  std::ofstream(dir / "config.json") << to_json(cfg).dump(2) << "\n";
  std::cerr << "wrote " << (dir / "denoiser.ssdw").string() << "\n";
  return 0;
}

int cmd_sample(RunConfig cfg, const std::string& checkpoint, const std::string& oracle_path) {
  if (checkpoint.empty() == oracle_path.empty()) {
    throw ParameterError("sample needs exactly one of --checkpoint or --oracle");
  }
  std::optional<Tensor> oracle_img;
  if (!oracle_path.empty()) {
    oracle_img = read_stf(oracle_path);
    cfg.channels = oracle_img->channels();
    if (oracle_img->height() != cfg.levels.back() || oracle_img->width() != cfg.levels.back()) {
      throw ParameterError("oracle image is " + oracle_img->shape().str() +
                           " but the largest level is " + std::to_string(cfg.levels.back()));
    }
  }
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  const DiffusionProcess p(build_noise(cfg), build_schedule(cfg), cfg.channels, cfg.lanczos);

  std::unique_ptr<Denoiser> d;
  if (oracle_img) {
    d = std::make_unique<OracleDenoiser>(p, *oracle_img);
  } else {
    d = std::make_unique<MlpDenoiser>(p, read_checkpoint(checkpoint));
  }
  SampleOptions opts;
  opts.mode = parse_sample_mode(cfg.sample.mode);
  opts.record = cfg.sample.record;
  opts.record_stride = cfg.sample.record_stride;
  opts.step_stride = cfg.sample.step_stride;
  const std::vector<ChainResult> results =
      sample_batch(p, *d, cfg.sample.n, cfg.seed, opts, cfg.sample.threads);

  const char* ext = cfg.channels == 1 ? ".pgm" : ".ppm";
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::ostringstream stem;
    stem << "sample_" << std::setw(3) << std::setfill('0') << i;
    write_stf(dir / (stem.str() + ".stf"), results[i].x0);
    if (cfg.channels == 1 || cfg.channels == 3) {
      write_pnm(dir / (stem.str() + ext), clamp_for_export(results[i].x0));
    }
    if (opts.record) {
      const fs::path tdir = dir / (stem.str() + "_trajectory");
      fs::create_directories(tdir);
      for (const TrajectoryStep& s : results[i].trajectory.steps) {
        std::ostringstream name;
        name << "t" << std::setw(4) << std::setfill('0') << s.t;
        write_stf(tdir / (name.str() + "_x.stf"), s.x_t);
        write_stf(tdir / (name.str() + "_pred.stf"), s.prediction);
      }
    }
    if (oracle_img) {
      std::cout << stem.str() << " max_abs_diff " << max_abs_diff(results[i].x0, *oracle_img)
                << "\n";
    }
  }
  std::cerr << "wrote " << results.size() << " samples to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scale-space diffusion toolkit"};
  app.require_subcommand(1);

  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "run the dense invariant checks");
  verify->add_option("--seed", verify_seed, "RNG seed");

  CommonFlags sched_f;
  auto* schedule = app.add_subcommand("schedule", "emit r(t) as CSV");
  sched_f.add(schedule);

  CommonFlags info_f;
  int quad = kDefaultQuadPoints;
  int points = 101;
  auto* info = app.add_subcommand("info-curves", "write info_t.csv and info_r.csv");
  info_f.add(info);
  info->add_option("--quad", quad, "Simpson quadrature points");
  info->add_option("--points", points, "resolution grid points");

  CommonFlags psd_f;
  auto* psd = app.add_subcommand("psd-check", "per-step PSD feasibility margins as CSV");
  psd_f.add(psd);

  CommonFlags train_f;
  std::optional<int> iters, batch, hidden;
  std::optional<double> lr;
  auto* train = app.add_subcommand("train-toy", "train the MLP denoiser on synthetic blobs");
  train_f.add(train);
  train->add_option("--iters", iters, "training iterations");
  train->add_option("--batch", batch, "batch size");
  train->add_option("--hidden", hidden, "hidden width");
  train->add_option("--lr", lr, "learning rate");

  CommonFlags sample_f;
  std::string checkpoint, oracle;
  std::optional<int> n, threads, stride;
  std::optional<std::string> mode;
  bool record = false;
  auto* sample = app.add_subcommand("sample", "run the reverse chain");
  sample_f.add(sample);
  sample->add_option("--checkpoint", checkpoint, "SSDW weights from train-toy");
  sample->add_option("--oracle", oracle, "STF image for the oracle denoiser");
  sample->add_option("--n", n, "number of chains");
  sample->add_option("--threads", threads, "worker threads");
  sample->add_option("--stride", stride, "reduced-step stride");
  sample->add_option("--mode", mode, "exact | isotropic");
  sample->add_flag("--record", record, "dump trajectories");

  CommonFlags flops_f;
  std::optional<int> unet_levels;
  auto* flops = app.add_subcommand("flops", "per-step routing cost vs the full UNet");
  flops_f.add(flops);
  flops->add_option("--unet-levels", unet_levels, "UNet depth L");

  CommonFlags bt_f;
  int bt_t = 500;
  std::vector<double> cs = {0.05, 0.1, 0.15, 0.2, 0.25};
  auto* backtrack = app.add_subcommand("backtrack", "backtracking timesteps as CSV");
  bt_f.add(backtrack);
  backtrack->add_option("--t", bt_t, "current timestep");
  backtrack->add_option("--c", cs, "target ratios in (0, 0.25]")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*verify) return cmd_verify(verify_seed);
    if (*schedule) return cmd_schedule(sched_f.resolve(), sched_f.out);
    if (*info) return cmd_info_curves(info_f.resolve(), info_f.out, quad, points);
    if (*psd) return cmd_psd_check(psd_f.resolve(), psd_f.out);
    if (*backtrack) return cmd_backtrack(bt_f.resolve(), bt_f.out, bt_t, cs);
    if (*flops) {
      RunConfig cfg = flops_f.resolve();
      if (unet_levels) cfg.unet_levels = *unet_levels;
      return cmd_flops(cfg, flops_f.out);
    }
    if (*train) {
      RunConfig cfg = train_f.resolve();
      if (iters) cfg.train.iters = *iters;
      if (batch) cfg.train.batch = *batch;
      if (hidden) cfg.train.hidden = *hidden;
      if (lr) cfg.train.lr = *lr;
      if (train_f.out) cfg.output_dir = *train_f.out;
      cfg.validate();
      return cmd_train(cfg);
    }
    if (*sample) {
      RunConfig cfg = sample_f.resolve();
      if (n) cfg.sample.n = *n;
      if (threads) cfg.sample.threads = *threads;
      if (stride) cfg.sample.step_stride = *stride;
      if (mode) cfg.sample.mode = *mode;
      if (record) cfg.sample.record = true;
      if (sample_f.out) cfg.output_dir = *sample_f.out;
      cfg.validate();
      return cmd_sample(cfg, checkpoint, oracle);
    }
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NotFoundError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConstructionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
