#include "ssd/config.h"

#include <fstream>
#include <set>

#include "ssd/errors.h"

namespace ssd {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ParameterError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ParameterError("unknown config key " + where + key);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParameterError("config key " + where + key + ": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  if (T < 1) throw ParameterError("T must be >= 1");
  if (channels < 1) throw ParameterError("channels must be >= 1");
  if (levels.empty()) throw ParameterError("levels must not be empty");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
    throw ParameterError("beta endpoints must satisfy 0 < start <= end < 1");
  }
  lanczos.validate();
  if (data.count < 1) throw ParameterError("data.count must be >= 1");
  if (train.iters < 0 || train.batch < 1 || train.hidden < 1 || !(train.lr > 0.0) ||
      train.weight_decay < 0.0 || train.eval_every < 1 || train.eval_size < 1) {
    throw ParameterError("invalid train settings");
  }
  if (sample.n < 1 || sample.threads < 1 || sample.step_stride < 1 || sample.record_stride < 1) {
    throw ParameterError("invalid sample settings");
  }
  parse_sample_mode(sample.mode);
  parse_schedule_spec(schedule);
  if (unet_levels < 1 || channel_profile.empty()) throw ParameterError("invalid routing settings");
}

json to_json(const RunConfig& c) {
  return json{
      {"schedule", c.schedule},
      {"levels", c.levels},
      {"T", c.T},
      {"beta_start", c.beta_start},
      {"beta_end", c.beta_end},
      {"channels", c.channels},
      {"lanczos",
       {{"max_iters", c.lanczos.max_iters},
        {"reorthogonalize", c.lanczos.reorthogonalize},
        {"eig_floor", c.lanczos.eig_floor},
        {"tol", c.lanczos.tol}}},
      {"seed", c.seed},
      {"data", {{"path", c.data.path}, {"count", c.data.count}, {"seed", c.data.seed}}},
      {"train",
       {{"iters", c.train.iters},
        {"batch", c.train.batch},
        {"hidden", c.train.hidden},
        {"lr", c.train.lr},
        {"weight_decay", c.train.weight_decay},
        {"eval_every", c.train.eval_every},
        {"eval_size", c.train.eval_size}}},
      {"sample",
       {{"n", c.sample.n},
        {"mode", c.sample.mode},
        {"threads", c.sample.threads},
        {"step_stride", c.sample.step_stride},
        {"record", c.sample.record},
        {"record_stride", c.sample.record_stride}}},
      {"unet_levels", c.unet_levels},
      {"channel_profile", c.channel_profile},
      {"output_dir", c.output_dir},
  };
}

RunConfig config_from_json(const json& j, RunConfig c) {
  check_keys(j,
             {"schedule", "levels", "T", "beta_start", "beta_end", "channels", "lanczos", "seed",
              "data", "train", "sample", "unet_levels", "channel_profile", "output_dir"},
             "");
  read(j, "schedule", c.schedule, "");
  if (j.contains("levels") && j.at("levels").is_string()) {
    c.levels = parse_levels(j.at("levels").get<std::string>());
  } else {
    read(j, "levels", c.levels, "");
  }
  read(j, "T", c.T, "");
  read(j, "beta_start", c.beta_start, "");
  read(j, "beta_end", c.beta_end, "");
  read(j, "channels", c.channels, "");
  read(j, "seed", c.seed, "");
  read(j, "unet_levels", c.unet_levels, "");
  read(j, "channel_profile", c.channel_profile, "");
  read(j, "output_dir", c.output_dir, "");
  if (j.contains("lanczos")) {
    const json& l = j.at("lanczos");
    check_keys(l, {"max_iters", "reorthogonalize", "eig_floor", "tol"}, "lanczos.");
    read(l, "max_iters", c.lanczos.max_iters, "lanczos.");
    read(l, "reorthogonalize", c.lanczos.reorthogonalize, "lanczos.");
    read(l, "eig_floor", c.lanczos.eig_floor, "lanczos.");
    read(l, "tol", c.lanczos.tol, "lanczos.");
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, {"path", "count", "seed"}, "data.");
    read(d, "path", c.data.path, "data.");
    read(d, "count", c.data.count, "data.");
    read(d, "seed", c.data.seed, "data.");
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, {"iters", "batch", "hidden", "lr", "weight_decay", "eval_every", "eval_size"},
               "train.");
    read(t, "iters", c.train.iters, "train.");
    read(t, "batch", c.train.batch, "train.");
    read(t, "hidden", c.train.hidden, "train.");
    read(t, "lr", c.train.lr, "train.");
    read(t, "weight_decay", c.train.weight_decay, "train.");
    read(t, "eval_every", c.train.eval_every, "train.");
    read(t, "eval_size", c.train.eval_size, "train.");
  }
  if (j.contains("sample")) {
    const json& s = j.at("sample");
    check_keys(s, {"n", "mode", "threads", "step_stride", "record", "record_stride"}, "sample.");
    read(s, "n", c.sample.n, "sample.");
    read(s, "mode", c.sample.mode, "sample.");
    read(s, "threads", c.sample.threads, "sample.");
    read(s, "step_stride", c.sample.step_stride, "sample.");
    read(s, "record", c.sample.record, "sample.");
    read(s, "record_stride", c.sample.record_stride, "sample.");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream is(path);
  if (!is) throw ParameterError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ParameterError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

ResolutionSchedule build_schedule(const RunConfig& cfg) {
  const ScheduleSpec spec = parse_schedule_spec(cfg.schedule);
  return make_resolution_schedule(spec.kind, spec.gamma, cfg.levels, cfg.T);
}

NoiseSchedule build_noise(const RunConfig& cfg) {
  return linear_beta_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
}

SampleMode parse_sample_mode(const std::string& s) {
  if (s == "exact") return SampleMode::Exact;
  if (s == "isotropic") return SampleMode::IsotropicApprox;
  throw ParameterError("unknown sample mode '" + s + "' (exact | isotropic)");
}

}  // namespace ssd
