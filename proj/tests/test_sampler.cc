#include <cmath>

#include "doctest.h"
#include "ssd/denoiser.h"
#include "ssd/errors.h"
#include "ssd/sampler.h"

using namespace ssd;

namespace {

DiffusionProcess levels_process(std::vector<int> levels, int T, int channels = 1) {
  return DiffusionProcess(linear_beta_schedule(T),
                          make_resolution_schedule(ScheduleKind::Equal, 1.0, levels, T), channels);
}

}  // namespace

TEST_CASE("visit schedule") {
  const ResolutionSchedule rs = make_resolution_schedule(ScheduleKind::Equal, 1.0, {4, 8}, 10);
  const std::vector<int> all = visit_schedule(rs, 1);
  REQUIRE(all.size() == 11);
  for (int i = 0; i <= 10; ++i) CHECK(all[i] == 10 - i);

  const int tr = rs.transition_steps().front();
  const std::vector<int> strided = visit_schedule(rs, 4);
  CHECK(strided.front() == 10);
  CHECK(strided.back() == 0);
  CHECK(std::find(strided.begin(), strided.end(), tr) != strided.end());
  for (int t : {10, 6, 2}) CHECK(std::find(strided.begin(), strided.end(), t) != strided.end());
  CHECK(std::is_sorted(strided.rbegin(), strided.rend()));
  CHECK_THROWS_AS(visit_schedule(rs, 0), ParameterError);
}

TEST_CASE("oracle chains reconstruct x0") {
  for (int channels : {1, 3}) {
    const DiffusionProcess p = levels_process({2, 4, 8}, 200, channels);
    CounterRng rng(1, channels);
    const Tensor x0 = rng.normal_tensor(p.shape_at(0));
    const OracleDenoiser o(p, x0);
    for (SampleMode mode : {SampleMode::Exact, SampleMode::IsotropicApprox}) {
      SampleOptions opts;
      opts.mode = mode;
      const ChainResult r = sample_chain(p, o, 11, 0, opts);
      CHECK(max_abs_diff(r.x0, x0) <= 1e-5);
    }
  }
}

TEST_CASE("single-level oracle chain is the DDPM posterior chain") {
  const int T = 100;
  const DiffusionProcess p(linear_beta_schedule(T), single_level_schedule(4, T), 1);
  const NoiseSchedule& ns = p.noise();
  CounterRng rng(3, 3);
  const Tensor x0 = rng.normal_tensor(Shape{1, 4, 4});
  const OracleDenoiser o(p, x0);
  SampleOptions opts;
  opts.record = true;
  const ChainResult r = sample_chain(p, o, 5, 2, opts);
  REQUIRE(r.trajectory.steps.size() == T);

  CounterRng init(5, chain_stream(2, T + 1));
  Tensor x = init.normal_tensor(Shape{1, 4, 4});
  double worst = 0.0;
  for (int t = T; t >= 1; --t) {
    const TrajectoryStep& step = r.trajectory.steps[T - t];
    REQUIRE(step.t == t);
    worst = std::max(worst, max_abs_diff(step.x_t, x));
    const double ab = ns.alpha_bar(t), ab1 = ns.alpha_bar(t - 1), beta = ns.beta(t);
    const double c0 = std::sqrt(ab1) * beta / (1.0 - ab);
    const double ct = std::sqrt(1.0 - beta) * (1.0 - ab1) / (1.0 - ab);
    const double var = (1.0 - ab1) / (1.0 - ab) * beta;
    CounterRng step_rng(5, chain_stream(2, t));
    const Tensor eps = step_rng.normal_tensor(Shape{1, 4, 4});
    x = c0 * x0 + ct * x + std::sqrt(var) * eps;
  }
  CHECK(worst < 1e-10);
  CHECK(max_abs_diff(r.x0, x) < 1e-10);
  CHECK(max_abs_diff(r.x0, x0) < 1e-10);
}

TEST_CASE("trajectory follows the resolution schedule") {
  const DiffusionProcess p = levels_process({4, 8, 16, 32}, 80, 1);
  CounterRng rng(2, 2);
  const OracleDenoiser o(p, rng.normal_tensor(p.shape_at(0)));
  SampleOptions opts;
  opts.record = true;
  const ChainResult r = sample_chain(p, o, 1, 0, opts);
  REQUIRE(r.trajectory.steps.size() == 80);
  std::vector<int> increases;
  for (std::size_t i = 0; i < r.trajectory.steps.size(); ++i) {
    const TrajectoryStep& s = r.trajectory.steps[i];
    CHECK(s.x_t.shape() == p.shape_at(s.t));
    CHECK(s.prediction.shape() == p.shape_at(s.t - 1));
    if (s.prediction.shape().height > s.x_t.shape().height) increases.push_back(s.t);
  }
  const std::vector<int> tr = p.resolution().transition_steps();
  CHECK(increases == std::vector<int>(tr.rbegin(), tr.rend()));
  CHECK(increases.size() == 3);

  opts.record_stride = 7;
  const ChainResult thin = sample_chain(p, o, 1, 0, opts);
  CHECK(thin.trajectory.stride == 7);
  CHECK(thin.trajectory.steps.size() == 12);
  CHECK(thin.trajectory.steps.front().t == 80);
  CHECK(thin.trajectory.steps[1].t == 73);
  CHECK(max_abs_diff(thin.x0, r.x0) == 0.0);
}

TEST_CASE("reduced-step sampling still reconstructs with the oracle") {
  const DiffusionProcess p = levels_process({4, 8}, 100, 1);
  CounterRng rng(4, 4);
  const Tensor x0 = rng.normal_tensor(p.shape_at(0));
  const OracleDenoiser o(p, x0);
  SampleOptions opts;
  opts.step_stride = 4;
  opts.record = true;
  const ChainResult r = sample_chain(p, o, 1, 0, opts);
  CHECK(max_abs_diff(r.x0, x0) <= 1e-5);
  CHECK(r.trajectory.steps.size() + 1 == visit_schedule(p.resolution(), 4).size());
}

TEST_CASE("exact and isotropic modes differ only at transitions") {
  const DiffusionProcess single(linear_beta_schedule(50), single_level_schedule(8, 50), 1);
  MlpDenoiser m(single, 16, 7);
  SampleOptions exact, iso;
  iso.mode = SampleMode::IsotropicApprox;
  CHECK(max_abs_diff(sample_chain(single, m, 3, 0, exact).x0,
                     sample_chain(single, m, 3, 0, iso).x0) == 0.0);

  const DiffusionProcess p = levels_process({4, 8}, 40, 1);
  MlpDenoiser m2(p, 16, 7);
  exact.record = iso.record = true;
  const ChainResult a = sample_chain(p, m2, 3, 0, exact);
  const ChainResult b = sample_chain(p, m2, 3, 0, iso);
  const int tr = p.resolution().transition_steps().front();
  for (std::size_t i = 0; i < a.trajectory.steps.size(); ++i) {
    const int t = a.trajectory.steps[i].t;
    const double d = max_abs_diff(a.trajectory.steps[i].x_t, b.trajectory.steps[i].x_t);
    if (t >= tr) {
      CHECK(d == 0.0);
    } else {
      CHECK(d > 0.0);
    }
  }
}

TEST_CASE("batch determinism") {
  const DiffusionProcess p = levels_process({4, 8}, 30, 1);
  MlpDenoiser m(p, 16, 2);
  const std::vector<ChainResult> a = sample_batch(p, m, 3, 9);
  const std::vector<ChainResult> b = sample_batch(p, m, 3, 9);
  const std::vector<ChainResult> c = sample_batch(p, m, 3, 9, {}, 3);
  REQUIRE(a.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(max_abs_diff(a[i].x0, b[i].x0) == 0.0);
    CHECK(max_abs_diff(a[i].x0, c[i].x0) == 0.0);
    CHECK(max_abs_diff(a[i].x0, sample_chain(p, m, 9, i).x0) == 0.0);
  }
  CHECK(max_abs_diff(a[0].x0, a[1].x0) > 1e-3);
  const std::vector<ChainResult> one = sample_batch(p, m, 1, 9);
  CHECK(max_abs_diff(one[0].x0, a[0].x0) == 0.0);
  const std::vector<ChainResult> other = sample_batch(p, m, 2, 10);
  CHECK(max_abs_diff(other[0].x0, a[0].x0) > 1e-3);
  CHECK(max_abs_diff(other[1].x0, a[1].x0) > 1e-3);
  CHECK_THROWS_AS(sample_batch(p, m, 0, 9), ParameterError);
}

TEST_CASE("shape mismatch names the timestep") {
  const DiffusionProcess p = levels_process({4, 8}, 30, 1);
  const DiffusionProcess single(linear_beta_schedule(30), single_level_schedule(8, 30), 1);
  MlpDenoiser wrong(single, 8, 1);
  try {
    sample_chain(p, wrong, 1, 0);
    FAIL("expected ChainError");
  } catch (const ChainError& e) {
    CHECK(e.timestep() == 30);
  }
  CHECK_THROWS_AS(sample_batch(p, wrong, 2, 1, {}, 2), ChainError);
}

TEST_CASE("export clamp") {
  const Tensor x(Shape{1, 1, 4}, {-3.0, -0.5, 0.25, 1.5});
  CHECK(clamp_for_export(x).vector() == std::vector<double>{-1.0, -0.5, 0.25, 1.0});
  CHECK(x[0] == -3.0);
}

TEST_CASE("trained toy model matches pooled pixel statistics") {
  const DiffusionProcess p(linear_beta_schedule(1000), single_level_schedule(8, 1000), 3);
  const std::vector<Tensor> data = make_blob_dataset(64, 3, 8, 1);
  MlpDenoiser m(p, 128, 0);
  TrainOptions opts;
  opts.eval_every = 500;
  train_denoiser(m, p, data, opts);

  auto stats = [](const std::vector<Tensor>& xs) {
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const Tensor& x : xs) {
      for (double v : x.values()) {
        sum += v;
        sq += v * v;
        n += 1.0;
      }
    }
    const double mean = sum / n;
    return std::pair{mean, sq / n - mean * mean};
  };
  std::vector<Tensor> samples;
  for (const ChainResult& r : sample_batch(p, m, 512, 3)) samples.push_back(clamp_for_export(r.x0));
  const auto [dm, dv] = stats(data);
  const auto [sm, sv] = stats(samples);
  MESSAGE("data mean " << dm << " var " << dv << ", samples mean " << sm << " var " << sv);
  CHECK(std::abs(sm - dm) <= 0.15);
  CHECK(sv >= 0.5 * dv);
  CHECK(sv <= 2.0 * dv);
}
