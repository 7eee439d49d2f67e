#include <cmath>

#include "doctest.h"
#include "ssd/analysis.h"
#include "ssd/errors.h"
#include "ssd/lanczos.h"
#include "ssd/process.h"
#include "ssd/rng.h"
#include "ssd/verify.h"

using namespace ssd;

namespace {

SymmetricOperator scaled(double c) {
  return [c](const Tensor& v) { return c * v; };
}

SymmetricOperator diagonal(const Tensor& d) {
  return [d](const Tensor& v) {
    Tensor out = v;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= d[i];
    return out;
  };
}

}  // namespace

TEST_CASE("identity returns x after one iteration") {
  CounterRng rng(1, 1);
  const Tensor x = rng.normal_tensor(Shape{1, 4, 4});
  const LanczosResult r = lanczos_sqrt_apply(scaled(1.0), x);
  CHECK(r.iterations == 1);
  CHECK(r.breakdown);
  CHECK(max_abs_diff(r.value, x) < 1e-15);
}

TEST_CASE("scaled identity returns sqrt(c) x") {
  CounterRng rng(1, 2);
  const Tensor x = rng.normal_tensor(Shape{2, 3, 3});
  const LanczosResult r = lanczos_sqrt_apply(scaled(0.37), x);
  CHECK(max_abs_diff(r.value, std::sqrt(0.37) * x) < 1e-14);
}

TEST_CASE("zero input returns zero") {
  const Tensor x(Shape{1, 3, 3});
  const LanczosResult r = lanczos_sqrt_apply(scaled(2.0), x);
  CHECK(r.value.max_abs() == 0.0);
}

TEST_CASE("diagonal operators with at most k distinct eigenvalues are exact") {
  const CheckResult c = check_lanczos_diagonal(3, 32, 1e-10);
  CHECK(c.pass);
  // Also without reorthogonalisation for a small spectrum.
  Tensor d(Shape{1, 1, 30});
  for (int i = 0; i < 30; ++i) d[i] = 1.0 + (i % 3);
  CounterRng rng(2, 2);
  const Tensor x = rng.normal_tensor(d.shape());
  LanczosConfig cfg;
  cfg.reorthogonalize = false;
  cfg.tol = 0.0;
  const Tensor y = lanczos_sqrt_apply(diagonal(d), x, cfg).value;
  for (int i = 0; i < 30; ++i) CHECK(std::abs(y[i] - std::sqrt(d[i]) * x[i]) < 1e-10);
}

TEST_CASE("posterior operator of an 8->4 transition matches the dense square root") {
  const DiffusionProcess p(linear_beta_schedule(100),
                           make_resolution_schedule(ScheduleKind::Equal, 1.0, {4, 8}, 100), 1);
  for (int t : p.resolution().transition_steps()) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const CheckResult c = check_lanczos_dense(p, t, seed, 1e-4);
      CHECK_MESSAGE(c.pass, c.detail << " err=" << c.error);
    }
  }
}

TEST_CASE("eig_floor clamps Ritz values") {
  // A = diag(4, 0): sqrt is diag(2, 0); with floor 1 the zero eigenvalue becomes 1.
  Tensor d(Shape{1, 1, 2}, {4.0, 0.0});
  const Tensor x(Shape{1, 1, 2}, {1.0, 1.0});
  LanczosConfig cfg;
  cfg.eig_floor = 1.0;
  const Tensor y = lanczos_sqrt_apply(diagonal(d), x, cfg).value;
  CHECK(y[0] == doctest::Approx(2.0));
  CHECK(y[1] == doctest::Approx(1.0));
}

TEST_CASE("config validation") {
  LanczosConfig cfg;
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = {};
  cfg.tol = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("symmetry defect detects asymmetric operators") {
  Tensor d(Shape{1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(symmetry_defect(diagonal(d), d.shape(), 20, 1) < 1e-14);
  const SymmetricOperator shift = [](const Tensor& v) {
    Tensor out(v.shape());
    for (std::size_t i = 0; i + 1 < v.size(); ++i) out[i + 1] = v[i];
    return out;
  };
  CHECK(symmetry_defect(shift, d.shape(), 20, 1) > 1e-3);
}

TEST_CASE("draws through the square root have covariance A") {
  // A = I - rho M^T M for a 4->2 resize (dim 16); 40000 draws.
  const LinearOperator m = resize_op(1, 4, 2, 0.95, 1.0);
  const double rho = 0.8;
  const SymmetricOperator A = [&](const Tensor& v) {
    Tensor out = v;
    out.axpy(-rho, m.adjoint(m.apply(v)));
    return out;
  };
  const Eigen::MatrixXd Md = materialize_dense(m);
  const Eigen::MatrixXd Ad = Eigen::MatrixXd::Identity(16, 16) - rho * Md.transpose() * Md;
  CovarianceAccumulator acc(16);
  const int n = 40000;
  for (int k = 0; k < n; ++k) {
    CounterRng rng(77, k);
    acc.add(lanczos_sqrt_apply(A, rng.normal_tensor(Shape{1, 4, 4})).value);
  }
  const Eigen::MatrixXd C = acc.covariance();
  int outside = 0;
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double se = std::sqrt((Ad(i, j) * Ad(i, j) + Ad(i, i) * Ad(j, j)) / n);
      if (std::abs(C(i, j) - Ad(i, j)) > 4.0 * se) ++outside;
    }
  }
  CHECK(outside == 0);
}
