#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ssd/linops.h"
#include "ssd/schedules.h"
#include "ssd/tensor.h"

namespace ssd {

/// Standard normal CDF via erfc.
double normal_cdf(double z);

enum class InfoAxis { Timestep, Resolution };

struct InfoCurve {
  InfoAxis axis = InfoAxis::Timestep;
  std::vector<std::pair<double, double>> points;  // (coordinate, info)
};

constexpr int kDefaultQuadPoints = 512;

/// Expected fraction of signal-dominated pixels for x0 ~ U(-1, 1):
///   1 - 2 * int_0^1 Phi(-s x) dx,
/// by composite Simpson. The integrand is negligible (< 1e-19) beyond
/// x = 9 / s, so the rule is applied on [0, min(1, 9 / s)] to keep its
/// accuracy uniform in s. s = +inf gives 1 exactly.
double info_from_snr_root(double s, int quad_points = kDefaultQuadPoints);

/// Info(t) for t = 0..T with s(t) = sqrt(snr(t)) and s(0) = +inf.
InfoCurve info_t_curve(const NoiseSchedule& ns, int quad_points = kDefaultQuadPoints);

/// (r, r^2) on a uniform grid of [0, 1].
InfoCurve info_r_curve(int points);

struct Backtrack {
  int s = 0;
  double achieved_c = 0.0;
};

/// c(s) = abar_s (1 - abar_t) / (abar_t (1 - abar_s)), for s in [t, T].
double backtrack_ratio(const NoiseSchedule& ns, int t, int s);

/// Exhaustive search over integer s in [t, T] for the c(s) nearest to c
/// (ties resolved toward the smaller s). NotFoundError unless the best c(s)
/// is within a factor 2 of c.
Backtrack backtrack_timestep(const NoiseSchedule& ns, int t, double c);

/// Running mean / unbiased covariance of flattened samples (Welford update).
class CovarianceAccumulator {
 public:
  explicit CovarianceAccumulator(std::size_t dim, std::size_t cap = kDenseCap);

  void add(const Tensor& sample);
  void add(std::span<const double> sample);
  std::size_t count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  /// Unbiased (n - 1) normalisation; needs at least two samples.
  Eigen::MatrixXd covariance() const;

 private:
  std::size_t count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
  Eigen::VectorXd delta_;
};

Eigen::MatrixXd empirical_covariance(std::span<const Tensor> samples,
                                     std::size_t cap = kDenseCap);

}  // namespace ssd
