#include "ssd/analysis.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ssd/errors.h"

namespace ssd {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double info_from_snr_root(double s, int quad_points) {
  if (quad_points < 16) throw ParameterError("info: quad_points must be >= 16");
  if (!(s >= 0.0)) throw DomainError("info: s must be >= 0");
  if (std::isinf(s)) return 1.0;
  const int n = quad_points % 2 == 0 ? quad_points : quad_points + 1;
  const double b = s > 9.0 ? 9.0 / s : 1.0;
  const double h = b / n;
  auto f = [s](double x) { return normal_cdf(-s * x); };
  double acc = f(0.0) + f(b);
  for (int i = 1; i < n; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(i * h);
  const double integral = acc * h / 3.0;
  return std::clamp(1.0 - 2.0 * integral, 0.0, 1.0);
}

InfoCurve info_t_curve(const NoiseSchedule& ns, int quad_points) {
  InfoCurve curve;
  curve.axis = InfoAxis::Timestep;
  curve.points.reserve(ns.T() + 1);
  for (int t = 0; t <= ns.T(); ++t) {
    const double s = t == 0 ? std::numeric_limits<double>::infinity() : std::sqrt(snr(ns, t));
    curve.points.emplace_back(t, info_from_snr_root(s, quad_points));
  }
  return curve;
}

InfoCurve info_r_curve(int points) {
  if (points < 2) throw ParameterError("info_r_curve: points must be >= 2");
  InfoCurve curve;
  curve.axis = InfoAxis::Resolution;
  for (int i = 0; i < points; ++i) {
    const double r = i == points - 1 ? 1.0 : static_cast<double>(i) / (points - 1);
    curve.points.emplace_back(r, r * r);
  }
  return curve;
}

double backtrack_ratio(const NoiseSchedule& ns, int t, int s) {
  const double ab_t = ns.alpha_bar(t);
  const double ab_s = ns.alpha_bar(s);
  return ab_s * (1.0 - ab_t) / (ab_t * (1.0 - ab_s));
}

Backtrack backtrack_timestep(const NoiseSchedule& ns, int t, double c) {
  if (!(c > 0.0 && c <= 0.25)) {
    throw DomainError("backtrack_timestep: c must lie in (0, 0.25]");
  }
  if (t < 1 || t > ns.T()) throw DomainError("backtrack_timestep: t outside [1, T]");
  Backtrack best{t, backtrack_ratio(ns, t, t)};
  double best_gap = std::abs(best.achieved_c - c);
  for (int s = t + 1; s <= ns.T(); ++s) {
    const double achieved = backtrack_ratio(ns, t, s);
    const double gap = std::abs(achieved - c);
    if (gap < best_gap) {
      best = Backtrack{s, achieved};
      best_gap = gap;
    }
  }
  if (!(best.achieved_c >= 0.5 * c && best.achieved_c <= 2.0 * c)) {
    throw NotFoundError("backtrack_timestep: no s in [" + std::to_string(t) + ", " +
                        std::to_string(ns.T()) + "] reaches c=" + std::to_string(c) +
                        " within a factor 2");
  }
  return best;
}

CovarianceAccumulator::CovarianceAccumulator(std::size_t dim, std::size_t cap)
    : mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      m2_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                static_cast<Eigen::Index>(dim))),
      delta_(static_cast<Eigen::Index>(dim)) {
  if (dim > cap) {
    throw ResourceError("covariance dimension " + std::to_string(dim) + " exceeds cap " +
                        std::to_string(cap));
  }
}

void CovarianceAccumulator::add(const Tensor& sample) { add(sample.values()); }

void CovarianceAccumulator::add(std::span<const double> sample) {
  if (static_cast<Eigen::Index>(sample.size()) != mean_.size()) {
    throw ShapeError("covariance sample has dimension " + std::to_string(sample.size()) +
                     ", expected " + std::to_string(mean_.size()));
  }
  ++count_;
  const Eigen::Map<const Eigen::VectorXd> x(sample.data(), mean_.size());
  delta_ = x - mean_;
  mean_ += delta_ / static_cast<double>(count_);
  // m2 += delta_old * delta_new^T, symmetric rank-1 update
  m2_.selfadjointView<Eigen::Lower>().rankUpdate(delta_, 1.0 - 1.0 / count_);
}

Eigen::MatrixXd CovarianceAccumulator::covariance() const {
  if (count_ < 2) throw ParameterError("covariance needs at least two samples");
  Eigen::MatrixXd full = m2_.selfadjointView<Eigen::Lower>();
  return full / static_cast<double>(count_ - 1);
}

Eigen::MatrixXd empirical_covariance(std::span<const Tensor> samples, std::size_t cap) {
  if (samples.size() < 2) throw ParameterError("empirical_covariance: need >= 2 samples");
  CovarianceAccumulator acc(samples.front().size(), cap);
  for (const Tensor& s : samples) {
    require_shape(s.shape(), samples.front().shape(), "empirical_covariance sample");
    acc.add(s);
  }
  return acc.covariance();
}

}  // namespace ssd
