#include "ssd/schedules.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "ssd/errors.h"

namespace ssd {

// ---------------------------------------------------------------------------
// NoiseSchedule

NoiseSchedule::NoiseSchedule(std::vector<double> betas) {
  if (betas.empty()) throw ParameterError("noise schedule needs T >= 1");
  beta_.reserve(betas.size() + 1);
  beta_.push_back(0.0);
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) {
      throw ParameterError("beta must lie in (0, 1), got " + std::to_string(b));
    }
    beta_.push_back(b);
  }
  const int T = static_cast<int>(betas.size());
  alpha_bar_.assign(T + 1, 1.0);
  sigma_sq_.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - beta_[t]);
    sigma_sq_[t] = 1.0 - alpha_bar_[t];
  }
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > T()) {
    throw DomainError("timestep " + std::to_string(t) + " outside [1, " +
                      std::to_string(T()) + "]");
  }
}

void NoiseSchedule::check_state(int t) const {
  if (t < 0 || t > T()) {
    throw DomainError("timestep " + std::to_string(t) + " outside [0, " +
                      std::to_string(T()) + "]");
  }
}

double NoiseSchedule::beta(int t) const {
  check_step(t);
  return beta_[t];
}

double NoiseSchedule::alpha(int t) const {
  check_step(t);
  return 1.0 - beta_[t];
}

double NoiseSchedule::alpha_bar(int t) const {
  check_state(t);
  return alpha_bar_[t];
}

double NoiseSchedule::sigma_sq(int t) const {
  check_state(t);
  return sigma_sq_[t];
}

double NoiseSchedule::sigma(int t) const { return std::sqrt(sigma_sq(t)); }

double NoiseSchedule::a(int t) const { return std::sqrt(alpha_bar(t)); }

NoiseSchedule linear_beta_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw ParameterError("linear_beta_schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ParameterError("linear_beta_schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(T);
  for (int t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
    betas[t - 1] = beta_start + (beta_end - beta_start) * frac;
  }
  return NoiseSchedule(std::move(betas));
}

double snr(const NoiseSchedule& sched, int t) {
  if (t == 0) throw DomainError("snr is unbounded at t = 0 (sigma_0 = 0)");
  const double ab = sched.alpha_bar(t);
  return ab / sched.sigma_sq(t);
}

double min_snr_weight(const NoiseSchedule& sched, int t, double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("min_snr_weight: gamma must be > 0");
  return std::min(snr(sched, t), gamma);
}

// ---------------------------------------------------------------------------
// Schedule families

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Equal: return "equal";
    case ScheduleKind::ConvexDecay: return "convex";
    case ScheduleKind::TanhLikeDecay: return "tanh";
    case ScheduleKind::SigmoidLikeDecay: return "sigmoid";
    case ScheduleKind::Explicit: return "explicit";
  }
  return "?";
}

ScheduleSpec parse_schedule_spec(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  ScheduleSpec spec;
  if (name == "equal") {
    spec.kind = ScheduleKind::Equal;
  } else if (name == "convex") {
    spec.kind = ScheduleKind::ConvexDecay;
  } else if (name == "tanh") {
    spec.kind = ScheduleKind::TanhLikeDecay;
  } else if (name == "sigmoid") {
    spec.kind = ScheduleKind::SigmoidLikeDecay;
  } else if (name == "explicit") {
    spec.kind = ScheduleKind::Explicit;
  } else {
    throw ParameterError("unknown schedule '" + std::string(text) + "'");
  }
  const bool needs_gamma = spec.kind == ScheduleKind::ConvexDecay ||
                           spec.kind == ScheduleKind::TanhLikeDecay ||
                           spec.kind == ScheduleKind::SigmoidLikeDecay;
  if (colon == std::string_view::npos) {
    if (needs_gamma) {
      throw ParameterError("schedule '" + std::string(name) + "' needs a gamma, e.g. " +
                           std::string(name) + ":0.5");
    }
    return spec;
  }
  const std::string g(text.substr(colon + 1));
  try {
    std::size_t used = 0;
    spec.gamma = std::stod(g, &used);
    if (used != g.size()) throw std::invalid_argument(g);
  } catch (const std::exception&) {
    throw ParameterError("bad schedule gamma '" + g + "'");
  }
  if (!(spec.gamma > 0.0)) throw ParameterError("schedule gamma must be > 0");
  return spec;
}

std::string format_schedule_spec(const ScheduleSpec& spec) {
  std::string out(to_string(spec.kind));
  if (spec.kind == ScheduleKind::ConvexDecay || spec.kind == ScheduleKind::TanhLikeDecay ||
      spec.kind == ScheduleKind::SigmoidLikeDecay) {
    std::ostringstream os;
    os << spec.gamma;
    out += ":" + os.str();
  }
  return out;
}

namespace {

// x(v) = 0.5 + sign(v) |v|^gamma for v in [-0.5, 0.5], held inside [0, 1]
// where the cubic below is monotone.
double tanh_like_x(double v, double gamma) {
  const double mag = std::min(std::pow(std::abs(v), gamma), 0.5);
  return 0.5 + (v < 0.0 ? -mag : mag);
}

double cubic(double x) { return -2.0 * x * x * x + 3.0 * x * x - 0.5; }

}  // namespace

double tanh_like(double u, double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("tanh_like: gamma must be > 0");
  u = std::clamp(u, 0.0, 1.0);
  const double norm = cubic(tanh_like_x(0.5, gamma));
  const double phat = cubic(tanh_like_x(u - 0.5, gamma)) / norm;
  return std::clamp(0.5 * phat + 0.5, 0.0, 1.0);
}

double sigmoid_like(double y, double gamma) {
  y = std::clamp(y, 0.0, 1.0);
  // Preimage of y is an interval (a plateau for gamma < 1, or a few ulps
  // wide around u = 0.5 for large gamma); return its midpoint, which keeps
  // sigmoid_like(1 - y) = 1 - sigmoid_like(y).
  double lo = 0.0, hi = 1.0;  // smallest u with tanh_like(u) >= y
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (tanh_like(mid, gamma) >= y ? hi : lo) = mid;
  }
  const double first = hi;
  lo = 0.0;
  hi = 1.0;  // largest u with tanh_like(u) <= y
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (tanh_like(mid, gamma) <= y ? lo : hi) = mid;
  }
  return 0.5 * (first + lo);
}

double decay_progress(ScheduleKind kind, double gamma, double tau) {
  tau = std::clamp(tau, 0.0, 1.0);
  switch (kind) {
    case ScheduleKind::Equal:
    case ScheduleKind::Explicit:
      return tau;
    case ScheduleKind::ConvexDecay:
      if (!(gamma > 0.0)) throw ParameterError("ConvexDecay: gamma must be > 0");
      if (gamma == 1.0) return tau;
      return 1.0 - std::pow(1.0 - tau, gamma);
    case ScheduleKind::TanhLikeDecay:
      return 1.0 - tanh_like(1.0 - tau, gamma);
    case ScheduleKind::SigmoidLikeDecay:
      return 1.0 - sigmoid_like(1.0 - tau, gamma);
  }
  throw ParameterError("unknown schedule kind");
}

// ---------------------------------------------------------------------------
// ResolutionSchedule

namespace {

void check_levels(const std::vector<int>& levels) {
  if (levels.empty()) throw ParameterError("resolution levels must be nonempty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1) throw ParameterError("resolution levels must be >= 1");
    if (i > 0 && levels[i] <= levels[i - 1]) {
      throw ParameterError("resolution levels must be strictly ascending");
    }
  }
}

}  // namespace

ResolutionSchedule::ResolutionSchedule(ScheduleKind kind, double gamma,
                                       std::vector<int> levels, std::vector<int> table)
    : kind_(kind),
      gamma_(gamma),
      levels_(std::move(levels)),
      T_(static_cast<int>(table.size()) - 1),
      r_of_t_(std::move(table)) {
  validate();
}

void ResolutionSchedule::validate() const {
  if (T_ < 1) throw ConstructionError("resolution schedule needs T >= 1");
  if (r_of_t_.front() != r_max()) throw ConstructionError("r(0) must equal r_max");
  if (r_of_t_.back() != r_min()) throw ConstructionError("r(T) must equal r_min");
  int transitions = 0;
  for (int t = 0; t <= T_; ++t) {
    if (!std::binary_search(levels_.begin(), levels_.end(), r_of_t_[t])) {
      throw ConstructionError("r(" + std::to_string(t) + ") = " +
                              std::to_string(r_of_t_[t]) + " is not a level");
    }
    if (t > 0 && r_of_t_[t] > r_of_t_[t - 1]) {
      throw ConstructionError("resolution schedule increases at t = " + std::to_string(t));
    }
    if (t > 0 && r_of_t_[t] != r_of_t_[t - 1]) ++transitions;
  }
  if (transitions != static_cast<int>(levels_.size()) - 1) {
    throw ConstructionError("resolution schedule has " + std::to_string(transitions) +
                            " transitions for " + std::to_string(levels_.size()) +
                            " levels");
  }
}

int ResolutionSchedule::resolution(int t) const {
  if (t < 0 || t > T_) {
    throw DomainError("resolution: timestep " + std::to_string(t) + " outside [0, " +
                      std::to_string(T_) + "]");
  }
  return r_of_t_[t];
}

std::vector<int> ResolutionSchedule::transition_steps() const {
  std::vector<int> out;
  for (int t = 1; t <= T_; ++t) {
    if (r_of_t_[t] != r_of_t_[t - 1]) out.push_back(t);
  }
  return out;
}

ResolutionSchedule ResolutionSchedule::from_table(std::vector<int> levels,
                                                  std::vector<int> r_of_t) {
  check_levels(levels);
  return ResolutionSchedule(ScheduleKind::Explicit, 1.0, std::move(levels),
                            std::move(r_of_t));
}

ResolutionSchedule make_resolution_schedule(ScheduleKind kind, double gamma,
                                            std::vector<int> levels, int T) {
  check_levels(levels);
  const int n = static_cast<int>(levels.size());
  if (T < 1 || T < n) {
    throw ParameterError("make_resolution_schedule: need T >= number of levels");
  }
  if (kind != ScheduleKind::Equal && kind != ScheduleKind::Explicit && !(gamma > 0.0)) {
    throw ParameterError("make_resolution_schedule: gamma must be > 0");
  }

  auto raw_index = [&](int t) {
    const double tau = T == 1 ? t : static_cast<double>(t) / (T - 1);
    const double g = decay_progress(kind, gamma, tau);
    const int i = n - 1 - static_cast<int>(std::floor(n * g));
    return std::clamp(i, 0, n - 1);
  };

  std::vector<int> raw(T + 1);
  for (int t = 0; t <= T; ++t) {
    raw[t] = raw_index(t);
    if (t > 0 && raw[t] > raw[t - 1]) {
      throw ConstructionError("resolution schedule family is not monotone at t = " +
                              std::to_string(t));
    }
  }

  // step[j] = first t at which the level index has dropped by j.
  std::vector<int> step(n, 0);
  for (int j = 1; j < n; ++j) {
    int t = 1;
    while (t <= T && raw[t] > n - 1 - j) ++t;
    step[j] = std::min(t, T);
  }
  for (int j = 1; j < n; ++j) step[j] = std::max(step[j], step[j - 1] + 1);
  if (n > 1) step[n - 1] = std::min(step[n - 1], T);
  for (int j = n - 2; j >= 1; --j) step[j] = std::min(step[j], step[j + 1] - 1);

  std::vector<int> table(T + 1);
  int dropped = 0;
  for (int t = 0; t <= T; ++t) {
    while (dropped + 1 < n && step[dropped + 1] <= t) ++dropped;
    table[t] = levels[n - 1 - dropped];
  }
  return ResolutionSchedule(kind, gamma, std::move(levels), std::move(table));
}

std::vector<int> transition_steps(const ResolutionSchedule& rs) {
  return rs.transition_steps();
}

ResolutionSchedule single_level_schedule(int resolution, int T) {
  return make_resolution_schedule(ScheduleKind::Equal, 1.0, {resolution}, T);
}

std::vector<int> dyadic_levels(int r_min, int r_max) {
  if (r_min < 1 || r_max < r_min) throw ParameterError("dyadic_levels: need 1 <= r_min <= r_max");
  std::vector<int> out;
  for (int r = r_min; r <= r_max; r *= 2) {
    out.push_back(r);
    if (r == r_max) return out;
  }
  throw ParameterError("dyadic_levels: r_max / r_min is not a power of two");
}

std::vector<int> parse_levels(std::string_view text) {
  std::vector<int> out;
  if (const auto dots = text.find(".."); dots != std::string_view::npos) {
    const auto lo = parse_levels(text.substr(0, dots));
    const auto hi = parse_levels(text.substr(dots + 2));
    if (lo.size() != 1 || hi.size() != 1 || hi[0] <= lo[0]) {
      throw ParameterError("bad level range '" + std::string(text) + "'");
    }
    for (int r = lo[0]; r <= hi[0]; ++r) out.push_back(r);
    return out;
  }
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view item = text.substr(pos, comma - pos);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw ParameterError("bad level list '" + std::string(text) + "'");
    }
    out.push_back(value);
    pos = comma + 1;
  }
  check_levels(out);
  return out;
}

}  // namespace ssd
