#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ssd {

/// Variance schedule of a discrete diffusion process.
///
/// Index conventions: beta/alpha are defined for t in [1, T]; alpha_bar,
/// sigma and the signal coefficient a are defined for t in [0, T] with
/// alpha_bar(0) = 1, so sigma(0) = 0 and a(0) = 1.
class NoiseSchedule {
 public:
  /// Takes beta[1..T] (beta[0] of the vector is beta_1).
  explicit NoiseSchedule(std::vector<double> betas);

  int T() const { return static_cast<int>(beta_.size()) - 1; }
  double beta(int t) const;
  double alpha(int t) const;
  double alpha_bar(int t) const;
  double sigma(int t) const;
  double sigma_sq(int t) const;
  /// Signal coefficient a_t = sqrt(alpha_bar_t).
  double a(int t) const;

 private:
  void check_step(int t) const;
  void check_state(int t) const;

  std::vector<double> beta_;       // [0] unused
  std::vector<double> alpha_bar_;  // [0] == 1
  std::vector<double> sigma_sq_;
};

constexpr double kDefaultBetaStart = 1e-4;
constexpr double kDefaultBetaEnd = 0.02;
constexpr double kMinSnrGamma = 5.0;

/// Betas linearly interpolated from beta_start (t = 1) to beta_end (t = T).
NoiseSchedule linear_beta_schedule(int T, double beta_start = kDefaultBetaStart,
                                   double beta_end = kDefaultBetaEnd);

/// s^2(t) = alpha_bar_t / (1 - alpha_bar_t); DomainError at t = 0.
double snr(const NoiseSchedule& sched, int t);

/// min(s^2(t), gamma).
double min_snr_weight(const NoiseSchedule& sched, int t, double gamma = kMinSnrGamma);

enum class ScheduleKind { Equal, ConvexDecay, TanhLikeDecay, SigmoidLikeDecay, Explicit };

std::string_view to_string(ScheduleKind kind);

/// Parses "equal", "convex:0.5", "tanh:3", "sigmoid:3", "explicit".
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Equal;
  double gamma = 1.0;
};
ScheduleSpec parse_schedule_spec(std::string_view text);
std::string format_schedule_spec(const ScheduleSpec& spec);

// Continuous resolution-decay shapes on [0, 1]. Each returns the fraction of
// the level range already descended at normalised time tau, with
// progress(0) = 0 and progress(1) = 1.

/// Normalised tanh-like polynomial map [0,1] -> [0,1]: steep at both ends and
/// flat in the middle for gamma > 1.
double tanh_like(double u, double gamma);
/// Inverse of tanh_like (by bisection to 1e-12 in u). Where tanh_like is flat
/// (plateaus for gamma < 1) this returns the midpoint of the preimage.
double sigmoid_like(double u, double gamma);
double decay_progress(ScheduleKind kind, double gamma, double tau);

/// Map from timestep to spatial resolution over a discrete level list.
class ResolutionSchedule {
 public:
  int T() const { return T_; }
  ScheduleKind kind() const { return kind_; }
  double gamma() const { return gamma_; }
  /// Ascending, r_min first.
  const std::vector<int>& levels() const { return levels_; }
  int r_min() const { return levels_.front(); }
  int r_max() const { return levels_.back(); }

  /// r(t) for t in [0, T].
  int resolution(int t) const;
  const std::vector<int>& table() const { return r_of_t_; }
  bool is_transition(int t) const { return t >= 1 && t <= T_ && r_of_t_[t] != r_of_t_[t - 1]; }

  /// All t in [1, T] with r(t) != r(t-1), ascending.
  std::vector<int> transition_steps() const;

  /// Validates and wraps a precomputed table (kind Explicit).
  static ResolutionSchedule from_table(std::vector<int> levels, std::vector<int> r_of_t);

 private:
  friend ResolutionSchedule make_resolution_schedule(ScheduleKind, double,
                                                     std::vector<int>, int);
  ResolutionSchedule(ScheduleKind kind, double gamma, std::vector<int> levels,
                     std::vector<int> table);
  void validate() const;

  ScheduleKind kind_ = ScheduleKind::Equal;
  double gamma_ = 1.0;
  std::vector<int> levels_;
  int T_ = 0;
  std::vector<int> r_of_t_;
};

/// Builds r(t) for t in [0, T] from the named family. Normalised time is
/// tau = t / (T - 1) clamped to [0, 1]; the raw level index
/// n - 1 - floor(n * progress(tau)) is clamped to [0, n - 1]. If the raw
/// table would skip a level or stack transitions (coarse T), transition steps
/// are pushed apart so every level is visited and each step changes the level
/// by at most one. Explicit uses the Equal timing over an arbitrary ascending
/// level list (e.g. the gradual 2..32 downsizing).
ResolutionSchedule make_resolution_schedule(ScheduleKind kind, double gamma,
                                            std::vector<int> levels, int T);

/// All t in [1, T] with r(t) != r(t-1).
std::vector<int> transition_steps(const ResolutionSchedule& rs);

/// Single-level schedule at `resolution` (the DDPM degenerate case).
ResolutionSchedule single_level_schedule(int resolution, int T);

/// levels = [r_min, 2 r_min, ..., r_max]; throws unless r_max / r_min is a power of two.
std::vector<int> dyadic_levels(int r_min, int r_max);

/// "8,16,32" or an inclusive unit-step range "2..32".
std::vector<int> parse_levels(std::string_view text);

}  // namespace ssd
