#pragma once

#include <cstdint>
#include <optional>

#include "ssd/lanczos.h"
#include "ssd/linops.h"
#include "ssd/schedules.h"
#include "ssd/tensor.h"

namespace ssd {

/// Generalised linear diffusion process with isotropic marginals:
///   q(x_t | x_0) = N(M_{1:t} x_0, sigma_t^2 I)
/// where M_t resizes from r(t-1) to r(t) and attenuates by a_t / a_{t-1}.
class DiffusionProcess {
 public:
  DiffusionProcess(NoiseSchedule noise, ResolutionSchedule resolution, int channels,
                   LanczosConfig lanczos = {});

  const NoiseSchedule& noise() const { return noise_; }
  const ResolutionSchedule& resolution() const { return resolution_; }
  int channels() const { return channels_; }
  int T() const { return noise_.T(); }
  const LanczosConfig& lanczos() const { return lanczos_; }

  Shape shape_at(int t) const;
  LinearOperator step_operator(int t) const;
  LinearOperator cumulative(int t) const;
  LinearOperator jump(int s, int t) const;

  const FeasibilityReport& feasibility() const { return feasibility_; }
  bool feasible(int t) const;

 private:
  NoiseSchedule noise_;
  ResolutionSchedule resolution_;
  int channels_;
  LanczosConfig lanczos_;
  FeasibilityReport feasibility_;
};

/// x_t = M_{1:t} x0 + sigma_t eps.
Tensor marginal_sample(const DiffusionProcess& p, const Tensor& x0, int t, const Tensor& eps);

/// (sigma_t^2 I - sigma_{t-1}^2 M_t M_t^T) v; StateError at infeasible steps.
Tensor transition_cov_apply(const DiffusionProcess& p, int t, const Tensor& v);

/// Parameters of q(x_s | x_t, x_0) for s < t (normally s = t - 1). The
/// covariance sigma_s^2 I - (sigma_s^4 / sigma_t^2) M^T M is kept implicit.
struct PosteriorParams {
  int t = 0;
  int s = 0;
  Tensor mean;
  /// sigma_s^2 / sigma_t^2
  double rho = 0.0;
  double sigma_prev = 0.0;
  double sigma_t = 0.0;
  LinearOperator op = LinearOperator::identity(Shape{});
};

PosteriorParams posterior_params(const DiffusionProcess& p, const Tensor& x_t,
                                 const Tensor& mu_prev, int t);
/// Multi-step jump t -> s through M_{s+1:t}.
PosteriorParams posterior_params(const DiffusionProcess& p, const Tensor& x_t,
                                 const Tensor& mu_prev, int t, int s);

/// Sigma_{t->s} v, applied implicitly.
Tensor posterior_cov_apply(const PosteriorParams& params, const Tensor& v);

/// Scalar posterior variance when M is a scaled identity (the DDPM
/// beta-tilde); DomainError for resizing steps.
double posterior_scalar_variance(const PosteriorParams& params);

enum class SampleMode { Exact, IsotropicApprox };

/// Draws from the posterior given standard-normal `eps` at r(s).
///
/// Exact: mean + sigma_s * A^{1/2} eps with A = I - rho M^T M (Lanczos);
/// resolution-preserving steps use the closed-form scalar variance.
/// IsotropicApprox: at resizing steps the Lanczos draw serves only as a
/// reference; the returned noise is `aux` (standard normal) scaled per channel
/// to the reference draw's empirical standard deviation over H x W.
Tensor posterior_sample(const DiffusionProcess& p, const PosteriorParams& params,
                        const Tensor& eps, SampleMode mode = SampleMode::Exact,
                        const Tensor* aux = nullptr);

struct ForwardConsistency {
  int t = 0;
  double covariance_error = 0.0;  // max |Sigma_t - (M Sigma_{t-1} M^T + Sigma_{t|t-1})|
  double mean_error = 0.0;        // max |M_t mu_{t-1} - mu_t|
  bool pass = false;
};

/// Dense check that composing the transition with the (t-1)-marginal
/// reproduces the isotropic t-marginal.
ForwardConsistency forward_consistency_check(const DiffusionProcess& p, int t,
                                             double tol = 1e-8, std::uint64_t seed = 1);

}  // namespace ssd
