#include "ssd/process.h"

#include <cmath>
#include <iostream>

#include "ssd/errors.h"
#include "ssd/rng.h"

namespace ssd {

DiffusionProcess::DiffusionProcess(NoiseSchedule noise, ResolutionSchedule resolution,
                                   int channels, LanczosConfig lanczos)
    : noise_(std::move(noise)),
      resolution_(std::move(resolution)),
      channels_(channels),
      lanczos_(lanczos) {
  if (noise_.T() != resolution_.T()) {
    throw ParameterError("noise schedule T=" + std::to_string(noise_.T()) +
                         " but resolution schedule T=" + std::to_string(resolution_.T()));
  }
  if (channels_ < 1) throw ParameterError("channels must be >= 1");
  lanczos_.validate();
  feasibility_ = check_psd_feasibility(noise_, resolution_, 1);
  if (!feasibility_.pass) {
    std::cerr << "warning: transition covariance is not PSD at "
              << feasibility_.infeasible_steps.size() << " step(s), first t="
              << feasibility_.infeasible_steps.front()
              << "; sampling through those steps will fail\n";
  }
}

Shape DiffusionProcess::shape_at(int t) const {
  const int r = resolution_.resolution(t);
  return Shape{channels_, r, r};
}

LinearOperator DiffusionProcess::step_operator(int t) const {
  return ssd::step_operator(noise_, resolution_, channels_, t);
}

LinearOperator DiffusionProcess::cumulative(int t) const {
  return cumulative_M(noise_, resolution_, channels_, t);
}

LinearOperator DiffusionProcess::jump(int s, int t) const {
  return jump_operator(noise_, resolution_, channels_, s, t);
}

bool DiffusionProcess::feasible(int t) const {
  if (t < 1 || t > T()) throw DomainError("feasible: t outside [1, T]");
  return feasibility_.entries[t - 1].pass;
}

Tensor marginal_sample(const DiffusionProcess& p, const Tensor& x0, int t,
                       const Tensor& eps) {
  require_shape(x0.shape(), p.shape_at(0), "marginal_sample x0");
  require_shape(eps.shape(), p.shape_at(t), "marginal_sample eps");
  Tensor x = p.cumulative(t).apply(x0);
  x.axpy(p.noise().sigma(t), eps);
  return x;
}

Tensor transition_cov_apply(const DiffusionProcess& p, int t, const Tensor& v) {
  if (t < 1 || t > p.T()) throw DomainError("transition_cov_apply: t outside [1, T]");
  require_shape(v.shape(), p.shape_at(t), "transition_cov_apply v");
  if (!p.feasible(t)) {
    throw StateError("transition covariance at t=" + std::to_string(t) + " is not PSD");
  }
  const LinearOperator m = p.step_operator(t);
  Tensor out = p.noise().sigma_sq(t) * v;
  out.axpy(-p.noise().sigma_sq(t - 1), m.apply(m.adjoint(v)));
  return out;
}

PosteriorParams posterior_params(const DiffusionProcess& p, const Tensor& x_t,
                                 const Tensor& mu_prev, int t) {
  return posterior_params(p, x_t, mu_prev, t, t - 1);
}

PosteriorParams posterior_params(const DiffusionProcess& p, const Tensor& x_t,
                                 const Tensor& mu_prev, int t, int s) {
  if (t < 1 || t > p.T()) throw DomainError("posterior_params: t outside [1, T]");
  if (s < 0 || s >= t) throw DomainError("posterior_params: need 0 <= s < t");
  require_shape(x_t.shape(), p.shape_at(t), "posterior_params x_t");
  require_shape(mu_prev.shape(), p.shape_at(s), "posterior_params mu");

  PosteriorParams out;
  out.t = t;
  out.s = s;
  out.op = p.jump(s, t);
  out.sigma_t = p.noise().sigma(t);
  out.sigma_prev = p.noise().sigma(s);
  out.rho = p.noise().sigma_sq(s) / p.noise().sigma_sq(t);
  out.mean = mu_prev;
  if (out.rho != 0.0) {
    Tensor residual = x_t - out.op.apply(mu_prev);
    out.mean.axpy(out.rho, out.op.adjoint(residual));
  }
  return out;
}

Tensor posterior_cov_apply(const PosteriorParams& params, const Tensor& v) {
  const double var = params.sigma_prev * params.sigma_prev;
  Tensor out = var * v;
  if (params.rho != 0.0) {
    out.axpy(-var * params.rho, params.op.adjoint(params.op.apply(v)));
  }
  return out;
}

double posterior_scalar_variance(const PosteriorParams& params) {
  if (params.op.kind() != OperatorKind::ScaledIdentity) {
    throw DomainError("posterior variance is not scalar at a resizing step");
  }
  const double var_s = params.sigma_prev * params.sigma_prev;
  if (var_s == 0.0) return 0.0;
  const double var_t = params.sigma_t * params.sigma_t;
  const double c = params.op.scale();
  // sigma_s^2 (sigma_t^2 - c^2 sigma_s^2) / sigma_t^2
  return var_s * (var_t - c * c * var_s) / var_t;
}

Tensor posterior_sample(const DiffusionProcess& p, const PosteriorParams& params,
                        const Tensor& eps, SampleMode mode, const Tensor* aux) {
  require_shape(eps.shape(), params.mean.shape(), "posterior_sample eps");
  if (params.sigma_prev == 0.0) return params.mean;

  if (params.op.kind() == OperatorKind::ScaledIdentity) {
    const double var = posterior_scalar_variance(params);
    if (var < 0.0) {
      throw StateError("negative posterior variance at t=" + std::to_string(params.t));
    }
    Tensor out = params.mean;
    out.axpy(std::sqrt(var), eps);
    return out;
  }

  for (int k = params.s + 1; k <= params.t; ++k) {
    if (!p.feasible(k)) {
      throw StateError("posterior covariance undefined: step t=" + std::to_string(k) +
                       " is not PSD-feasible");
    }
  }
  const double rho = params.rho;
  const LinearOperator& m = params.op;
  const SymmetricOperator A = [&m, rho](const Tensor& v) {
    Tensor out = v;
    out.axpy(-rho, m.adjoint(m.apply(v)));
    return out;
  };
  Tensor noise = lanczos_sqrt_apply(A, eps, p.lanczos()).value;
  noise *= params.sigma_prev;

  if (mode == SampleMode::IsotropicApprox) {
    if (aux == nullptr) throw ParameterError("isotropic approximation needs an aux draw");
    require_shape(aux->shape(), eps.shape(), "posterior_sample aux");
    Tensor iso(noise.shape());
    for (int c = 0; c < noise.channels(); ++c) {
      const auto ref = noise.plane(c);
      double mean = 0.0;
      for (double v : ref) mean += v;
      mean /= static_cast<double>(ref.size());
      double var = 0.0;
      for (double v : ref) var += (v - mean) * (v - mean);
      var /= static_cast<double>(ref.size());
      const double sd = std::sqrt(var);
      const auto src = aux->plane(c);
      auto dst = iso.plane(c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = sd * src[i];
    }
    noise = std::move(iso);
  }
  Tensor out = params.mean;
  out += noise;
  return out;
}

ForwardConsistency forward_consistency_check(const DiffusionProcess& p, int t, double tol,
                                             std::uint64_t seed) {
  ForwardConsistency rep;
  rep.t = t;
  const LinearOperator m = p.step_operator(t);
  const Eigen::MatrixXd M = materialize_dense(m);
  const Shape out_shape = p.shape_at(t);
  const Eigen::Index n = static_cast<Eigen::Index>(out_shape.numel());

  // Factor S with S S^T = Sigma_{t|t-1}, probed column by column through the
  // Lanczos square root, so the check covers the sampling path.
  LanczosConfig cfg;
  cfg.max_iters = static_cast<int>(n);
  cfg.tol = 0.0;
  const SymmetricOperator cov = [&p, t](const Tensor& v) { return transition_cov_apply(p, t, v); };
  Eigen::MatrixXd S(n, n);
  Tensor e(out_shape);
  for (Eigen::Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Tensor col = lanczos_sqrt_apply(cov, e, cfg).value;
    for (Eigen::Index i = 0; i < n; ++i) S(i, j) = col[i];
    e[j] = 0.0;
  }
  const Eigen::MatrixXd composed =
      p.noise().sigma_sq(t - 1) * (M * M.transpose()) + S * S.transpose();
  const Eigen::MatrixXd target =
      p.noise().sigma_sq(t) * Eigen::MatrixXd::Identity(n, n);
  rep.covariance_error = (composed - target).cwiseAbs().maxCoeff();

  CounterRng rng(seed, static_cast<std::uint64_t>(t));
  const Tensor x0 = rng.normal_tensor(p.shape_at(0));
  const Tensor mu_prev = p.cumulative(t - 1).apply(x0);
  const Tensor mu_t = p.cumulative(t).apply(x0);
  rep.mean_error = max_abs_diff(m.apply(mu_prev), mu_t);
  rep.pass = rep.covariance_error <= tol && rep.mean_error <= tol;
  return rep;
}

}  // namespace ssd
