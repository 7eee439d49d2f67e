#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssd/denoiser.h"
#include "ssd/process.h"

namespace ssd {

struct CheckResult {
  std::string name;
  bool pass = false;
  double error = 0.0;
  double tol = 0.0;
  std::string detail;
};

/// max over random (x, v) of |<v, Mx> - <M^T v, x>| / (|v| |Mx| + |M^T v| |x|).
double adjoint_defect(const LinearOperator& op, int pairs, std::uint64_t seed);

/// Posterior of x_{t-1} by direct inversion:
///   Sigma = (Sigma_{t-1}^{-1} + M^T Sigma_{t|t-1}^{-1} M)^{-1}
///   mu    = Sigma (Sigma_{t-1}^{-1} mu_{t-1} + M^T Sigma_{t|t-1}^{-1} x_t)
/// Needs sigma_{t-1} > 0 and a strictly feasible step.
struct DensePosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
DensePosterior dense_posterior_direct(const DiffusionProcess& p, int t, const Tensor& x_t,
                                      const Tensor& mu_prev);
/// The same posterior from the simplified form, materialised from the
/// implicit operators.
DensePosterior dense_posterior_simplified(const PosteriorParams& params);

/// Symmetric PSD square root by eigendecomposition (negative eigenvalues clamped).
Eigen::MatrixXd dense_sqrt(const Eigen::MatrixXd& A);

/// lambda_max(M M^T) from a dense eigensolver.
double dense_lambda_max(const LinearOperator& op);

CheckResult check_adjoint(std::uint64_t seed, int pairs = 100);
CheckResult check_woodbury(const DiffusionProcess& p, std::uint64_t seed, double tol = 1e-8);
CheckResult check_ddpm_collapse(std::uint64_t seed, int T = 1000, double tol = 1e-10);
CheckResult check_forward(const DiffusionProcess& p, double tol = 1e-8);
CheckResult check_lanczos_dense(const DiffusionProcess& p, int t, std::uint64_t seed,
                                double tol = 1e-4);
CheckResult check_lanczos_diagonal(std::uint64_t seed, int k = 32, double tol = 1e-10);
CheckResult check_oracle_reconstruction(const DiffusionProcess& p, const Tensor& x0,
                                        std::uint64_t seed, double tol = 1e-5);
CheckResult check_psd_margins(const DiffusionProcess& p, double tol = 1e-8);

/// Central finite differences against batch_loss gradients on up to
/// `per_block` entries of every parameter block of every net. The first
/// block's slice is split between pixel and timestep-embedding columns.
struct GradientEntry {
  std::string param;  // e.g. "net.4x8.fc0.weight[17]"
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};
std::vector<GradientEntry> gradient_check(MlpDenoiser& m, const DiffusionProcess& p,
                                          std::span<const LossTerm> terms, int per_block = 10,
                                          double h = 1e-4);
/// |a - n| / max(|a|, |n|, 1e-8).
double gradient_rel_error(double analytic, double numeric);

/// The suite behind the `verify` command. Deterministic given `seed`.
std::vector<CheckResult> run_verify_suite(std::uint64_t seed);

}  // namespace ssd
