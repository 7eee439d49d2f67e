#include "ssd/lanczos.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ssd/errors.h"
#include "ssd/rng.h"

namespace ssd {

void LanczosConfig::validate() const {
  if (max_iters < 1) throw ParameterError("LanczosConfig: max_iters must be >= 1");
  if (!(eig_floor >= 0.0)) throw ParameterError("LanczosConfig: eig_floor must be >= 0");
  if (!(tol >= 0.0)) throw ParameterError("LanczosConfig: tol must be >= 0");
}

namespace {

// Coefficients c with f(T_k) e_1 = c, f = sqrt on floored Ritz values.
Eigen::VectorXd sqrt_first_column(const std::vector<double>& alpha,
                                  const std::vector<double>& beta, double floor) {
  const int k = static_cast<int>(alpha.size());
  Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), k);
  if (k == 1) {
    Eigen::VectorXd c(1);
    c(0) = std::sqrt(std::max(diag(0), floor));
    return c;
  }
  Eigen::VectorXd sub = Eigen::Map<const Eigen::VectorXd>(beta.data(), k - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  const Eigen::MatrixXd& V = es.eigenvectors();
  Eigen::VectorXd f = es.eigenvalues().unaryExpr(
      [floor](double l) { return std::sqrt(std::max(l, floor)); });
  return V * f.cwiseProduct(V.row(0).transpose());
}

Tensor combine(const std::vector<Tensor>& basis, const Eigen::VectorXd& c, double scale) {
  Tensor y(basis.front().shape());
  for (int j = 0; j < c.size(); ++j) y.axpy(scale * c(j), basis[j]);
  return y;
}

}  // namespace

LanczosResult lanczos_sqrt_apply(const SymmetricOperator& A, const Tensor& x,
                                 const LanczosConfig& cfg) {
  cfg.validate();
  LanczosResult res;
  const double beta0 = x.norm();
  if (beta0 == 0.0) {
    res.value = Tensor(x.shape());
    res.converged = true;
    return res;
  }

  std::vector<Tensor> q;
  q.reserve(cfg.max_iters + 1);
  q.push_back((1.0 / beta0) * x);
  std::vector<double> alpha;
  std::vector<double> beta;
  Tensor prev_y;
  double scale = 0.0;

  for (int k = 1; k <= cfg.max_iters; ++k) {
    Tensor w = A(q.back());
    require_shape(w.shape(), x.shape(), "lanczos operator output");
    const double a = q.back().dot(w);
    alpha.push_back(a);
    w.axpy(-a, q.back());
    if (k > 1) w.axpy(-beta.back(), q[q.size() - 2]);
    if (cfg.reorthogonalize) {
      for (int pass = 0; pass < 2; ++pass) {
        for (const Tensor& qj : q) w.axpy(-qj.dot(w), qj);
      }
    }
    const double b = w.norm();
    scale = std::max({scale, std::abs(a), b});

    const Eigen::VectorXd c = sqrt_first_column(alpha, beta, cfg.eig_floor);
    Tensor y = combine(q, c, beta0);
    res.iterations = k;

    if (b <= 1e-12 * std::max(scale, 1e-300)) {
      res.value = std::move(y);
      res.breakdown = true;
      res.converged = true;
      return res;
    }
    if (k > 1) {
      const double change = (y - prev_y).norm();
      if (change <= cfg.tol * y.norm()) {
        res.value = std::move(y);
        res.converged = true;
        return res;
      }
    }
    prev_y = std::move(y);
    beta.push_back(b);
    q.push_back((1.0 / b) * std::move(w));
  }
  res.value = std::move(prev_y);
  return res;
}

double symmetry_defect(const SymmetricOperator& A, Shape shape, int trials,
                       std::uint64_t seed) {
  CounterRng rng(seed, 0);
  double worst = 0.0;
  for (int i = 0; i < trials; ++i) {
    const Tensor u = rng.normal_tensor(shape);
    const Tensor v = rng.normal_tensor(shape);
    const Tensor Au = A(u);
    const Tensor Av = A(v);
    const double denom = u.norm() * Av.norm() + Au.norm() * v.norm();
    if (denom == 0.0) continue;
    worst = std::max(worst, std::abs(u.dot(Av) - Au.dot(v)) / denom);
  }
  return worst;
}

}  // namespace ssd
