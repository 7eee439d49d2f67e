#pragma once

#include <cstdint>
#include <functional>

#include "ssd/tensor.h"

namespace ssd {

/// Implicit symmetric operator on tensors of one fixed shape.
using SymmetricOperator = std::function<Tensor(const Tensor&)>;

struct LanczosConfig {
  int max_iters = 32;
  bool reorthogonalize = true;
  /// Ritz values below this are clamped to it before the square root.
  double eig_floor = 0.0;
  /// Stop when successive iterates differ by less than tol in relative norm.
  double tol = 1e-6;

  void validate() const;
};

struct LanczosResult {
  Tensor value;
  int iterations = 0;
  bool converged = false;
  /// Krylov space became invariant (beta_k ~ 0); the result is then exact.
  bool breakdown = false;
};

/// Approximates A^{1/2} x as Q_k f(T_k) (|x| e_1), where T_k is the Lanczos
/// tridiagonal and f takes elementwise square roots of its (floored)
/// eigenvalues. A must be symmetric PSD; x = 0 returns 0.
LanczosResult lanczos_sqrt_apply(const SymmetricOperator& A, const Tensor& x,
                                 const LanczosConfig& cfg = {});

/// max over random (u, v) pairs of |<u, Av> - <Au, v>| / (|u| |Av| + |Au| |v|).
double symmetry_defect(const SymmetricOperator& A, Shape shape, int trials,
                       std::uint64_t seed);

}  // namespace ssd
