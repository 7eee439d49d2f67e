#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ssd/schedules.h"
#include "ssd/tensor.h"

namespace ssd {

/// Sparse 1-D resampling matrix (out_size x in_size) in CSR form.
class ResampleMatrix {
 public:
  ResampleMatrix() = default;
  ResampleMatrix(int out_size, int in_size, std::vector<int> row_ptr,
                 std::vector<int> cols, std::vector<double> vals);

  int out_size() const { return out_; }
  int in_size() const { return in_; }
  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& cols() const { return cols_; }
  const std::vector<double>& vals() const { return vals_; }

  ResampleMatrix transposed() const;
  Eigen::MatrixXd dense() const;

 private:
  int out_ = 0;
  int in_ = 0;
  std::vector<int> row_ptr_;
  std::vector<int> cols_;
  std::vector<double> vals_;
};

/// Bilinear antialiased resampling weights along one axis.
///
/// Output pixel i is centred on source coordinate (i + 0.5) * s - 0.5 with
/// s = in / out (half-pixel centres, corners not aligned). The triangle
/// kernel's support is widened by s when downsampling; weights are normalised
/// to sum to one per output pixel and truncated at the image border.
ResampleMatrix antialias_resize_matrix(int in_size, int out_size);

/// Separable resize of every channel: rows along H, cols along W.
struct ResizeStage {
  ResampleMatrix rows;
  ResampleMatrix cols;
};

enum class OperatorKind { ScaledIdentity, Resize, Composite };

/// Immutable implicit linear operator  x -> scale * S_k(...S_1(x)).
///
/// Scaled identities, single resizes and their compositions all share this
/// representation, so composition is closed and adjoints are exact
/// transposes of the stored sparse kernels.
class LinearOperator {
 public:
  LinearOperator(Shape in, Shape out, double scale, std::vector<ResizeStage> stages);

  static LinearOperator scaled_identity(Shape shape, double c);
  static LinearOperator identity(Shape shape) { return scaled_identity(shape, 1.0); }

  const Shape& in_shape() const { return in_; }
  const Shape& out_shape() const { return out_; }
  double scale() const { return scale_; }
  const std::vector<ResizeStage>& stages() const { return stages_; }
  OperatorKind kind() const;

  Tensor apply(const Tensor& x) const;
  Tensor adjoint(const Tensor& v) const;
  /// Operator whose apply() is this operator's adjoint.
  LinearOperator transposed() const;

 private:
  Shape in_;
  Shape out_;
  double scale_;
  std::vector<ResizeStage> stages_;
};

/// outer(inner(x)).
LinearOperator compose(const LinearOperator& outer, const LinearOperator& inner);

/// Resize-and-attenuate step: x -> (a_t / a_tminus1) * Resize(x, res_out).
/// Equal resolutions give a ScaledIdentity.
LinearOperator resize_op(int channels, int res_in, int res_out, double a_t,
                         double a_tminus1);

Tensor adjoint(const LinearOperator& op, const Tensor& v);

/// Per-step operator M_t mapping resolution r(t-1) to r(t).
LinearOperator step_operator(const NoiseSchedule& ns, const ResolutionSchedule& rs,
                             int channels, int t);

/// M_{s+1:t} = M_t ... M_{s+1}, mapping r(s) to r(t); identity when s == t.
LinearOperator jump_operator(const NoiseSchedule& ns, const ResolutionSchedule& rs,
                             int channels, int s, int t);

/// M_{1:t} = a_t * ResizeChain(r_max -> r(t)); identity at t = 0.
LinearOperator cumulative_M(const NoiseSchedule& ns, const ResolutionSchedule& rs,
                            int channels, int t);

constexpr std::size_t kDenseCap = 4096;

/// Matrix D with D * flatten(x) = flatten(apply(x)); ResourceError when the
/// input dimension exceeds `cap`.
Eigen::MatrixXd materialize_dense(const LinearOperator& op, std::size_t cap = kDenseCap);

struct EigenEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

constexpr int kPowerIters = 200;
constexpr double kPowerTol = 1e-9;
constexpr std::uint64_t kPowerSeed = 0x5eed;

/// Largest eigenvalue of M M^T from Krylov iterations on v -> M(M^T v),
/// started from a fixed-seed random vector; stops once the Ritz residual is
/// below tol * lambda. ScaledIdentity is answered in closed form.
EigenEstimate lambda_max(const LinearOperator& op, int iters = kPowerIters,
                         double tol = kPowerTol, std::uint64_t seed = kPowerSeed);

struct FeasibilityEntry {
  int t = 0;
  bool transition = false;
  double sigma_sq = 0.0;  // sigma_t^2
  double bound = 0.0;     // sigma_{t-1}^2 * lambda_max(M_t M_t^T)
  double lambda = 0.0;
  double margin = 0.0;    // sigma_sq - bound
  bool pass = false;
};

struct FeasibilityReport {
  std::vector<FeasibilityEntry> entries;  // t = 1..T
  bool pass = true;
  std::vector<int> infeasible_steps;
};

/// Checks sigma_t^2 >= sigma_{t-1}^2 * lambda_max(M_t M_t^T) for every t.
/// Failures are reported, never thrown.
FeasibilityReport check_psd_feasibility(const NoiseSchedule& ns,
                                        const ResolutionSchedule& rs, int channels = 1);

}  // namespace ssd
