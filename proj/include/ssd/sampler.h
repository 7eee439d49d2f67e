#pragma once

#include <cstdint>
#include <vector>

#include "ssd/denoiser.h"
#include "ssd/process.h"
#include "ssd/tensor.h"

namespace ssd {

struct TrajectoryStep {
  int t = 0;
  Tensor x_t;         // at r(t)
  Tensor prediction;  // at r(t-1)
};

struct Trajectory {
  int stride = 1;
  std::vector<TrajectoryStep> steps;
};

struct SampleOptions {
  SampleMode mode = SampleMode::Exact;
  bool record = false;
  /// Keep every k-th visited step in the trajectory (the first is always kept).
  int record_stride = 1;
  /// Reduced-step sampling: visit T, T-k, ... plus every resizing step.
  int step_stride = 1;
};

struct ChainResult {
  Tensor x0;
  Trajectory trajectory;
};

/// Timesteps visited by the reverse chain, descending, ending with 0.
std::vector<int> visit_schedule(const ResolutionSchedule& rs, int step_stride);

/// One reverse chain. Noise comes from CounterRng(seed, chain_stream(chain, t)),
/// with x_T drawn from stream (chain, T + 1). The returned x0 is unclamped.
ChainResult sample_chain(const DiffusionProcess& p, const Denoiser& d, std::uint64_t seed,
                         std::uint32_t chain, const SampleOptions& opts = {});

/// Chains 0..n-1 for `seed`; the result does not depend on `threads`.
std::vector<ChainResult> sample_batch(const DiffusionProcess& p, const Denoiser& d, int n,
                                      std::uint64_t seed, const SampleOptions& opts = {},
                                      int threads = 1);

/// Copy clamped to [-1, 1] for export.
Tensor clamp_for_export(const Tensor& x);

}  // namespace ssd
