#pragma once

#include <cstdint>
#include <vector>

#include "ssd/schedules.h"

namespace ssd {

/// Default per-level channel widths; levels past the end repeat the last entry.
inline const std::vector<int> kDefaultChannelProfile = {64, 128, 256, 512};

constexpr int kRoutingKernel = 3;

/// Which UNet levels run for one (r_in, r_out) denoising step. Level k works
/// at resolution r_max / 2^k.
struct RoutingPlan {
  int unet_levels = 0;
  int entry_depth = 0;
  int exit_depth = 0;
  std::vector<int> active_encoder_blocks;
  std::vector<int> active_decoder_blocks;
  std::vector<int> zero_filled_skips;
  std::uint64_t mac_estimate = 0;
};

/// res(level)^2 * channels(level)^2 * k^2.
std::uint64_t level_macs(int level, int r_max, const std::vector<int>& channels);

RoutingPlan plan_route(int r_in, int r_out, int L, int r_max,
                       const std::vector<int>& channels = kDefaultChannelProfile);

struct ChainCost {
  std::uint64_t flexi = 0;     // routed per (r(t), r(t-1))
  std::uint64_t baseline = 0;  // full UNet at r_max for every step
  std::vector<std::uint64_t> per_step;  // index t-1 -> routed cost of step t
};

ChainCost chain_cost(const ResolutionSchedule& rs, int L,
                     const std::vector<int>& channels = kDefaultChannelProfile);

}  // namespace ssd
