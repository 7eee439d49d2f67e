#include "ssd/routing.h"

#include <string>

#include "ssd/errors.h"

namespace ssd {

namespace {

int log2_exact(int ratio, const char* what) {
  int k = 0;
  while ((1 << k) < ratio) ++k;
  if ((1 << k) != ratio) {
    throw ParameterError(std::string("plan_route: ") + what + " is not r_max / 2^k");
  }
  return k;
}

int channels_at(int level, const std::vector<int>& channels) {
  if (channels.empty()) throw ParameterError("plan_route: empty channel profile");
  return level < static_cast<int>(channels.size()) ? channels[level] : channels.back();
}

}  // namespace

std::uint64_t level_macs(int level, int r_max, const std::vector<int>& channels) {
  const std::uint64_t res = static_cast<std::uint64_t>(r_max >> level);
  const std::uint64_t ch = static_cast<std::uint64_t>(channels_at(level, channels));
  return res * res * ch * ch * kRoutingKernel * kRoutingKernel;
}

RoutingPlan plan_route(int r_in, int r_out, int L, int r_max,
                       const std::vector<int>& channels) {
  if (L < 1 || r_max < 1 || r_in < 1 || r_out < 1) {
    throw ParameterError("plan_route: sizes and level count must be positive");
  }
  if (r_in > r_max || r_max % r_in != 0 || r_max % r_out != 0) {
    throw ParameterError("plan_route: resolutions must divide r_max");
  }
  if (r_out != r_in && r_out != 2 * r_in) {
    throw ParameterError("plan_route: r_out must equal r_in or 2*r_in, got " +
                         std::to_string(r_in) + "->" + std::to_string(r_out));
  }
  RoutingPlan plan;
  plan.unet_levels = L;
  plan.entry_depth = log2_exact(r_max / r_in, "r_in");
  plan.exit_depth = log2_exact(r_max / r_out, "r_out");
  if (plan.entry_depth > L - 1 || (r_max >> (L - 1)) < 1) {
    throw ParameterError("plan_route: r_in " + std::to_string(r_in) + " is below the " +
                         std::to_string(L) + "-level UNet");
  }
  for (int k = plan.entry_depth; k < L; ++k) {
    plan.active_encoder_blocks.push_back(k);
    plan.mac_estimate += level_macs(k, r_max, channels);
  }
  for (int k = L - 1; k >= plan.exit_depth; --k) {
    plan.active_decoder_blocks.push_back(k);
    plan.mac_estimate += level_macs(k, r_max, channels);
  }
  for (int k = plan.exit_depth; k < plan.entry_depth; ++k) plan.zero_filled_skips.push_back(k);
  return plan;
}

ChainCost chain_cost(const ResolutionSchedule& rs, int L, const std::vector<int>& channels) {
  ChainCost cost;
  const int r_max = rs.r_max();
  const std::uint64_t full = plan_route(r_max, r_max, L, r_max, channels).mac_estimate;
  cost.per_step.reserve(rs.T());
  for (int t = 1; t <= rs.T(); ++t) {
    const std::uint64_t c =
        plan_route(rs.resolution(t), rs.resolution(t - 1), L, r_max, channels).mac_estimate;
    cost.per_step.push_back(c);
    cost.flexi += c;
    cost.baseline += full;
  }
  return cost;
}

}  // namespace ssd
