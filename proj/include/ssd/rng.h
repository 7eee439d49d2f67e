#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include "ssd/tensor.h"

namespace ssd {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3").
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based generator: the output sequence is a pure function of
/// (seed, stream), so independent streams can be created in any order and on
/// any thread without sharing state.
///
/// Satisfies UniformRandomBitGenerator, so it also plugs into <random>.
class CounterRng {
 public:
  using result_type = std::uint32_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform in the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [lo, hi]; rejection sampling, no modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  void fill_normal(Tensor& t);
  Tensor normal_tensor(Shape shape);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stream id for chain `chain` at timestep `t`; sampler noise is drawn from
/// CounterRng(seed, chain_stream(chain, t)).
constexpr std::uint64_t chain_stream(std::uint64_t chain, std::uint64_t t) {
  return (chain << 32) | (t & 0xffffffffu);
}

}  // namespace ssd
