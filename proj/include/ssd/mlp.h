#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ssd {

/// Named dense parameter block, row-major.
struct ParamTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<double> data;
};

/// Fully connected net in -> hidden -> hidden -> out with SiLU between
/// layers and a linear output. Gradients are computed by explicit
/// backpropagation.
class Mlp {
 public:
  static constexpr int kLayers = 3;

  Mlp() = default;
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation from `seed`;
  /// `zero_output` zeroes the final layer.
  Mlp(int in, int hidden, int out, std::uint64_t seed, bool zero_output = false);
  /// Adopts weights (W0, b0, W1, b1, W2, b2); shapes are validated.
  explicit Mlp(std::vector<ParamTensor> params);

  int in_dim() const { return in_; }
  int hidden_dim() const { return hidden_; }
  int out_dim() const { return out_; }
  std::size_t parameter_count() const;

  struct Cache {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;   // pre-activation per layer
    std::vector<std::vector<double>> post;  // activation per hidden layer
  };

  std::vector<double> forward(std::span<const double> x, Cache* cache = nullptr) const;

  /// Accumulates dLoss/dParams into `grads` (same layout as params()) given
  /// dLoss/dOutput; returns dLoss/dInput.
  std::vector<double> backward(const Cache& cache, std::span<const double> grad_out,
                               std::vector<std::vector<double>>& grads) const;

  std::vector<ParamTensor>& params() { return params_; }
  const std::vector<ParamTensor>& params() const { return params_; }
  std::vector<std::vector<double>> zero_grads() const;

 private:
  int in_ = 0;
  int hidden_ = 0;
  int out_ = 0;
  std::vector<ParamTensor> params_;
};

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay (Loshchilov & Hutter).
class AdamW {
 public:
  AdamW() = default;
  AdamW(const Mlp& net, AdamWConfig cfg);

  void step(Mlp& net, const std::vector<std::vector<double>>& grads);
  long steps() const { return t_; }

 private:
  AdamWConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

double silu(double z);
double silu_grad(double z);

}  // namespace ssd
