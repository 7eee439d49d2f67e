#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "ssd/mlp.h"
#include "ssd/process.h"
#include "ssd/rng.h"
#include "ssd/tensor.h"

namespace ssd {

/// Predicts the unscaled clean image at resolution r(t-1) from x_t at r(t).
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Tensor predict(const Tensor& x_t, int t) const = 0;
};

/// Knows x0 and returns the exact target M_{1:t-1} x0 / a_{t-1}.
class OracleDenoiser final : public Denoiser {
 public:
  OracleDenoiser(const DiffusionProcess& process, Tensor x0);
  Tensor predict(const Tensor& x_t, int t) const override;
  const Tensor& x0() const { return x0_; }

 private:
  const DiffusionProcess& process_;
  Tensor x0_;
};

Tensor oracle_predict(const OracleDenoiser& o, const Tensor& x_t, int t);

constexpr int kTimeEmbeddingDim = 32;

/// Sinusoidal embedding: [sin(t f_i), cos(t f_i)], f_i = 10000^(-i / (dim/2)).
std::vector<double> timestep_embedding(int t, int dim = kTimeEmbeddingDim);

using ResolutionPair = std::pair<int, int>;  // (r_in, r_out)

/// One small MLP per (r(t), r(t-1)) pair occurring in the schedule; the
/// input is flatten(x_t) concatenated with the timestep embedding.
class MlpDenoiser final : public Denoiser {
 public:
  MlpDenoiser(const DiffusionProcess& process, int hidden, std::uint64_t seed,
              bool zero_output = false);
  /// Rebuilds from checkpoint tensors named "net.<rin>x<rout>.fcK.{weight,bias}".
  MlpDenoiser(const DiffusionProcess& process, const std::vector<ParamTensor>& tensors);

  Tensor predict(const Tensor& x_t, int t) const override;

  ResolutionPair pair_for(int t) const;
  Mlp& net(ResolutionPair pair);
  const Mlp& net(ResolutionPair pair) const;
  const std::map<ResolutionPair, Mlp>& nets() const { return nets_; }
  std::map<ResolutionPair, Mlp>& nets() { return nets_; }
  std::size_t parameter_count() const;

  /// Network input for (x_t, t).
  std::vector<double> features(const Tensor& x_t, int t) const;

  std::vector<ParamTensor> export_tensors() const;
  const DiffusionProcess& process() const { return process_; }

 private:
  const DiffusionProcess& process_;
  std::map<ResolutionPair, Mlp> nets_;
};

/// Batch timestep rule: draw one t uniformly from [1, T]. At a resizing step
/// the whole batch is t; otherwise every slot is drawn uniformly from the
/// resolution-preserving steps of the same level.
std::vector<int> sample_timesteps_batch(const ResolutionSchedule& rs, int batch,
                                        CounterRng& rng);

/// Optimiser state: one AdamW per resolution pair.
struct OptState {
  AdamWConfig config;
  std::map<ResolutionPair, AdamW> per_pair;
};

/// One optimisation step on `x0_batch` (images at r_max in [-1, 1]):
///   loss = mean_i min(s^2(t_i), 5) * |predict(x_{t_i}, t_i) - M_{1:t_i-1} x0_i / a_{t_i-1}|^2
/// Returns the batch loss; TrainingError if it is not finite.
double train_iter(MlpDenoiser& m, const DiffusionProcess& p, std::span<const Tensor> x0_batch,
                  CounterRng& rng, OptState& opt);

/// Loss and parameter gradients for fixed (x0, t, eps) triples, without
/// updating anything. Used by train_iter and by gradient checks.
struct LossTerm {
  const Tensor* x0 = nullptr;
  int t = 1;
  Tensor eps;
};
double batch_loss(const MlpDenoiser& m, const DiffusionProcess& p,
                  std::span<const LossTerm> terms,
                  std::map<ResolutionPair, std::vector<std::vector<double>>>* grads);

struct TrainOptions {
  int iters = 2000;
  int batch = 16;
  /// Evaluate every k iterations on a fixed (x0, t, eps) set.
  int eval_every = 50;
  int eval_size = 256;
  std::uint64_t seed = 0;
  AdamWConfig adamw;
};

struct TrainRecord {
  int iter = 0;
  /// Mean train_iter loss since the previous record.
  double train_loss = 0.0;
  double eval_loss = 0.0;
};

/// Fixed evaluation terms drawn from `seed`: x0 index and t uniform, eps normal.
std::vector<LossTerm> make_eval_terms(const DiffusionProcess& p, const std::vector<Tensor>& data,
                                      int count, std::uint64_t seed);

/// Runs opts.iters train_iter steps on minibatches drawn from `data`; records
/// the evaluation loss at iteration 0 and every eval_every iterations.
std::vector<TrainRecord> train_denoiser(
    MlpDenoiser& m, const DiffusionProcess& p, const std::vector<Tensor>& data,
    const TrainOptions& opts, const std::function<void(const TrainRecord&)>& on_record = {});

/// Gaussian blobs on a -1 background, values in [-1, 1].
std::vector<Tensor> make_blob_dataset(int count, int channels, int resolution,
                                      std::uint64_t seed);

}  // namespace ssd
