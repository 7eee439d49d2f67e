#include "ssd/denoiser.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ssd/errors.h"

namespace ssd {

// ---------------------------------------------------------------------------
// Oracle

OracleDenoiser::OracleDenoiser(const DiffusionProcess& process, Tensor x0)
    : process_(process), x0_(std::move(x0)) {
  require_shape(x0_.shape(), process_.shape_at(0), "oracle x0");
}

Tensor OracleDenoiser::predict(const Tensor& x_t, int t) const {
  (void)x_t;
  if (t < 1 || t > process_.T()) throw DomainError("oracle_predict: t outside [1, T]");
  Tensor mu = process_.cumulative(t - 1).apply(x0_);
  mu *= 1.0 / process_.noise().a(t - 1);
  return mu;
}

Tensor oracle_predict(const OracleDenoiser& o, const Tensor& x_t, int t) {
  return o.predict(x_t, t);
}

// ---------------------------------------------------------------------------
// MLP denoiser

std::vector<double> timestep_embedding(int t, int dim) {
  const int half = dim / 2;
  std::vector<double> e(dim, 0.0);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    e[i] = std::sin(t * freq);
    e[half + i] = std::cos(t * freq);
  }
  return e;
}

namespace {

std::string pair_prefix(ResolutionPair pair) {
  return "net." + std::to_string(pair.first) + "x" + std::to_string(pair.second) + ".";
}

std::vector<ResolutionPair> schedule_pairs(const ResolutionSchedule& rs) {
  std::vector<ResolutionPair> pairs;
  for (int t = 1; t <= rs.T(); ++t) {
    const ResolutionPair p{rs.resolution(t), rs.resolution(t - 1)};
    if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) pairs.push_back(p);
  }
  return pairs;
}

}  // namespace

MlpDenoiser::MlpDenoiser(const DiffusionProcess& process, int hidden, std::uint64_t seed,
                         bool zero_output)
    : process_(process) {
  const int c = process.channels();
  std::uint64_t k = 0;
  for (const ResolutionPair& pair : schedule_pairs(process.resolution())) {
    const int in = c * pair.first * pair.first + kTimeEmbeddingDim;
    const int out = c * pair.second * pair.second;
    nets_.emplace(pair, Mlp(in, hidden, out, seed + 0x9E3779B97F4A7C15ull * ++k, zero_output));
  }
}

MlpDenoiser::MlpDenoiser(const DiffusionProcess& process,
                         const std::vector<ParamTensor>& tensors)
    : process_(process) {
  for (const ResolutionPair& pair : schedule_pairs(process.resolution())) {
    const std::string prefix = pair_prefix(pair);
    std::vector<ParamTensor> params;
    for (const char* suffix : {"fc0.weight", "fc0.bias", "fc1.weight", "fc1.bias",
                               "fc2.weight", "fc2.bias"}) {
      auto it = std::find_if(tensors.begin(), tensors.end(), [&](const ParamTensor& p) {
        return p.name == prefix + suffix;
      });
      if (it == tensors.end()) {
        throw FormatError("checkpoint is missing tensor " + prefix + suffix);
      }
      ParamTensor copy = *it;
      copy.name = suffix;
      params.push_back(std::move(copy));
    }
    Mlp net(std::move(params));
    const int c = process.channels();
    if (net.in_dim() != c * pair.first * pair.first + kTimeEmbeddingDim ||
        net.out_dim() != c * pair.second * pair.second) {
      throw FormatError("checkpoint net " + prefix + " does not match the schedule shapes");
    }
    nets_.emplace(pair, std::move(net));
  }
}

ResolutionPair MlpDenoiser::pair_for(int t) const {
  const ResolutionSchedule& rs = process_.resolution();
  return {rs.resolution(t), rs.resolution(t - 1)};
}

Mlp& MlpDenoiser::net(ResolutionPair pair) {
  auto it = nets_.find(pair);
  if (it == nets_.end()) {
    throw ShapeError("no network for resolution pair " + std::to_string(pair.first) + "->" +
                     std::to_string(pair.second));
  }
  return it->second;
}

const Mlp& MlpDenoiser::net(ResolutionPair pair) const {
  return const_cast<MlpDenoiser*>(this)->net(pair);
}

std::size_t MlpDenoiser::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [pair, net] : nets_) n += net.parameter_count();
  return n;
}

std::vector<double> MlpDenoiser::features(const Tensor& x_t, int t) const {
  require_shape(x_t.shape(), process_.shape_at(t), "denoiser input");
  std::vector<double> f(x_t.values().begin(), x_t.values().end());
  const std::vector<double> emb = timestep_embedding(t);
  f.insert(f.end(), emb.begin(), emb.end());
  return f;
}

Tensor MlpDenoiser::predict(const Tensor& x_t, int t) const {
  if (t < 1 || t > process_.T()) throw DomainError("MlpDenoiser: t outside [1, T]");
  const Mlp& m = net(pair_for(t));
  return Tensor(process_.shape_at(t - 1), m.forward(features(x_t, t)));
}

std::vector<ParamTensor> MlpDenoiser::export_tensors() const {
  std::vector<ParamTensor> out;
  for (const auto& [pair, net] : nets_) {
    for (ParamTensor p : net.params()) {
      p.name = pair_prefix(pair) + p.name;
      out.push_back(std::move(p));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

std::vector<int> sample_timesteps_batch(const ResolutionSchedule& rs, int batch,
                                        CounterRng& rng) {
  if (batch < 1) throw ParameterError("sample_timesteps_batch: batch must be >= 1");
  const int t = static_cast<int>(rng.uniform_int(1, rs.T()));
  if (rs.is_transition(t)) return std::vector<int>(batch, t);
  const int level = rs.resolution(t);
  std::vector<int> pool;
  for (int k = 1; k <= rs.T(); ++k) {
    if (rs.resolution(k) == level && !rs.is_transition(k)) pool.push_back(k);
  }
  std::vector<int> out(batch);
  for (int& v : out) {
    v = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
  }
  return out;
}

double batch_loss(const MlpDenoiser& m, const DiffusionProcess& p,
                  std::span<const LossTerm> terms,
                  std::map<ResolutionPair, std::vector<std::vector<double>>>* grads) {
  if (terms.empty()) throw ParameterError("batch_loss: empty batch");
  const double inv_b = 1.0 / static_cast<double>(terms.size());
  double total = 0.0;
  Mlp::Cache cache;
  for (const LossTerm& term : terms) {
    const int t = term.t;
    const Tensor x_t = marginal_sample(p, *term.x0, t, term.eps);
    Tensor target = p.cumulative(t - 1).apply(*term.x0);
    target *= 1.0 / p.noise().a(t - 1);
    const ResolutionPair pair = m.pair_for(t);
    const Mlp& net = m.net(pair);
    const std::vector<double> pred = net.forward(m.features(x_t, t), grads ? &cache : nullptr);
    const double w = min_snr_weight(p.noise(), t, kMinSnrGamma);
    double sq = 0.0;
    std::vector<double> g(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - target[i];
      sq += d * d;
      g[i] = 2.0 * w * d * inv_b;
    }
    total += w * sq;
    if (grads) {
      auto it = grads->find(pair);
      if (it == grads->end()) it = grads->emplace(pair, net.zero_grads()).first;
      net.backward(cache, g, it->second);
    }
  }
  return total * inv_b;
}

double train_iter(MlpDenoiser& m, const DiffusionProcess& p, std::span<const Tensor> x0_batch,
                  CounterRng& rng, OptState& opt) {
  if (x0_batch.empty()) throw ParameterError("train_iter: empty batch");
  const std::vector<int> ts =
      sample_timesteps_batch(p.resolution(), static_cast<int>(x0_batch.size()), rng);
  std::vector<LossTerm> terms;
  terms.reserve(x0_batch.size());
  for (std::size_t i = 0; i < x0_batch.size(); ++i) {
    require_shape(x0_batch[i].shape(), p.shape_at(0), "train_iter x0");
    terms.push_back(LossTerm{&x0_batch[i], ts[i], rng.normal_tensor(p.shape_at(ts[i]))});
  }
  std::map<ResolutionPair, std::vector<std::vector<double>>> grads;
  const double loss = batch_loss(m, p, terms, &grads);
  if (!std::isfinite(loss)) {
    throw TrainingError("non-finite loss " + std::to_string(loss) + " at t=" +
                        std::to_string(ts.front()) + " (batch " +
                        std::to_string(x0_batch.size()) + ")");
  }
  for (auto& [pair, g] : grads) {
    Mlp& net = m.net(pair);
    auto it = opt.per_pair.find(pair);
    if (it == opt.per_pair.end()) it = opt.per_pair.emplace(pair, AdamW(net, opt.config)).first;
    it->second.step(net, g);
  }
  return loss;
}

std::vector<Tensor> make_blob_dataset(int count, int channels, int resolution,
                                      std::uint64_t seed) {
  if (count < 1 || channels < 1 || resolution < 2) {
    throw ParameterError("make_blob_dataset: bad dimensions");
  }
  std::vector<Tensor> data;
  data.reserve(count);
  for (int n = 0; n < count; ++n) {
    CounterRng rng(seed, static_cast<std::uint64_t>(n));
    const double cx = 0.5 + rng.uniform() * (resolution - 2);
    const double cy = 0.5 + rng.uniform() * (resolution - 2);
    const double width = resolution * (0.12 + 0.18 * rng.uniform());
    std::vector<double> amp(channels);
    for (double& a : amp) a = 0.3 + 0.7 * rng.uniform();
    Tensor img(Shape{channels, resolution, resolution});
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < resolution; ++y) {
        for (int x = 0; x < resolution; ++x) {
          const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          img.at(c, y, x) = -1.0 + 2.0 * amp[c] * std::exp(-d2 / (2.0 * width * width));
        }
      }
    }
    data.push_back(std::move(img));
  }
  return data;
}

}  // namespace ssd

namespace ssd {

std::vector<LossTerm> make_eval_terms(const DiffusionProcess& p, const std::vector<Tensor>& data,
                                      int count, std::uint64_t seed) {
  if (data.empty() || count < 1) throw ParameterError("make_eval_terms: nothing to evaluate");
  CounterRng rng(seed, 0xe7a1ull << 32);
  std::vector<LossTerm> terms;
  terms.reserve(count);
  for (int k = 0; k < count; ++k) {
    const auto idx = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1));
    const int t = static_cast<int>(rng.uniform_int(1, p.T()));
    terms.push_back(LossTerm{&data[idx], t, rng.normal_tensor(p.shape_at(t))});
  }
  return terms;
}

std::vector<TrainRecord> train_denoiser(MlpDenoiser& m, const DiffusionProcess& p,
                                        const std::vector<Tensor>& data,
                                        const TrainOptions& opts,
                                        const std::function<void(const TrainRecord&)>& on_record) {
  if (data.empty()) throw ParameterError("train_denoiser: empty dataset");
  if (opts.iters < 0 || opts.batch < 1 || opts.eval_every < 1) {
    throw ParameterError("train_denoiser: bad iteration settings");
  }
  const std::vector<LossTerm> eval = make_eval_terms(p, data, opts.eval_size, opts.seed);
  OptState opt{opts.adamw, {}};
  CounterRng rng(opts.seed, 1);
  std::vector<TrainRecord> records;
  auto record = [&](int iter, double train_loss) {
    TrainRecord r{iter, train_loss, batch_loss(m, p, eval, nullptr)};
    records.push_back(r);
    if (on_record) on_record(r);
  };
  record(0, 0.0);
  double running = 0.0;
  int since = 0;
  std::vector<Tensor> batch(static_cast<std::size_t>(opts.batch));
  for (int it = 1; it <= opts.iters; ++it) {
    for (Tensor& x : batch) {
      x = data[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1))];
    }
    running += train_iter(m, p, batch, rng, opt);
    ++since;
    if (it % opts.eval_every == 0 || it == opts.iters) {
      record(it, running / since);
      running = 0.0;
      since = 0;
    }
  }
  return records;
}

}  // namespace ssd
