#include "ssd/mlp.h"

#include <cmath>

#include "ssd/errors.h"
#include "ssd/rng.h"

namespace ssd {

double silu(double z) { return z / (1.0 + std::exp(-z)); }

double silu_grad(double z) {
  const double s = 1.0 / (1.0 + std::exp(-z));
  return s * (1.0 + z * (1.0 - s));
}

namespace {

const char* const kNames[] = {"fc0.weight", "fc0.bias", "fc1.weight",
                              "fc1.bias",   "fc2.weight", "fc2.bias"};

void affine(const ParamTensor& w, const ParamTensor& b, std::span<const double> x,
            std::vector<double>& y) {
  const int out = w.dims[0];
  const int in = w.dims[1];
  y.assign(out, 0.0);
  for (int o = 0; o < out; ++o) {
    const double* row = w.data.data() + static_cast<std::size_t>(o) * in;
    double acc = b.data[o];
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

}  // namespace

Mlp::Mlp(int in, int hidden, int out, std::uint64_t seed, bool zero_output)
    : in_(in), hidden_(hidden), out_(out) {
  if (in < 1 || hidden < 1 || out < 1) throw ParameterError("Mlp: dimensions must be >= 1");
  const int fan_in[kLayers] = {in, hidden, hidden};
  const int fan_out[kLayers] = {hidden, hidden, out};
  CounterRng rng(seed, 0);
  for (int l = 0; l < kLayers; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in[l]));
    const bool zero = zero_output && l == kLayers - 1;
    ParamTensor w{kNames[2 * l], {fan_out[l], fan_in[l]}, {}};
    ParamTensor b{kNames[2 * l + 1], {fan_out[l]}, {}};
    w.data.resize(static_cast<std::size_t>(fan_out[l]) * fan_in[l]);
    b.data.resize(fan_out[l]);
    for (double& v : w.data) v = zero ? 0.0 : bound * (2.0 * rng.uniform() - 1.0);
    for (double& v : b.data) v = zero ? 0.0 : bound * (2.0 * rng.uniform() - 1.0);
    params_.push_back(std::move(w));
    params_.push_back(std::move(b));
  }
}

Mlp::Mlp(std::vector<ParamTensor> params) : params_(std::move(params)) {
  if (params_.size() != 2 * kLayers) throw FormatError("Mlp: expected 6 parameter blocks");
  for (int l = 0; l < kLayers; ++l) {
    const ParamTensor& w = params_[2 * l];
    const ParamTensor& b = params_[2 * l + 1];
    if (w.dims.size() != 2 || b.dims.size() != 1 || b.dims[0] != w.dims[0] ||
        w.data.size() != static_cast<std::size_t>(w.dims[0]) * w.dims[1] ||
        b.data.size() != static_cast<std::size_t>(b.dims[0])) {
      throw FormatError("Mlp: malformed layer " + std::to_string(l));
    }
    if (l > 0 && w.dims[1] != params_[2 * l - 2].dims[0]) {
      throw FormatError("Mlp: layer " + std::to_string(l) + " input mismatch");
    }
  }
  in_ = params_[0].dims[1];
  hidden_ = params_[0].dims[0];
  out_ = params_[4].dims[0];
  if (params_[2].dims[0] != hidden_) throw FormatError("Mlp: hidden widths differ");
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const ParamTensor& p : params_) n += p.data.size();
  return n;
}

std::vector<double> Mlp::forward(std::span<const double> x, Cache* cache) const {
  if (static_cast<int>(x.size()) != in_) {
    throw ShapeError("Mlp input has " + std::to_string(x.size()) + " values, expected " +
                     std::to_string(in_));
  }
  std::vector<double> act(x.begin(), x.end());
  std::vector<double> pre;
  if (cache) {
    cache->input = act;
    cache->pre.clear();
    cache->post.clear();
  }
  for (int l = 0; l < kLayers; ++l) {
    affine(params_[2 * l], params_[2 * l + 1], act, pre);
    if (cache) cache->pre.push_back(pre);
    if (l == kLayers - 1) return pre;
    act.resize(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) act[i] = silu(pre[i]);
    if (cache) cache->post.push_back(act);
  }
  return act;
}

std::vector<double> Mlp::backward(const Cache& cache, std::span<const double> grad_out,
                                  std::vector<std::vector<double>>& grads) const {
  if (static_cast<int>(grad_out.size()) != out_) throw ShapeError("Mlp: bad grad_out size");
  std::vector<double> delta(grad_out.begin(), grad_out.end());
  for (int l = kLayers - 1; l >= 0; --l) {
    const ParamTensor& w = params_[2 * l];
    const int out = w.dims[0];
    const int in = w.dims[1];
    const std::vector<double>& input = l == 0 ? cache.input : cache.post[l - 1];
    std::vector<double>& gw = grads[2 * l];
    std::vector<double>& gb = grads[2 * l + 1];
    std::vector<double> back(in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      double* grow = gw.data() + static_cast<std::size_t>(o) * in;
      const double* wrow = w.data.data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        grow[i] += d * input[i];
        back[i] += d * wrow[i];
      }
    }
    if (l > 0) {
      const std::vector<double>& pre = cache.pre[l - 1];
      for (int i = 0; i < in; ++i) back[i] *= silu_grad(pre[i]);
    }
    delta = std::move(back);
  }
  return delta;
}

std::vector<std::vector<double>> Mlp::zero_grads() const {
  std::vector<std::vector<double>> g;
  g.reserve(params_.size());
  for (const ParamTensor& p : params_) g.emplace_back(p.data.size(), 0.0);
  return g;
}

AdamW::AdamW(const Mlp& net, AdamWConfig cfg)
    : cfg_(cfg), m_(net.zero_grads()), v_(net.zero_grads()) {}

void AdamW::step(Mlp& net, const std::vector<std::vector<double>>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto& params = net.params();
  for (std::size_t p = 0; p < params.size(); ++p) {
    std::vector<double>& w = params[p].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = grads[p][i];
      m_[p][i] = cfg_.beta1 * m_[p][i] + (1.0 - cfg_.beta1) * g;
      v_[p][i] = cfg_.beta2 * v_[p][i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m_[p][i] / bc1;
      const double vhat = v_[p][i] / bc2;
      w[i] -= cfg_.lr * cfg_.weight_decay * w[i];
      w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace ssd
