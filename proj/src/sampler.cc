#include "ssd/sampler.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <string>
#include <thread>

#include "ssd/errors.h"
#include "ssd/rng.h"

namespace ssd {

std::vector<int> visit_schedule(const ResolutionSchedule& rs, int step_stride) {
  if (step_stride < 1) throw ParameterError("step stride must be >= 1");
  std::vector<int> visit;
  for (int t = rs.T(); t >= 1; --t) {
    if ((rs.T() - t) % step_stride == 0 || rs.is_transition(t)) visit.push_back(t);
  }
  visit.push_back(0);
  return visit;
}

ChainResult sample_chain(const DiffusionProcess& p, const Denoiser& d, std::uint64_t seed,
                         std::uint32_t chain, const SampleOptions& opts) {
  if (opts.record_stride < 1) throw ParameterError("record stride must be >= 1");
  const int T = p.T();
  ChainResult out;
  out.trajectory.stride = opts.record_stride;

  CounterRng init(seed, chain_stream(chain, static_cast<std::uint32_t>(T + 1)));
  Tensor x = init.normal_tensor(p.shape_at(T));

  const std::vector<int> visit = visit_schedule(p.resolution(), opts.step_stride);
  for (std::size_t i = 0; i + 1 < visit.size(); ++i) {
    const int t = visit[i];
    const int s = visit[i + 1];
    Tensor pred;
    try {
      pred = d.predict(x, t);
      require_shape(pred.shape(), p.shape_at(s), "denoiser output");
    } catch (const ChainError&) {
      throw;
    } catch (const Error& e) {
      throw ChainError(t, e.what());
    }
    if (opts.record && i % static_cast<std::size_t>(opts.record_stride) == 0) {
      out.trajectory.steps.push_back(TrajectoryStep{t, x, pred});
    }
    pred *= p.noise().a(s);
    const PosteriorParams post = posterior_params(p, x, pred, t, s);
    CounterRng rng(seed, chain_stream(chain, static_cast<std::uint32_t>(t)));
    const Tensor eps = rng.normal_tensor(post.mean.shape());
    if (opts.mode == SampleMode::IsotropicApprox) {
      const Tensor aux = rng.normal_tensor(post.mean.shape());
      x = posterior_sample(p, post, eps, opts.mode, &aux);
    } else {
      x = posterior_sample(p, post, eps, opts.mode);
    }
  }
  out.x0 = std::move(x);
  return out;
}

std::vector<ChainResult> sample_batch(const DiffusionProcess& p, const Denoiser& d, int n,
                                      std::uint64_t seed, const SampleOptions& opts,
                                      int threads) {
  if (n < 1) throw ParameterError("sample_batch: n must be >= 1");
  std::vector<ChainResult> results(n);
  const int workers = std::clamp(threads, 1, n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) results[i] = sample_chain(p, d, seed, i, opts);
    return results;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          results[i] = sample_chain(p, d, seed, i, opts);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

Tensor clamp_for_export(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], -1.0, 1.0);
  return out;
}

}  // namespace ssd
