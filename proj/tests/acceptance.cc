// Acceptance suite: one line per criterion, exit status 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ssd/analysis.h"
#include "ssd/denoiser.h"
#include "ssd/errors.h"
#include "ssd/process.h"
#include "ssd/rng.h"
#include "ssd/routing.h"
#include "ssd/sampler.h"
#include "ssd/verify.h"

using namespace ssd;

namespace {

constexpr std::uint64_t kSeed = 20261016;

struct Outcome {
  bool pass = false;
  std::string detail;
};

DiffusionProcess make(std::vector<int> levels, int T, int channels,
                      ScheduleKind kind = ScheduleKind::Equal, double gamma = 1.0) {
  return DiffusionProcess(linear_beta_schedule(T),
                          make_resolution_schedule(kind, gamma, std::move(levels), T), channels);
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Outcome from_checks(const std::vector<CheckResult>& checks) {
  Outcome o{true, {}};
  for (const CheckResult& c : checks) {
    o.pass = o.pass && c.pass;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += c.name + " err=" + sci(c.error) + " tol=" + sci(c.tol);
    if (!c.detail.empty()) o.detail += " (" + c.detail + ")";
  }
  return o;
}

// Upper 99% point of chi-square with k dof (Wilson-Hilferty).
double chi2_q99(double k) {
  const double z = 2.3263478740408408;
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

// Smallest m with P(Binomial(n, p) > m) < alpha.
int binomial_upper(int n, double p, double alpha) {
  double cdf = 0.0;
  for (int m = 0; m <= n; ++m) {
    cdf += std::exp(std::lgamma(n + 1.0) - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0) +
                    m * std::log(p) + (n - m) * std::log1p(-p));
    if (1.0 - cdf < alpha) return m;
  }
  return n;
}

Outcome criterion_adjoint() { return from_checks({check_adjoint(kSeed, 100)}); }

Outcome criterion_woodbury() {
  return from_checks({check_woodbury(make({2, 4, 8}, 1000, 1), kSeed)});
}

Outcome criterion_ddpm() { return from_checks({check_ddpm_collapse(kSeed, 1000, 1e-10)}); }

Outcome criterion_forward() {
  return from_checks({check_forward(make({2, 4, 8}, 200, 1)),
                      check_forward(make({4, 8}, 100, 3))});
}

Outcome criterion_lanczos() {
  const DiffusionProcess p = make({4, 8}, 1000, 1);
  return from_checks({check_lanczos_dense(p, p.resolution().transition_steps().front(), kSeed),
                      check_lanczos_diagonal(kSeed, 32, 1e-10)});
}

struct CovStats {
  Eigen::MatrixXd truth, exact, iso;
  int n = 0;
};

CovStats posterior_draws(const DiffusionProcess& p, int n) {
  const int t = p.resolution().transition_steps().front();
  CounterRng rng(kSeed, 0x51);
  const Tensor x_t = rng.normal_tensor(p.shape_at(t));
  const Tensor mu = rng.normal_tensor(p.shape_at(t - 1));
  const PosteriorParams post = posterior_params(p, x_t, mu, t);
  const std::size_t dim = post.mean.size();
  CovarianceAccumulator exact(dim), iso(dim);
  for (int k = 0; k < n; ++k) {
    CounterRng r(kSeed, 0x100000000ull + static_cast<std::uint64_t>(k));
    const Tensor eps = r.normal_tensor(post.mean.shape());
    const Tensor aux = r.normal_tensor(post.mean.shape());
    exact.add(posterior_sample(p, post, eps, SampleMode::Exact));
    iso.add(posterior_sample(p, post, eps, SampleMode::IsotropicApprox, &aux));
  }
  return CovStats{dense_posterior_direct(p, t, x_t, mu).cov, exact.covariance(),
                  iso.covariance(), n};
}

// Gaussian standard error of a sample covariance entry.
double cov_se(const Eigen::MatrixXd& S, Eigen::Index i, Eigen::Index j, int n) {
  return std::sqrt((S(i, j) * S(i, j) + S(i, i) * S(j, j)) / n);
}

Outcome criterion_sampling() {
  const int n = 100000;
  std::ostringstream detail;
  bool pass = true;

  // 4 -> 2: every one of the 136 distinct entries within 3 standard errors.
  {
    const CovStats s = posterior_draws(make({2, 4}, 1000, 1), n);
    int outside = 0, entries = 0;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < s.truth.rows(); ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double z = std::abs(s.exact(i, j) - s.truth(i, j)) / cov_se(s.truth, i, j, n);
        worst = std::max(worst, z);
        outside += z > 3.0;
        ++entries;
      }
    }
    pass = pass && outside == 0;
    detail << "4->2: " << outside << "/" << entries << " entries beyond 3se (max z "
           << sci(worst) << ")";
  }

  // 8 -> 4: 2080 entries, exceedance count against the nominal 3se rate, plus
  // joint off-diagonal tests for both modes.
  {
    const CovStats s = posterior_draws(make({4, 8}, 1000, 1), n);
    const Eigen::Index d = s.truth.rows();
    int outside = 0, entries = 0, offdiag = 0, true_nonzero = 0;
    double chi_exact_truth = 0.0, chi_exact_zero = 0.0, chi_iso_zero = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double se = cov_se(s.truth, i, j, n);
        const double z = (s.exact(i, j) - s.truth(i, j)) / se;
        outside += std::abs(z) > 3.0;
        ++entries;
        if (i == j) continue;
        ++offdiag;
        chi_exact_truth += z * z;
        const double se_e = std::sqrt(s.exact(i, i) * s.exact(j, j) / n);
        const double se_i = std::sqrt(s.iso(i, i) * s.iso(j, j) / n);
        chi_exact_zero += (s.exact(i, j) / se_e) * (s.exact(i, j) / se_e);
        chi_iso_zero += (s.iso(i, j) / se_i) * (s.iso(i, j) / se_i);
        true_nonzero += std::abs(s.truth(i, j)) > 5.0 * se;
      }
    }
    // Two-sided 3-sigma tail probability.
    const double p3 = std::erfc(3.0 / std::sqrt(2.0));
    const int limit = binomial_upper(entries, p3, 0.01);
    const double q = chi2_q99(offdiag);
    const bool count_ok = outside <= limit;
    const bool exact_ok = chi_exact_truth <= q && chi_exact_zero > q;
    const bool iso_ok = chi_iso_zero <= q;
    pass = pass && count_ok && exact_ok && iso_ok;
    detail << "; 8->4: " << outside << "/" << entries << " beyond 3se (limit " << limit
           << "); off-diagonal chi2 (" << offdiag << " dof, q99 " << sci(q)
           << "): exact vs truth " << sci(chi_exact_truth) << ", exact vs 0 "
           << sci(chi_exact_zero) << ", isotropic vs 0 " << sci(chi_iso_zero) << "; "
           << true_nonzero << " true off-diagonals beyond 5se";
  }
  return Outcome{pass, detail.str()};
}

Outcome criterion_oracle() {
  const DiffusionProcess gray = make({2, 4, 8}, 1000, 1);
  const DiffusionProcess color = make({4, 8, 16}, 1000, 3);
  CounterRng rng(kSeed, 7);
  const Tensor a = rng.normal_tensor(Shape{1, 8, 8});
  const Tensor b = rng.normal_tensor(Shape{3, 16, 16});
  return from_checks({check_oracle_reconstruction(gray, a, kSeed),
                      check_oracle_reconstruction(color, b, kSeed)});
}

Outcome criterion_psd() {
  return from_checks({check_psd_margins(make({2, 4, 8}, 300, 1)),
                      check_psd_margins(make({4, 8, 16}, 300, 3)),
                      check_psd_margins(make({8, 16, 32, 64}, 1000, 1,
                                             ScheduleKind::ConvexDecay, 0.5))});
}

Outcome criterion_info() {
  const InfoCurve c = info_t_curve(linear_beta_schedule(1000));
  double worst_rise = 0.0;
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    worst_rise = std::max(worst_rise, c.points[i].second - c.points[i - 1].second);
  }
  const double hi = info_from_snr_root(std::numeric_limits<double>::infinity());
  const double near_hi = info_from_snr_root(1e9);
  const double lo = info_from_snr_root(0.0);
  const double near_lo = info_from_snr_root(1e-9);
  const InfoCurve r = info_r_curve(5);
  const double quarter = r.points[2].second;
  const bool pass = worst_rise <= 0.0 && std::abs(hi - 1.0) <= 1e-6 &&
                    std::abs(near_hi - 1.0) <= 1e-6 && std::abs(lo) <= 1e-6 &&
                    std::abs(near_lo) <= 1e-6 && r.points[2].first == 0.5 && quarter == 0.25;
  std::ostringstream d;
  d << "max step rise " << sci(worst_rise) << ", Info(s=inf)=" << hi << ", Info(s=1e9)="
    << near_hi << ", Info(s=0)=" << lo << ", Info(s=1e-9)=" << sci(near_lo)
    << ", Info(r=0.5)=" << quarter;
  return Outcome{pass, d.str()};
}

double loss_ratio(const std::vector<int>& levels, std::string& note) {
  const DiffusionProcess p = make(levels, 1000, 3);
  const std::vector<Tensor> data = make_blob_dataset(64, 3, 8, 1);
  MlpDenoiser m(p, 128, 0);
  TrainOptions opts;
  opts.seed = kSeed;
  const std::vector<TrainRecord> rec = train_denoiser(m, p, data, opts);
  double at50 = 0.0, at2000 = 0.0;
  for (const TrainRecord& r : rec) {
    if (r.iter == 50) at50 = r.eval_loss;
    if (r.iter == 2000) at2000 = r.eval_loss;
  }
  note = "loss(50)=" + sci(at50) + " loss(2000)=" + sci(at2000);
  return at2000 / at50;
}

Outcome criterion_training() {
  std::string single_note, multi_note;
  const double single = loss_ratio({8}, single_note);
  const double multi = loss_ratio({4, 8}, multi_note);

  const DiffusionProcess p = make({4, 8}, 1000, 3);
  MlpDenoiser m(p, 32, 3);
  const std::vector<Tensor> data = make_blob_dataset(4, 3, 8, 2);
  const int tr = p.resolution().transition_steps().front();
  std::vector<LossTerm> terms;
  CounterRng rng(kSeed, 9);
  int k = 0;
  for (int t : {5, tr, tr + 40, 1000}) {
    terms.push_back(LossTerm{&data[k++], t, rng.normal_tensor(p.shape_at(t))});
  }
  double worst = 0.0;
  const std::vector<GradientEntry> g = gradient_check(m, p, terms);
  for (const GradientEntry& e : g) worst = std::max(worst, e.rel_error);

  const bool pass = single < 0.5 && multi < 0.7 && worst <= 1e-4;
  std::ostringstream d;
  d << "single-level ratio " << sci(single) << " (" << single_note << "), 2-level ratio "
    << sci(multi) << " (" << multi_note << "), gradient check " << g.size()
    << " entries max rel err " << sci(worst);
  return Outcome{pass, d.str()};
}

Outcome criterion_flops() {
  bool pass = true;
  std::ostringstream d;
  for (int L : {4, 5, 6}) {
    std::vector<int> levels;
    for (int k = L - 1; k >= 0; --k) levels.push_back(64 >> k);
    const ChainCost multi = chain_cost(
        make_resolution_schedule(ScheduleKind::ConvexDecay, 0.5, levels, 1000), L);
    const ChainCost single = chain_cost(single_level_schedule(64, 1000), L);
    pass = pass && multi.flexi < single.flexi;
    d << (L == 4 ? "" : ", ") << "L=" << L << " ratio "
      << sci(static_cast<double>(multi.flexi) / static_cast<double>(single.flexi));
  }
  return Outcome{pass, d.str()};
}

Outcome criterion_backtrack() {
  const NoiseSchedule ns = linear_beta_schedule(1000);
  double worst = 0.0;
  bool monotone = true;
  int cases = 0;
  for (int t : {1, 100, 250, 500, 750}) {
    int prev = std::numeric_limits<int>::max();
    for (int i = 1; i <= 25; ++i) {
      const double c = 0.01 * i;
      Backtrack b;
      try {
        b = backtrack_timestep(ns, t, c);
      } catch (const NotFoundError&) {
        continue;
      }
      ++cases;
      const double ab_s = ns.alpha_bar(b.s), ab_t = ns.alpha_bar(t);
      worst = std::max(worst,
                       std::abs(b.achieved_c - ab_s * (1.0 - ab_t) / (ab_t * (1.0 - ab_s))));
      monotone = monotone && b.s <= prev && b.s >= t;
      prev = b.s;
    }
  }
  std::ostringstream d;
  d << cases << " (t, c) cases, max round-trip err " << sci(worst)
    << (monotone ? ", s non-increasing in c" : ", s NOT monotone in c");
  return Outcome{monotone && worst <= 1e-12 && cases > 0, d.str()};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "adjoint identity", 1.0, criterion_adjoint},
      {2, "posterior equivalence (Woodbury)", 5.0, criterion_woodbury},
      {3, "DDPM collapse", 0.0, criterion_ddpm},
      {4, "forward consistency", 0.0, criterion_forward},
      {5, "Lanczos accuracy", 0.0, criterion_lanczos},
      {6, "posterior sampling statistics", 0.0, criterion_sampling},
      {7, "oracle reconstruction", 10.0, criterion_oracle},
      {8, "PSD feasibility margins", 0.0, criterion_psd},
      {9, "information curves", 0.0, criterion_info},
      {10, "training sanity", 120.0, criterion_training},
      {11, "cost-model direction", 0.0, criterion_flops},
      {12, "backtracking round trip", 0.0, criterion_backtrack},
  };
  int passed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = Outcome{false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool ok = o.pass;
    std::string timing = sci(secs) + " s";
    if (c.budget_s > 0.0) {
      timing += " / " + sci(c.budget_s) + " s";
      if (secs >= c.budget_s) ok = false;
    }
    passed += ok;
    std::printf("[%s] %2d %-34s %s [%s]\n", ok ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", passed, criteria.size());
  return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
