// Acceptance checks. `acceptance N` runs criterion N, `acceptance` runs all.
// Each criterion prints one PASS/FAIL line with the measured values.

#include <boost/random/uniform_int_distribution.hpp>
#include <fmt/format.h>

#include <Eigen/SVD>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <string>

#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/lrmc.hpp"
#include "rapidmaxnull/metrics.hpp"
#include "rapidmaxnull/naive_engine.hpp"
#include "rapidmaxnull/random.hpp"
#include "rapidmaxnull/rapid_engine.hpp"
#include "rapidmaxnull/simgen.hpp"
#include "rapidmaxnull/teststat.hpp"

namespace rmn = rapidmaxnull;
using rmn::RowMatrix;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

bool report(int id, bool pass, const std::string& detail) {
  fmt::print("{} criterion {}: {}\n", pass ? "PASS" : "FAIL", id, detail);
  std::fflush(stdout);
  return pass;
}

RowMatrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  auto rng = rmn::make_stream(seed, rmn::StreamDomain::kSimulation, 4242);
  rmn::fill_normal(std::span<double>(m.data(), rows * cols), 1.0, rng);
  return m;
}

constexpr std::uint64_t kDataSeed = 1;
constexpr std::uint64_t kRunSeed = 7;

// ---- 1: naive engine against an independent brute force -------------------

bool criterion1() {
  const auto start = Clock::now();
  const std::size_t v = 50, n = 6, L = 200;
  const rmn::DataMatrix x(gaussian(v, n, 101), 3);
  const rmn::PermutationPlan plan(kRunSeed, L, n);
  const auto res = rmn::run_naive(x, plan);

  std::size_t mismatches = 0;
  for (std::size_t p = 0; p < L; ++p) {
    // Regenerate the labeling: identity for p = 0, else Fisher-Yates on the
    // permutation's own stream.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (p > 0) {
      auto rng = rmn::make_stream(kRunSeed, rmn::StreamDomain::kShuffle, p);
      for (std::size_t i = n; i > 1; --i) {
        boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
      }
    }
    double best = -INFINITY;
    for (std::size_t i = 0; i < v; ++i) {
      const auto row = x.row(i);
      double s1 = 0, s2 = 0;
      for (std::size_t j = 0; j < 3; ++j) s1 += row[order[j]];
      for (std::size_t j = 3; j < 6; ++j) s2 += row[order[j]];
      const double m1 = s1 / 3.0, m2 = s2 / 3.0;
      double q1 = 0, q2 = 0;
      for (std::size_t j = 0; j < 3; ++j) q1 += (row[order[j]] - m1) * (row[order[j]] - m1);
      for (std::size_t j = 3; j < 6; ++j) q2 += (row[order[j]] - m2) * (row[order[j]] - m2);
      const double t = (m1 - m2) / std::sqrt((q1 / 2.0) / 3.0 + (q2 / 2.0) / 3.0);
      best = std::max(best, t);
    }
    mismatches += best != res.null.maxima()[p];
  }
  const double secs = seconds_since(start);
  return report(1, mismatches == 0 && secs < 1.0,
                fmt::format("{} of {} maxima differ from the brute force (exact equality), "
                            "{:.3f} s (limit 1 s)",
                            mismatches, L, secs));
}

// ---- 2-4: fidelity on the first simulation ---------------------------------

struct Sim1Pair {
  rmn::MaxNull naive;
  rmn::MaxNull rapid;
  rmn::RunConfig config;
};

Sim1Pair sim1_pair(std::size_t L, std::optional<double> eta) {
  const auto sim = rmn::gen_sim1(kDataSeed);
  rmn::RunConfig cfg;
  cfg.permutations = L;
  cfg.seed = kRunSeed;
  if (eta) cfg.eta = *eta;
  cfg = cfg.resolved(sim.data.voxels(), sim.data.subjects());
  const rmn::PermutationPlan plan(kRunSeed, L, sim.data.subjects());
  auto naive = rmn::run_naive(sim.data, plan);
  auto rapid = rmn::run_rapid(sim.data, cfg);
  return {std::move(naive.null), std::move(rapid.null), cfg};
}

bool criterion2and3(int which) {
  const auto pair = sim1_pair(10000, std::nullopt);
  if (which == 2) {
    const double kl = rmn::kl_divergence(pair.naive, pair.rapid);
    return report(2, kl < 1e-2,
                  fmt::format("KL(naive||rapid) = {:.4g} (limit 1e-2), v=20000 n=30 L=10000 "
                              "eta={:.4f} ell={} r={}",
                              kl, pair.config.eta, pair.config.training_columns, pair.config.rank));
  }
  const std::vector<double> alphas{0.05, 0.01};
  const auto rows = rmn::threshold_table(pair.rapid, pair.naive, alphas);
  bool pass = true;
  std::string detail;
  for (const auto& r : rows) {
    const double pct = r.percent_difference.value_or(INFINITY);
    pass &= pct < 0.1;
    detail += fmt::format("alpha={}: tau_naive={:.5f} tau_rapid={:.5f} pct_diff={:.4g}; ", r.alpha,
                          r.tau_b, r.tau_a, pct);
  }
  return report(3, pass, detail + "limit 0.1 percent");
}

bool criterion4() {
  const double eta = rmn::eta_min(20000, 30) / 4.0;
  const auto pair = sim1_pair(10000, eta);
  const double kl = rmn::kl_divergence(pair.naive, pair.rapid);
  return report(4, kl > 1e-1,
                fmt::format("KL(naive||rapid) = {:.4g} at eta=eta_min/4={:.5f} (must exceed 1e-1)",
                            kl, eta));
}

// ---- 5: resampling-risk arithmetic -----------------------------------------

bool criterion5() {
  const auto a = rmn::resampling_risk(59, 71, 59);
  const auto b = rmn::resampling_risk(2158, 2241, 2158);
  const bool pass = a.risk && b.risk && std::abs(*a.risk - 0.0845) <= 5e-4 &&
                    std::abs(*b.risk - 0.0185) <= 5e-4;
  return report(5, pass,
                fmt::format("risk(59,71,59) = {:.5f} (target 0.0845), risk(2158,2241,2158) = "
                            "{:.5f} (target 0.0185), tolerance 5e-4",
                            a.risk.value_or(NAN), b.risk.value_or(NAN)));
}

// ---- 6: exact-rank completion ----------------------------------------------

bool criterion6() {
  const std::size_t v = 5000, r = 10, L = 500, k = 40;
  const Eigen::MatrixXd u = rmn::init_basis(v, r, 606).matrix();
  const Eigen::MatrixXd w = RowMatrix(gaussian(r, L, 607));
  const Eigen::MatrixXd truth = u * w;

  rmn::ColumnTrainingConfig cfg;
  cfg.rank = r;
  cfg.eta = static_cast<double>(k) / static_cast<double>(v);
  cfg.seed = kRunSeed;
  cfg.training.max_passes = 400;
  cfg.training.tolerance = 1e-12;
  const auto tr = rmn::train_columns(truth, cfg);

  double worst = 0.0;
  for (std::size_t c = 0; c < L; ++c) {
    auto rng = rmn::make_stream(kRunSeed, rmn::StreamDomain::kRecoverySample, c, 99);
    rmn::ObservedColumn col;
    col.indices = rmn::sample_without_replacement(v, k, rng);
    for (auto i : col.indices) col.values.push_back(truth(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    const rmn::Vector done =
        rmn::complete_column(tr.model.basis(), rmn::fit_coefficients(tr.model.basis(), col));
    const auto t = truth.col(static_cast<Eigen::Index>(c));
    worst = std::max(worst, (done - t).norm() / t.norm());
  }
  return report(6, worst < 1e-6,
                fmt::format("worst per-column relative l2 completion error = {:.3g} (limit 1e-6); "
                            "k={} of v={}, r={}, {} columns, {} passes, final residual {:.3g}",
                            worst, k, v, r, L, tr.diagnostics.passes,
                            tr.diagnostics.final_pass_residual));
}

// ---- 7: counters and speedup -----------------------------------------------

bool criterion7() {
  const auto sim = rmn::gen_sim1(kDataSeed);
  rmn::RunConfig cfg;
  cfg.permutations = 20000;
  cfg.seed = kRunSeed;
  cfg.threads = 1;
  cfg = cfg.resolved(sim.data.voxels(), sim.data.subjects());
  const rmn::PermutationPlan plan(kRunSeed, cfg.permutations, sim.data.subjects());

  const auto rapid = rmn::run_rapid(sim.data, cfg);
  const auto naive = rmn::run_naive(sim.data, plan);

  const std::uint64_t v = sim.data.voxels();
  const std::uint64_t k = cfg.samples_per_column(v);
  const std::uint64_t ell = cfg.training_columns, L = cfg.permutations;
  const bool identity = rapid.counters.sampled_evaluations == k * (L - ell) &&
                        rapid.counters.full_evaluations == v * ell &&
                        naive.evaluations == v * L;
  const double rapid_evals =
      static_cast<double>(rapid.counters.full_evaluations + rapid.counters.sampled_evaluations);
  const double ratio = static_cast<double>(naive.evaluations) / rapid_evals;
  const double speedup = naive.seconds / rapid.counters.total_seconds;
  return report(7, identity && ratio > 10.0 && speedup > 5.0,
                fmt::format("sampled evaluations {} (expected ceil(eta v)(L-ell) = {}); "
                            "evaluation ratio {:.2f} (limit >10); wall-clock naive {:.2f} s vs "
                            "rapid {:.2f} s = {:.2f}x (limit >5x, one thread each)",
                            rapid.counters.sampled_evaluations, k * (L - ell), ratio,
                            naive.seconds, rapid.counters.total_seconds, speedup));
}

// ---- 8: insensitivity to signal strength and sparsity ----------------------

bool criterion8() {
  std::vector<double> kls;
  std::string detail;
  std::uint64_t cell = 0;
  for (double mu : {1.0, 5.0}) {
    for (double sparsity : {0.01, 0.05}) {
      rmn::SimSpec spec;
      spec.n = 60;
      spec.v = 20000;
      spec.effect_mu = mu;
      spec.sparsity = sparsity;
      spec.seed = rmn::derive_seed(kDataSeed, rmn::StreamDomain::kCellSeed, cell++);
      const auto sim = rmn::gen_sim2(spec);
      rmn::RunConfig cfg;
      cfg.permutations = 5000;
      cfg.seed = kRunSeed;
      const rmn::PermutationPlan plan(kRunSeed, cfg.permutations, sim.data.subjects());
      const auto naive = rmn::run_naive(sim.data, plan);
      const auto rapid = rmn::run_rapid(sim.data, cfg);
      kls.push_back(rmn::kl_divergence(naive.null, rapid.null));
      detail += fmt::format("mu={} s={}: KL={:.4g}; ", mu, sparsity, kls.back());
    }
  }
  const auto [lo, hi] = std::minmax_element(kls.begin(), kls.end());
  const bool below = *hi < 1e-1;
  const bool spread = *hi <= 3.0 * *lo;
  return report(8, below && spread,
                detail + fmt::format("max/min = {:.3g} (limits: all < 1e-1, ratio <= 3)",
                                     *hi / *lo));
}

// ---- 9: property suites ----------------------------------------------------

bool criterion9() {
  constexpr int kCases = 100;
  auto rng = rmn::make_stream(909, rmn::StreamDomain::kSimulation, 0);

  double drift = 0.0;
  for (int c = 0; c < kCases; ++c) {
    const std::size_t v = 20 + rng() % 40, r = 1 + rng() % 4;
    auto basis = rmn::init_basis(v, r, 1000 + c);
    const RowMatrix data = gaussian(v, 8, 2000 + c);
    for (int step = 0; step < 10000; ++step) {
      rmn::ObservedColumn col;
      col.indices = rmn::sample_without_replacement(v, r + 1 + rng() % (v - r), rng);
      for (auto i : col.indices) col.values.push_back(data(static_cast<Eigen::Index>(i), step % 8));
      try {
        rmn::track_update(basis, col, 1.0);
      } catch (const rmn::IllConditionedSampleError&) {
      }
    }
    drift = std::max(drift, basis.orthonormality_error());
  }

  int antisymmetric = 0, consistent = 0, deterministic = 0;
  for (int c = 0; c < kCases; ++c) {
    const std::size_t n1 = 2 + rng() % 10, n2 = 2 + rng() % 10, v = 10 + rng() % 200;
    const rmn::DataMatrix x(gaussian(v, n1 + n2, 3000 + c), n1);
    RowMatrix swapped(x.voxels(), x.subjects());
    swapped << x.values().rightCols(n2), x.values().leftCols(n1);
    const rmn::DataMatrix y(swapped, n2);
    const rmn::PermutationPlan id(0, 1, n1 + n2);
    const auto a = rmn::tstat_full(rmn::permute_columns(x, id, 0));
    const auto b = rmn::tstat_full(rmn::permute_columns(y, id, 0));
    bool anti = true;
    for (std::size_t i = 0; i < v; ++i) anti &= a.values[i] == -b.values[i];
    antisymmetric += anti;

    const rmn::PermutationPlan plan(c, 5, n1 + n2);
    const auto view = rmn::permute_columns(x, plan, 1 + c % 4);
    const auto full = rmn::tstat_full(view);
    const auto omega = rmn::sample_without_replacement(v, 1 + rng() % v, rng);
    const auto sub = rmn::tstat_subset(view, omega);
    bool same = true;
    for (std::size_t j = 0; j < omega.size(); ++j) same &= sub[j] == full.values[omega[j]];
    consistent += same;
  }
  for (int c = 0; c < kCases; ++c) {
    const std::size_t v = 100 + rng() % 200;
    const rmn::DataMatrix x(gaussian(v, 12, 4000 + c), 6);
    rmn::RunConfig cfg;
    cfg.permutations = 40 + rng() % 40;
    cfg.training_columns = 12;
    cfg.rank = 6;
    cfg.eta = 0.25;
    cfg.seed = c;
    cfg.training.max_passes = 3;
    auto other = cfg;
    cfg.threads = 1;
    other.threads = 3;
    const auto r1 = rmn::run_rapid(x, cfg);
    const auto r3 = rmn::run_rapid(x, other);
    const rmn::PermutationPlan plan(c, cfg.permutations, 12);
    rmn::NaiveOptions one, three;
    three.threads = 3;
    const auto n1 = rmn::run_naive(x, plan, one);
    const auto n3 = rmn::run_naive(x, plan, three);
    deterministic += r1.null.maxima() == r3.null.maxima() && n1.null.maxima() == n3.null.maxima();
  }
  const bool pass = drift <= 1e-8 && antisymmetric == kCases && consistent == kCases &&
                    deterministic == kCases;
  return report(9, pass,
                fmt::format("orthonormality drift after 1e4 updates max {:.3g} (limit 1e-8) over "
                            "{} cases; group-swap antisymmetry {}/{}; subset restriction "
                            "consistency {}/{}; thread-count determinism {}/{}",
                            drift, kCases, antisymmetric, kCases, consistent, kCases,
                            deterministic, kCases));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<bool()>> criteria{
      criterion1, [] { return criterion2and3(2); }, [] { return criterion2and3(3); },
      criterion4, criterion5, criterion6, criterion7, criterion8, criterion9};
  std::vector<int> selected;
  if (argc > 1) {
    for (int i = 1; i < argc; ++i) selected.push_back(std::stoi(argv[i]));
  } else {
    for (int i = 1; i <= 9; ++i) selected.push_back(i);
  }
  bool all = true;
  for (int id : selected) {
    if (id < 1 || id > 9) {
      fmt::print(stderr, "unknown criterion {}\n", id);
      return 2;
    }
    try {
      all &= criteria[static_cast<std::size_t>(id - 1)]();
    } catch (const std::exception& e) {
      all &= report(id, false, std::string("error: ") + e.what());
    }
  }
  return all ? 0 : 1;
}
