#include "rapidmaxnull/rapid_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <fmt/format.h>

#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/parallel.hpp"
#include "rapidmaxnull/random.hpp"
#include "rapidmaxnull/teststat.hpp"

namespace rapidmaxnull {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::span<const double> column_span(const Eigen::MatrixXd& m, Eigen::Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}

// Draws Omega for one column and factorizes U_Omega, redrawing when the
// conditioning guard trips. `sub` separates otherwise identical draws (the
// training pass); attempts are folded into the sub-stream index.
std::pair<std::vector<std::size_t>, RestrictedFit> draw_fit(
    const Basis& basis, std::size_t k, std::uint64_t seed, StreamDomain domain,
    std::size_t index, std::size_t sub, std::size_t& resamples,
    const RowMatrix* row_major = nullptr) {
  for (std::size_t attempt = 0;; ++attempt) {
    auto rng = make_stream(seed, domain, index, sub * (kMaxResamples + 1) + attempt);
    auto omega = sample_without_replacement(basis.voxels(), k, rng);
    try {
      RestrictedFit fit(basis, omega, row_major);
      return {std::move(omega), std::move(fit)};
    } catch (const IllConditionedSampleError& e) {
      if (attempt == kMaxResamples) {
        throw NumericalError(fmt::format(
            "column {}: restricted basis stayed ill-conditioned after {} redraws of {} "
            "voxels (last cond ~ {:.3g}); increase eta or lower the rank",
            index, kMaxResamples, k, e.condition()));
      }
      ++resamples;
    }
  }
}

double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

SubspaceModel::SubspaceModel(Basis basis, double sigma, double mu, std::size_t ell, double eta,
                             bool two_sided)
    : basis_(std::move(basis)), sigma_(sigma), mu_(mu), ell_(ell), eta_(eta),
      two_sided_(two_sided) {
  if (!(sigma_ >= 0.0) || !std::isfinite(sigma_)) {
    throw UsageError("residual standard deviation must be finite and >= 0");
  }
  if (!std::isfinite(mu_)) throw UsageError("max shift must be finite");
}

TrainingResult train(const DataMatrix& x, const RunConfig& raw_config) {
  const auto start = Clock::now();
  const RunConfig cfg = raw_config.resolved(x.voxels(), x.subjects());
  cfg.validate(x.voxels(), x.subjects());
  const std::size_t v = x.voxels();
  const std::size_t ell = cfg.training_columns;
  const unsigned threads = resolve_threads(cfg.threads);
  const PermutationPlan plan(cfg.seed, cfg.permutations, x.subjects());

  Eigen::MatrixXd columns(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(ell));
  parallel_for(ell, threads, [&](std::size_t i) {
    const auto stats = tstat_full(permute_columns(x, plan, i));
    columns.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Vector>(stats.values.data(), static_cast<Eigen::Index>(v));
  });

  ColumnTrainingConfig column_cfg;
  column_cfg.rank = cfg.rank;
  column_cfg.eta = cfg.eta;
  column_cfg.training = cfg.training;
  column_cfg.seed = cfg.seed;
  column_cfg.shift = cfg.shift;
  column_cfg.two_sided = cfg.two_sided;
  auto result = train_columns(std::move(columns), column_cfg);
  result.seconds = seconds_since(start);
  return result;
}

TrainingResult train_columns(Eigen::MatrixXd columns, const ColumnTrainingConfig& cfg) {
  const auto start = Clock::now();
  const auto v = static_cast<std::size_t>(columns.rows());
  const auto ell = static_cast<std::size_t>(columns.cols());
  if (v == 0 || ell == 0) throw UsageError("training needs at least one full column");
  if (!columns.allFinite()) throw DataError("training columns contain non-finite values");
  if (cfg.rank < 1 || cfg.rank > v) {
    throw UsageError(fmt::format("rank {} must lie in [1, v={}]", cfg.rank, v));
  }
  if (ell < cfg.rank) throw UsageError("training columns cannot identify rank");
  if (!(cfg.eta > 0.0 && cfg.eta <= 1.0)) {
    throw UsageError(fmt::format("sub-sampling rate {} must lie in (0, 1]", cfg.eta));
  }
  if (cfg.training.max_passes == 0) throw UsageError("training needs at least one pass");
  RunConfig rate;
  rate.eta = cfg.eta;
  const std::size_t k = rate.samples_per_column(v);
  if (k < cfg.rank) {
    throw UsageError("ceil(eta*v) is below the model rank; the fit is underdetermined");
  }

  Basis basis = init_basis(v, cfg.rank, cfg.seed);
  TrainingDiagnostics diag;
  const double tau = static_cast<double>(ell * cfg.training.max_passes) / 2.0;
  std::uint64_t t = 0;
  std::vector<std::vector<std::size_t>> last_omega(ell);
  for (std::size_t pass = 0; pass < cfg.training.max_passes; ++pass) {
    double residual_sum = 0.0;
    for (std::size_t i = 0; i < ell; ++i) {
      auto [omega, fit] =
          draw_fit(basis, k, cfg.seed, StreamDomain::kTrainingSample, i, pass, diag.resamples);
      ObservedColumn observed{std::move(omega), {}};
      observed.values.reserve(k);
      for (std::size_t idx : observed.indices) {
        observed.values.push_back(columns(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(i)));
      }
      const double step = cfg.training.step_scale / (1.0 + static_cast<double>(t) / tau);
      ++t;
      residual_sum += track_update(basis, observed, step, fit.solve(observed.values)).relative_residual;
      last_omega[i] = std::move(observed.indices);
    }
    diag.passes = pass + 1;
    diag.final_pass_residual = residual_sum / static_cast<double>(ell);
    if (diag.final_pass_residual < cfg.training.tolerance) {
      diag.converged = true;
      break;
    }
  }

  // Full-observation fit: U is orthonormal, so W_ex = U^T T_ex.
  const Eigen::MatrixXd& u = basis.matrix();
  const Eigen::MatrixXd fitted = u * (u.transpose() * columns);
  const Eigen::MatrixXd residual = columns - fitted;

  std::vector<double> sampled;
  sampled.reserve(ell * k);
  for (std::size_t i = 0; i < ell; ++i) {
    for (std::size_t idx : last_omega[i]) {
      sampled.push_back(residual(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(i)));
    }
  }
  const double sigma = sample_stddev(sampled);

  std::vector<double> maxima(ell);
  for (std::size_t i = 0; i < ell; ++i) {
    maxima[i] = column_max(column_span(columns, static_cast<Eigen::Index>(i)), cfg.two_sided);
  }

  double mu = 0.0;
  if (cfg.shift == ShiftEstimator::kSupResidual) {
    mu = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ell; ++i) {
      mu = std::max(mu, column_max(column_span(residual, static_cast<Eigen::Index>(i)),
                                   cfg.two_sided));
    }
  } else {
    Vector synthetic(static_cast<Eigen::Index>(v));
    for (std::size_t i = 0; i < ell; ++i) {
      auto rng = make_stream(cfg.seed, StreamDomain::kShiftNoise, i);
      fill_normal(std::span<double>(synthetic.data(), v), sigma, rng);
      synthetic += fitted.col(static_cast<Eigen::Index>(i));
      mu += maxima[i] - column_max(std::span<const double>(synthetic.data(), v), cfg.two_sided);
    }
    mu /= static_cast<double>(ell);
  }

  std::vector<double> observed_map(columns.col(0).data(), columns.col(0).data() + v);
  TrainingResult result{SubspaceModel(std::move(basis), sigma, mu, ell, cfg.eta, cfg.two_sided),
                        std::move(maxima),
                        std::move(columns),
                        std::move(observed_map),
                        diag,
                        static_cast<std::uint64_t>(v) * ell,
                        0.0};
  result.seconds = seconds_since(start);
  return result;
}

namespace {

// Shared body of the noisy-maximum sampler. `block_cmax(b)` is the largest
// (absolute, when two-sided) completed value in block b; `block_values(b)`
// returns the block's completed values and is only called for blocks that
// can still hold the maximum.
template <typename BlockMax, typename BlockValues>
double noisy_max(std::size_t v, double sigma, bool two_sided, std::uint64_t seed,
                 std::uint64_t index, BlockMax&& block_cmax, BlockValues&& block_values) {
  auto magnitude = [two_sided](double x) { return two_sided ? std::abs(x) : x; };
  const std::size_t blocks = (v + kNoiseBlock - 1) / kNoiseBlock;
  std::vector<double> cmax(blocks);
  for (std::size_t b = 0; b < blocks; ++b) cmax[b] = block_cmax(b);
  if (sigma == 0.0) return *std::max_element(cmax.begin(), cmax.end());

  // One uniform per block, in block order, fixes every block's noise maximum
  // M_b = F_m^{-1}(U_b) with F_m the CDF of the maximum of m (absolute)
  // normals. A block can only hold the column maximum if
  // cmax_b + sigma M_b > best, i.e. U_b > F_m((best - cmax_b) / sigma), so
  // M_b itself is only inverted for blocks that pass that test.
  auto stream = make_stream(seed, StreamDomain::kResidualNoise, index);
  std::vector<double> log_u(blocks);
  for (auto& lu : log_u) lu = std::log((static_cast<double>(stream() >> 11) + 0.5) * 0x1.0p-53);

  // Visit the block with the largest completed value first so the running
  // maximum is high early, then the rest in index order.
  const auto lead = static_cast<std::size_t>(
      std::max_element(cmax.begin(), cmax.end()) - cmax.begin());
  std::vector<std::size_t> order;
  order.reserve(blocks);
  order.push_back(lead);
  for (std::size_t b = 0; b < blocks; ++b) {
    if (b != lead) order.push_back(b);
  }
  using NoPromotion =
      boost::math::policies::policy<boost::math::policies::promote_double<false>>;
  const boost::math::normal_distribution<double, NoPromotion> normal;
  auto upper_tail = [&](double z) {
    const double q = boost::math::cdf(boost::math::complement(normal, z));
    return two_sided ? 2.0 * q : q;
  };
  auto expansions = make_stream(seed, StreamDomain::kResidualNoise, index, 1);
  boost::random::normal_distribution<double> gauss(0.0, 1.0);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t b : order) {
    const std::size_t m = std::min(kNoiseBlock, v - b * kNoiseBlock);
    const double md = static_cast<double>(m);
    if (best > -std::numeric_limits<double>::infinity()) {
      const double z = (best - cmax[b]) / sigma;
      if (!(two_sided && z <= 0.0)) {
        // log F_m(z) = m log(1 - tail(z))
        const double log_f = md * std::log1p(-std::min(1.0, upper_tail(z)));
        if (log_u[b] <= log_f) continue;
      }
    }
    double tail = -std::expm1(log_u[b] / md);
    if (two_sided) tail *= 0.5;
    const double top = boost::math::quantile(boost::math::complement(normal, tail));
    const std::span<const double> values = block_values(b);
    boost::random::uniform_int_distribution<std::size_t> pick(0, m - 1);
    const std::size_t at = pick(expansions);
    for (std::size_t j = 0; j < m; ++j) {
      double z = top;
      if (j != at) {
        do {
          z = gauss(expansions);
        } while (two_sided ? std::abs(z) >= top : z >= top);
      } else if (two_sided && (expansions() & 1u)) {
        z = -top;
      }
      best = std::max(best, magnitude(values[j] + sigma * z));
    }
  }
  return best;
}

}  // namespace

double sample_noisy_max(std::span<const double> column, double sigma, bool two_sided,
                        std::uint64_t seed, std::uint64_t index) {
  const std::size_t v = column.size();
  if (v == 0) throw UsageError("cannot take the maximum of an empty column");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw UsageError("noise standard deviation must be finite and >= 0");
  }
  auto block = [&](std::size_t b) {
    const std::size_t lo = b * kNoiseBlock;
    return column.subspan(lo, std::min(kNoiseBlock, v - lo));
  };
  auto cmax = [&](std::size_t b) {
    double best = -std::numeric_limits<double>::infinity();
    for (double c : block(b)) best = std::max(best, two_sided ? std::abs(c) : c);
    return best;
  };
  return noisy_max(v, sigma, two_sided, seed, index, cmax, block);
}

RecoveryResult recover(const DataMatrix& x, const SubspaceModel& model,
                       const PermutationPlan& plan, const RunConfig& raw_config,
                       const std::vector<double>& training_maxima) {
  const auto start = Clock::now();
  const RunConfig cfg = raw_config.resolved(x.voxels(), x.subjects());
  const std::size_t v = x.voxels();
  const std::size_t L = plan.count();
  const std::size_t ell = model.ell();
  if (training_maxima.size() != ell) {
    throw UsageError(fmt::format("expected {} training maxima, got {}", ell,
                                 training_maxima.size()));
  }
  if (ell > L) throw UsageError("training columns exceed the permutation count");
  if (model.basis().voxels() != v) throw UsageError("model basis does not match the data");
  RunConfig rate;
  rate.eta = model.eta();
  const std::size_t k = rate.samples_per_column(v);
  if (k < model.basis().rank()) {
    throw UsageError("ceil(eta*v) is below the model rank; the fit is underdetermined");
  }
  const unsigned threads = resolve_threads(cfg.threads);
  const RowMatrix u_rows = model.basis().matrix();

  std::vector<double> maxima(L);
  std::copy(training_maxima.begin(), training_maxima.end(), maxima.begin());
  std::vector<std::size_t> resamples(L - ell, 0);
  // Columns are completed in fixed blocks so U is streamed once per block
  // (one GEMM) instead of once per column. Block boundaries do not depend on
  // the thread count.
  const std::size_t blocks = (L - ell + kRecoveryBlock - 1) / kRecoveryBlock;
  const auto r = static_cast<Eigen::Index>(model.basis().rank());
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t first = ell + b * kRecoveryBlock;
    const std::size_t width = std::min(kRecoveryBlock, L - first);
    Eigen::MatrixXd w(r, static_cast<Eigen::Index>(width));
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t i = first + c;
      auto [omega, fit] = draw_fit(model.basis(), k, plan.master_seed(),
                                   StreamDomain::kRecoverySample, i, 0, resamples[i - ell],
                                   &u_rows);
      const auto stats = tstat_subset(permute_columns(x, plan, i), omega);
      w.col(static_cast<Eigen::Index>(c)) = fit.solve(stats);
    }
    // Completed values are reduced to per-noise-block maxima panel by panel
    // (U streamed once per column block); a block's values are recomputed
    // only if the sampler needs them.
    const std::size_t noise_blocks = (v + kNoiseBlock - 1) / kNoiseBlock;
    Eigen::MatrixXd cmax(static_cast<Eigen::Index>(noise_blocks), static_cast<Eigen::Index>(width));
    Eigen::MatrixXd panel;
    for (std::size_t lo = 0; lo < v; lo += kPanelRows) {
      const std::size_t rows = std::min(kPanelRows, v - lo);
      panel.noalias() = u_rows.middleRows(static_cast<Eigen::Index>(lo),
                                          static_cast<Eigen::Index>(rows)) * w;
      for (std::size_t off = 0; off < rows; off += kNoiseBlock) {
        const auto m = static_cast<Eigen::Index>(std::min(kNoiseBlock, rows - off));
        const auto nb = static_cast<Eigen::Index>((lo + off) / kNoiseBlock);
        const auto slice = panel.middleRows(static_cast<Eigen::Index>(off), m);
        if (model.two_sided()) {
          cmax.row(nb) = slice.cwiseAbs().colwise().maxCoeff();
        } else {
          cmax.row(nb) = slice.colwise().maxCoeff();
        }
      }
    }
    Vector values;
    for (std::size_t c = 0; c < width; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      auto block_values = [&](std::size_t nb) {
        const auto lo = static_cast<Eigen::Index>(nb * kNoiseBlock);
        const auto m = static_cast<Eigen::Index>(std::min(kNoiseBlock, v - nb * kNoiseBlock));
        values.noalias() = u_rows.middleRows(lo, m) * w.col(ci);
        return std::span<const double>(values.data(), static_cast<std::size_t>(m));
      };
      auto block_cmax = [&](std::size_t nb) { return cmax(static_cast<Eigen::Index>(nb), ci); };
      maxima[first + c] = noisy_max(v, model.sigma(), model.two_sided(), plan.master_seed(),
                                    first + c, block_cmax, block_values) +
                          model.mu();
    }
  });

  RecoveryResult result{MaxNull(std::move(maxima)),
                        static_cast<std::uint64_t>(k) * (L - ell), 0, 0.0};
  for (auto r : resamples) result.resamples += r;
  result.seconds = seconds_since(start);
  return result;
}

RapidResult run_rapid(const DataMatrix& x, const RunConfig& raw_config) {
  const auto start = Clock::now();
  const RunConfig cfg = raw_config.resolved(x.voxels(), x.subjects());
  auto trained = train(x, cfg);
  const PermutationPlan plan(cfg.seed, cfg.permutations, x.subjects());
  auto recovered = recover(x, trained.model, plan, cfg, trained.maxima);

  RapidCounters counters;
  counters.full_evaluations = trained.evaluations;
  counters.sampled_evaluations = recovered.evaluations;
  counters.resamples = trained.diagnostics.resamples + recovered.resamples;
  counters.train_seconds = trained.seconds;
  counters.recover_seconds = recovered.seconds;
  counters.total_seconds = seconds_since(start);
  return RapidResult{std::move(recovered.null), std::move(trained.model),
                     std::move(trained.observed), trained.diagnostics, counters};
}

}  // namespace rapidmaxnull
