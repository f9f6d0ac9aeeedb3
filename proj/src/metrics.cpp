#include "rapidmaxnull/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/teststat.hpp"

namespace rapidmaxnull {
namespace {

std::vector<double> binned(const std::vector<double>& values, double lo, double width,
                           std::size_t bins) {
  std::vector<double> counts(bins, 0.0);
  for (double x : values) {
    auto j = width > 0.0 ? static_cast<std::size_t>(std::floor((x - lo) / width)) : 0;
    counts[std::min(j, bins - 1)] += 1.0;
  }
  return counts;
}

void smooth(std::vector<double>& counts, double total, double epsilon) {
  double sum = 0.0;
  for (double& c : counts) {
    c = c / total + epsilon;
    sum += c;
  }
  for (double& c : counts) c /= sum;
}

}  // namespace

double kl_epsilon(const MaxNull& a, const MaxNull& b, const KlOptions& options) {
  if (options.epsilon) return *options.epsilon;
  return 1.0 / (10.0 * static_cast<double>(std::max(a.size(), b.size())));
}

HistogramPair histogram_pair(const MaxNull& a, const MaxNull& b, const KlOptions& options) {
  if (options.bins < 2) throw UsageError("KL divergence needs at least 2 bins");
  if (a.size() == 0 || b.size() == 0) throw UsageError("KL divergence of an empty max null");
  const double epsilon = kl_epsilon(a, b, options);
  if (!(epsilon >= 0.0)) throw UsageError("smoothing epsilon must be >= 0");
  const double lo = std::min(a.sorted().front(), b.sorted().front());
  const double hi = std::max(a.sorted().back(), b.sorted().back());
  const double width = (hi - lo) / static_cast<double>(options.bins);

  HistogramPair h;
  h.edges.resize(options.bins + 1);
  for (std::size_t j = 0; j <= options.bins; ++j) h.edges[j] = lo + width * static_cast<double>(j);
  h.edges.back() = hi;
  h.p = binned(a.maxima(), lo, width, options.bins);
  h.q = binned(b.maxima(), lo, width, options.bins);
  smooth(h.p, static_cast<double>(a.size()), epsilon);
  smooth(h.q, static_cast<double>(b.size()), epsilon);
  return h;
}

double kl_divergence(const HistogramPair& h) {
  if (h.p.size() != h.q.size()) throw UsageError("histograms have different bin counts");
  double kl = 0.0;
  for (std::size_t j = 0; j < h.p.size(); ++j) {
    if (h.p[j] <= 0.0) continue;
    if (h.q[j] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += h.p[j] * std::log(h.p[j] / h.q[j]);
  }
  return std::max(kl, 0.0);
}

double kl_divergence(const MaxNull& a, const MaxNull& b, const KlOptions& options) {
  return kl_divergence(histogram_pair(a, b, options));
}

std::vector<ThresholdRow> threshold_table(const MaxNull& a, const MaxNull& b,
                                          std::span<const double> alphas) {
  std::vector<ThresholdRow> rows;
  rows.reserve(alphas.size());
  for (double alpha : alphas) {
    ThresholdRow row{alpha, threshold_at(a, alpha), threshold_at(b, alpha), std::nullopt};
    if (row.tau_b != 0.0) {
      row.percent_difference = 100.0 * std::abs(row.tau_a - row.tau_b) / std::abs(row.tau_b);
    }
    rows.push_back(row);
  }
  return rows;
}

ResamplingRisk resampling_risk(std::size_t rejected_a, std::size_t rejected_b,
                               std::size_t common) {
  if (common > std::min(rejected_a, rejected_b)) {
    throw UsageError(fmt::format("common count {} exceeds a set size ({}, {})", common,
                                 rejected_a, rejected_b));
  }
  ResamplingRisk out{rejected_a, rejected_b, common, std::nullopt};
  if (rejected_a == 0 || rejected_b == 0) return out;
  const auto va = static_cast<double>(rejected_a);
  const auto vb = static_cast<double>(rejected_b);
  const auto vc = static_cast<double>(common);
  out.risk = ((va - vc) / va + (vb - vc) / vb) / 2.0;
  return out;
}

ResamplingRisk resampling_risk(std::span<const std::size_t> rejected_a,
                               std::span<const std::size_t> rejected_b) {
  std::vector<std::size_t> a(rejected_a.begin(), rejected_a.end());
  std::vector<std::size_t> b(rejected_b.begin(), rejected_b.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::vector<std::size_t> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return resampling_risk(a.size(), b.size(), both.size());
}

}  // namespace rapidmaxnull
