#pragma once

// Accuracy measures between two max nulls (normally the exhaustive engine as
// reference and the accelerated engine as candidate).

#include <optional>
#include <span>
#include <vector>

#include "rapidmaxnull/types.hpp"

namespace rapidmaxnull {

/// Two histograms on shared bin edges, each a probability vector.
struct HistogramPair {
  std::vector<double> edges;  // B + 1 ascending
  std::vector<double> p;
  std::vector<double> q;
};

struct KlOptions {
  std::size_t bins = 100;
  /// Additive smoothing per bin; defaults to 1 / (10 L), L the larger sample.
  std::optional<double> epsilon;
};

/// B equal-width bins spanning the pooled range of both samples, smoothed by
/// epsilon and renormalized.
HistogramPair histogram_pair(const MaxNull& a, const MaxNull& b, const KlOptions& options = {});

/// sum_j p_j ln(p_j / q_j). Bins with p_j == 0 contribute nothing; q_j == 0
/// with p_j > 0 yields +inf.
double kl_divergence(const HistogramPair& h);

/// KL(a || b) with the histogram construction above. Throws UsageError for
/// B < 2 or an empty null.
double kl_divergence(const MaxNull& a, const MaxNull& b, const KlOptions& options = {});

double kl_epsilon(const MaxNull& a, const MaxNull& b, const KlOptions& options);

struct ThresholdRow {
  double alpha = 0.0;
  double tau_a = 0.0;
  double tau_b = 0.0;
  std::optional<double> percent_difference;  // 100 |tau_a - tau_b| / |tau_b|
};

/// Per-alpha thresholds of both nulls; b is the reference.
std::vector<ThresholdRow> threshold_table(const MaxNull& a, const MaxNull& b,
                                          std::span<const double> alphas);

struct ResamplingRisk {
  std::size_t rejected_a = 0;
  std::size_t rejected_b = 0;
  std::size_t common = 0;
  std::optional<double> risk;  // empty when either procedure rejected nothing
};

/// Probability that the two procedures disagree on a voxel's decision,
/// ((v1 - vc) / v1 + (v2 - vc) / v2) / 2.
ResamplingRisk resampling_risk(std::span<const std::size_t> rejected_a,
                               std::span<const std::size_t> rejected_b);

/// Same, from the cardinalities alone.
ResamplingRisk resampling_risk(std::size_t rejected_a, std::size_t rejected_b,
                               std::size_t common);

}  // namespace rapidmaxnull
