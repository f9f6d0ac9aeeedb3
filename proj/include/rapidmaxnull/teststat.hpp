#pragma once

#include <span>
#include <vector>

#include "rapidmaxnull/types.hpp"

namespace rapidmaxnull {

/// All v voxel statistics for one labeling.
struct StatColumn {
  std::vector<double> values;
  std::size_t permutation_index = 0;
};

/// Welch two-sample t per voxel: (m1 - m2) / sqrt(s1^2/n1 + s2^2/n2), with
/// unbiased variances. Means and squared deviations use pairwise summation.
///
/// A voxel with zero variance in both groups yields 0 when the means agree
/// and throws DegenerateVoxelError otherwise.
StatColumn tstat_full(const RelabeledView& view);

/// Convenience overload on explicit group blocks (same row count).
StatColumn tstat_full(const RowMatrix& group1, const RowMatrix& group2);

/// The statistics at `voxels` only, bit-identical to the matching entries of
/// tstat_full. Indices must be distinct and < v.
std::vector<double> tstat_subset(const RelabeledView& view,
                                 std::span<const std::size_t> voxels);

/// Single-voxel kernel shared by the full and subset paths. `scratch` must
/// hold at least n doubles.
double voxel_tstat(std::span<const double> row,
                   std::span<const std::size_t> group1,
                   std::span<const std::size_t> group2, std::size_t voxel,
                   std::span<double> scratch);

/// max_v t (one-sided) or max_v |t| (two-sided).
double column_max(std::span<const double> stats, bool two_sided);

/// Fraction of null maxima >= observed, floored at 1/L. The observed labeling
/// is counted among the L draws, so no +1 correction is applied.
double pvalue(const MaxNull& null, double observed);

/// Smallest null maximum tau with pvalue(null, tau) <= alpha. Throws
/// UsageError when alpha < 1/L. If every maximum is tied at the top, the tied
/// value is returned.
double threshold_at(const MaxNull& null, double alpha);

/// Sorted indices of voxels whose statistic (or |statistic| when two-sided)
/// is >= tau.
std::vector<std::size_t> reject_set(std::span<const double> stat_map, double tau,
                                    bool two_sided = false);

}  // namespace rapidmaxnull
