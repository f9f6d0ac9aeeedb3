#include "rapidmaxnull/teststat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rapidmaxnull/errors.hpp"

namespace rapidmaxnull {
namespace {

constexpr std::size_t kPairwiseBlock = 8;

double pairwise_sum(const double* p, std::size_t n) {
  if (n <= kPairwiseBlock) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(p, half) + pairwise_sum(p + half, n - half);
}

struct Moments {
  double mean;
  double variance;  // unbiased
};

Moments group_moments(std::span<const double> row, std::span<const std::size_t> cols,
                      double* buf) {
  const std::size_t m = cols.size();
  for (std::size_t j = 0; j < m; ++j) buf[j] = row[cols[j]];
  const double mean = pairwise_sum(buf, m) / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double d = buf[j] - mean;
    buf[j] = d * d;
  }
  return {mean, pairwise_sum(buf, m) / static_cast<double>(m - 1)};
}

void check_view(const RelabeledView& view) {
  if (view.order.size() != view.data.subjects()) {
    throw UsageError("labeling has " + std::to_string(view.order.size()) +
                     " entries, data has " + std::to_string(view.data.subjects()) +
                     " subjects");
  }
}

}  // namespace

double voxel_tstat(std::span<const double> row, std::span<const std::size_t> group1,
                   std::span<const std::size_t> group2, std::size_t voxel,
                   std::span<double> scratch) {
  const auto g1 = group_moments(row, group1, scratch.data());
  const auto g2 = group_moments(row, group2, scratch.data());
  const double diff = g1.mean - g2.mean;
  const double se2 = g1.variance / static_cast<double>(group1.size()) +
                     g2.variance / static_cast<double>(group2.size());
  if (se2 > 0.0) return diff / std::sqrt(se2);
  // Zero variance in both groups: the means are exact multiples of one
  // constant each, so equality up to rounding of the division is "equal".
  const double scale = std::max(std::abs(g1.mean), std::abs(g2.mean));
  if (std::abs(diff) <= 8.0 * std::numeric_limits<double>::epsilon() * scale) return 0.0;
  throw DegenerateVoxelError(voxel, "voxel " + std::to_string(voxel) +
                                        " has zero variance in both groups but unequal "
                                        "means; the t statistic is infinite");
}

StatColumn tstat_full(const RelabeledView& view) {
  check_view(view);
  const std::size_t v = view.data.voxels();
  StatColumn out;
  out.values.resize(v);
  std::vector<double> scratch(view.data.subjects());
  const auto g1 = view.group1();
  const auto g2 = view.group2();
  for (std::size_t i = 0; i < v; ++i) {
    out.values[i] = voxel_tstat(view.data.row(i), g1, g2, i, scratch);
  }
  return out;
}

StatColumn tstat_full(const RowMatrix& group1, const RowMatrix& group2) {
  if (group1.rows() != group2.rows()) {
    throw UsageError("group blocks must have the same voxel count");
  }
  RowMatrix stacked(group1.rows(), group1.cols() + group2.cols());
  stacked << group1, group2;
  const DataMatrix x(std::move(stacked), static_cast<std::size_t>(group1.cols()));
  const PermutationPlan identity(0, 1, x.subjects());
  return tstat_full(permute_columns(x, identity, 0));
}

std::vector<double> tstat_subset(const RelabeledView& view,
                                 std::span<const std::size_t> voxels) {
  check_view(view);
  const std::size_t v = view.data.voxels();
  if (!std::is_sorted(voxels.begin(), voxels.end(), std::less_equal<>())) {
    std::vector<std::size_t> sorted(voxels.begin(), voxels.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw UsageError("duplicate voxel index in subset");
    }
    if (!sorted.empty() && sorted.back() >= v) {
      throw UsageError("voxel index " + std::to_string(sorted.back()) + " out of range");
    }
  } else if (!voxels.empty() && voxels.back() >= v) {
    throw UsageError("voxel index " + std::to_string(voxels.back()) + " out of range");
  }
  std::vector<double> out(voxels.size());
  std::vector<double> scratch(view.data.subjects());
  const auto g1 = view.group1();
  const auto g2 = view.group2();
  constexpr std::size_t kAhead = 4;
  const std::size_t n = view.data.subjects();
  for (std::size_t j = 0; j < voxels.size(); ++j) {
    if (j + kAhead < voxels.size()) {
      // Scattered rows: request the row a few iterations ahead.
      const double* next = view.data.row(voxels[j + kAhead]).data();
      for (std::size_t b = 0; b < n; b += 8) __builtin_prefetch(next + b);
    }
    out[j] = voxel_tstat(view.data.row(voxels[j]), g1, g2, voxels[j], scratch);
  }
  return out;
}

double column_max(std::span<const double> stats, bool two_sided) {
  double best = -std::numeric_limits<double>::infinity();
  if (two_sided) {
    for (double t : stats) best = std::max(best, std::abs(t));
  } else {
    for (double t : stats) best = std::max(best, t);
  }
  return best;
}

double pvalue(const MaxNull& null, double observed) {
  const auto& s = null.sorted();
  if (s.empty()) throw UsageError("max null is empty");
  const auto first = std::lower_bound(s.begin(), s.end(), observed);
  const auto count = static_cast<std::size_t>(s.end() - first);
  return static_cast<double>(std::max<std::size_t>(count, 1)) / static_cast<double>(s.size());
}

double threshold_at(const MaxNull& null, double alpha) {
  const auto& s = null.sorted();
  if (s.empty()) throw UsageError("max null is empty");
  const auto L = static_cast<double>(s.size());
  if (!(alpha < 1.0) || alpha * L < 1.0 - 1e-9) {
    throw UsageError("alpha=" + std::to_string(alpha) +
                     " is outside [1/L, 1): resolution exceeded, increase L (L=" +
                     std::to_string(s.size()) + ")");
  }
  // At most `allowed` maxima may be >= tau.
  const auto allowed = static_cast<std::size_t>(std::floor(alpha * L + 1e-9));
  const std::size_t start = s.size() - allowed;
  // s[start] is admissible unless it ties with s[start - 1].
  auto it = s.begin() + static_cast<std::ptrdiff_t>(start);
  if (start > 0) it = std::upper_bound(s.begin(), s.end(), s[start - 1]);
  return it == s.end() ? s.back() : *it;
}

std::vector<std::size_t> reject_set(std::span<const double> stat_map, double tau,
                                    bool two_sided) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < stat_map.size(); ++i) {
    const double t = two_sided ? std::abs(stat_map[i]) : stat_map[i];
    if (t >= tau) out.push_back(i);
  }
  return out;
}

}  // namespace rapidmaxnull
