#pragma once

#include <cstdint>
#include <optional>

#include "rapidmaxnull/types.hpp"

namespace rapidmaxnull {

/// The full v x L permutation-statistic matrix; column i is the statistic
/// map under permutation i of `plan`.
struct StatMatrix {
  RowMatrix values;
  PermutationPlan plan;
};

struct NaiveOptions {
  bool materialize = false;
  bool two_sided = false;
  unsigned threads = 1;
  std::size_t memory_cap_bytes = std::size_t{4} << 30;
};

struct NaiveResult {
  MaxNull null;
  std::vector<double> observed;  // statistic map of the identity labeling
  std::optional<StatMatrix> stats;
  std::uint64_t evaluations = 0;  // always v * L
  double seconds = 0.0;
};

/// Exhaustive Monte-Carlo permutation test: every statistic of every
/// permutation in `plan`. Columns are streamed unless `materialize` is set.
NaiveResult run_naive(const DataMatrix& x, const PermutationPlan& plan,
                      const NaiveOptions& options = {});

}  // namespace rapidmaxnull
