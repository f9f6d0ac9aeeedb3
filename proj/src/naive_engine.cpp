#include "rapidmaxnull/naive_engine.hpp"

#include <chrono>

#include <fmt/format.h>

#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/parallel.hpp"
#include "rapidmaxnull/teststat.hpp"

namespace rapidmaxnull {

NaiveResult run_naive(const DataMatrix& x, const PermutationPlan& plan,
                      const NaiveOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t v = x.voxels();
  const std::size_t L = plan.count();
  if (plan.subjects() != x.subjects()) {
    throw UsageError("permutation plan does not match the data's subject count");
  }

  std::optional<StatMatrix> stats;
  if (options.materialize) {
    const double required = static_cast<double>(v) * static_cast<double>(L) * sizeof(double);
    if (required > static_cast<double>(options.memory_cap_bytes)) {
      throw UsageError(fmt::format(
          "materializing T needs {:.0f} bytes ({}x{} doubles), above the cap of {} bytes",
          required, v, L, options.memory_cap_bytes));
    }
    stats.emplace(StatMatrix{RowMatrix::Zero(static_cast<Eigen::Index>(v),
                                             static_cast<Eigen::Index>(L)),
                             plan});
  }

  std::vector<double> maxima(L);
  std::vector<double> observed;
  parallel_for(L, options.threads, [&](std::size_t i) {
    auto column = tstat_full(permute_columns(x, plan, i));
    maxima[i] = column_max(column.values, options.two_sided);
    if (stats) {
      for (std::size_t r = 0; r < v; ++r) {
        stats->values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) =
            column.values[r];
      }
    }
    if (i == 0) observed = std::move(column.values);
  });

  NaiveResult result{MaxNull(std::move(maxima)), std::move(observed), std::move(stats),
                     static_cast<std::uint64_t>(v) * L, 0.0};
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace rapidmaxnull
