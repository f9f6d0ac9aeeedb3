#include "rapidmaxnull/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/lrmc.hpp"
#include "rapidmaxnull/random.hpp"

namespace rapidmaxnull {

DataMatrix::DataMatrix(RowMatrix values, std::size_t n1)
    : values_(std::move(values)), n1_(n1) {
  if (values_.rows() < 1) throw DataError("data matrix must have at least one voxel");
  const auto n = static_cast<std::size_t>(values_.cols());
  if (n1_ < 2 || n < n1_ + 2) {
    throw DataError("group sizes must both be >= 2 (n=" + std::to_string(n) +
                    ", n1=" + std::to_string(n1_) + ")");
  }
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      if (!std::isfinite(values_(i, j))) {
        throw DataError("non-finite entry at row " + std::to_string(i) +
                        ", column " + std::to_string(j));
      }
    }
  }
}

PermutationPlan::PermutationPlan(std::uint64_t master_seed, std::size_t count,
                                 std::size_t subjects)
    : seed_(master_seed), count_(count), subjects_(subjects) {
  if (count_ < 1) throw UsageError("permutation count must be >= 1");
}

std::vector<std::size_t> PermutationPlan::permutation(std::size_t index) const {
  if (index >= count_) {
    throw UsageError("permutation index " + std::to_string(index) +
                     " out of range [0, " + std::to_string(count_) + ")");
  }
  if (index == 0) {
    std::vector<std::size_t> identity(subjects_);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    return identity;
  }
  auto rng = make_stream(seed_, StreamDomain::kShuffle, index);
  return shuffle_indices(subjects_, rng);
}

RelabeledView permute_columns(const DataMatrix& x, const PermutationPlan& plan,
                              std::size_t index) {
  if (plan.subjects() != x.subjects()) {
    throw UsageError("plan built for " + std::to_string(plan.subjects()) +
                     " subjects, data has " + std::to_string(x.subjects()));
  }
  return RelabeledView{x, plan.permutation(index)};
}

MaxNull::MaxNull(std::vector<double> maxima)
    : maxima_(std::move(maxima)), sorted_(maxima_) {
  std::sort(sorted_.begin(), sorted_.end());
}

RunConfig RunConfig::resolved(std::size_t voxels, std::size_t subjects) const {
  RunConfig out = *this;
  if (out.training_columns == 0) out.training_columns = subjects;
  if (out.rank == 0) out.rank = subjects;
  if (out.eta == 0.0) out.eta = std::min(1.0, 2.0 * eta_min(voxels, subjects));
  return out;
}

std::size_t RunConfig::samples_per_column(std::size_t voxels) const {
  const double raw = eta * static_cast<double>(voxels);
  const double nearest = std::round(raw);
  // Guard against eta*v landing a rounding error above an integer.
  const double k = std::abs(raw - nearest) <= 1e-9 * std::max(1.0, raw) ? nearest
                                                                         : std::ceil(raw);
  return std::min(voxels, static_cast<std::size_t>(k));
}

void RunConfig::validate(std::size_t voxels, std::size_t subjects) const {
  if (permutations < 1) throw UsageError("permutation count L must be >= 1");
  if (memory_cap_bytes == 0) throw UsageError("memory cap must be positive");
  if (engine == Engine::kNaive) return;
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw UsageError("sub-sampling rate eta must lie in (0, 1], got " + std::to_string(eta));
  }
  if (rank < 1 || rank > subjects) {
    throw UsageError("rank r must satisfy 1 <= r <= n (r=" + std::to_string(rank) +
                     ", n=" + std::to_string(subjects) + ")");
  }
  if (rank > voxels) throw UsageError("rank r exceeds voxel count");
  if (training_columns < 1 || training_columns > permutations) {
    throw UsageError("training columns ell must satisfy 1 <= ell <= L (ell=" +
                     std::to_string(training_columns) + ", L=" +
                     std::to_string(permutations) + ")");
  }
  if (training_columns < rank) {
    throw UsageError("training columns cannot identify rank (ell=" +
                     std::to_string(training_columns) + " < r=" +
                     std::to_string(rank) + ")");
  }
  if (samples_per_column(voxels) < rank) {
    throw UsageError("ceil(eta*v)=" + std::to_string(samples_per_column(voxels)) +
                     " is below the rank r=" + std::to_string(rank) +
                     "; the per-column least-squares fit is underdetermined");
  }
  if (training.max_passes < 1) throw UsageError("max training passes must be >= 1");
  if (!(training.tolerance >= 0.0)) throw UsageError("training tolerance must be >= 0");
  if (!(training.step_scale >= 0.0)) throw UsageError("step scale must be >= 0");
}

std::string to_string(Engine e) { return e == Engine::kNaive ? "naive" : "rapid"; }

Engine engine_from_string(const std::string& s) {
  if (s == "naive") return Engine::kNaive;
  if (s == "rapid") return Engine::kRapid;
  throw UsageError("unknown engine '" + s + "' (expected naive or rapid)");
}

std::string to_string(ShiftEstimator s) {
  return s == ShiftEstimator::kSupResidual ? "sup-residual" : "mean-gap";
}

ShiftEstimator shift_from_string(const std::string& s) {
  if (s == "sup-residual") return ShiftEstimator::kSupResidual;
  if (s == "mean-gap") return ShiftEstimator::kMeanGap;
  throw UsageError("unknown shift estimator '" + s + "' (expected sup-residual or mean-gap)");
}

}  // namespace rapidmaxnull
