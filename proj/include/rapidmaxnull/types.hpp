#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rapidmaxnull {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// v x n subject matrix. Columns [0, n1) are group 1 and [n1, n) group 2
/// under the identity labeling.
class DataMatrix {
 public:
  DataMatrix(RowMatrix values, std::size_t n1);

  std::size_t voxels() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t subjects() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  std::size_t n1() const noexcept { return n1_; }
  std::size_t n2() const noexcept { return subjects() - n1_; }
  const RowMatrix& values() const noexcept { return values_; }

  std::span<const double> row(std::size_t voxel) const noexcept {
    return {values_.data() + voxel * subjects(), subjects()};
  }

 private:
  RowMatrix values_;
  std::size_t n1_;
};

/// A group relabeling of a DataMatrix. `order[0..n1)` are the columns of the
/// pseudo group 1, the rest pseudo group 2. Holds a reference; the data must
/// outlive the view.
struct RelabeledView {
  const DataMatrix& data;
  std::vector<std::size_t> order;

  std::span<const std::size_t> group1() const noexcept {
    return std::span(order).first(data.n1());
  }
  std::span<const std::size_t> group2() const noexcept {
    return std::span(order).subspan(data.n1());
  }
};

/// L labelings of n subjects. Index 0 is the identity (observed) labeling;
/// index i >= 1 is a Fisher-Yates shuffle drawn from its own derived stream.
/// Draws are independent, so repeats across indices are possible.
class PermutationPlan {
 public:
  PermutationPlan(std::uint64_t master_seed, std::size_t count,
                  std::size_t subjects);

  std::uint64_t master_seed() const noexcept { return seed_; }
  std::size_t count() const noexcept { return count_; }
  std::size_t subjects() const noexcept { return subjects_; }

  std::vector<std::size_t> permutation(std::size_t index) const;

 private:
  std::uint64_t seed_;
  std::size_t count_;
  std::size_t subjects_;
};

RelabeledView permute_columns(const DataMatrix& x, const PermutationPlan& plan,
                              std::size_t index);

/// Column maxima of the permutation-statistic matrix.
class MaxNull {
 public:
  explicit MaxNull(std::vector<double> maxima);

  std::size_t size() const noexcept { return maxima_.size(); }
  const std::vector<double>& maxima() const noexcept { return maxima_; }
  const std::vector<double>& sorted() const noexcept { return sorted_; }

 private:
  std::vector<double> maxima_;
  std::vector<double> sorted_;
};

enum class Engine { kNaive, kRapid };

/// How the recovered-max shift is estimated from the training columns.
enum class ShiftEstimator {
  kSupResidual,  // sup_i max_v (T_ex - U W_ex)
  kMeanGap,      // mean_i [max T_ex[:,i] - max(U W_ex[:,i] + s_i)]
};

struct TrainingOptions {
  std::size_t max_passes = 50;
  double tolerance = 1e-3;  // mean relative fit residual over a pass
  double step_scale = 1.0;
};

struct RunConfig {
  std::size_t permutations = 10000;  // L
  std::size_t training_columns = 0;  // ell; 0 means "use n"
  double eta = 0.0;                  // 0 means "use 2 * eta_min(v, n)"
  std::size_t rank = 0;              // 0 means "use n"
  std::uint64_t seed = 0;
  Engine engine = Engine::kRapid;
  bool two_sided = false;
  ShiftEstimator shift = ShiftEstimator::kSupResidual;
  TrainingOptions training;
  unsigned threads = 0;  // 0 means "resolve from environment"
  std::size_t memory_cap_bytes = std::size_t{4} << 30;

  /// Fills the 0-valued defaults from the data shape.
  RunConfig resolved(std::size_t voxels, std::size_t subjects) const;

  /// Throws UsageError naming the violated constraint.
  void validate(std::size_t voxels, std::size_t subjects) const;

  std::size_t samples_per_column(std::size_t voxels) const;
};

std::string to_string(Engine e);
Engine engine_from_string(const std::string& s);
std::string to_string(ShiftEstimator s);
ShiftEstimator shift_from_string(const std::string& s);

}  // namespace rapidmaxnull
