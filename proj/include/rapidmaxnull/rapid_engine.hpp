#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rapidmaxnull/lrmc.hpp"
#include "rapidmaxnull/types.hpp"

namespace rapidmaxnull {

/// Low-rank plus i.i.d. Gaussian residual model of the permutation-statistic
/// matrix: T ~ U W + S, S ~ N(0, sigma^2), with recovered column maxima
/// shifted by mu.
class SubspaceModel {
 public:
  SubspaceModel(Basis basis, double sigma, double mu, std::size_t ell, double eta,
                bool two_sided = false);

  const Basis& basis() const noexcept { return basis_; }
  double sigma() const noexcept { return sigma_; }
  double mu() const noexcept { return mu_; }
  std::size_t ell() const noexcept { return ell_; }
  double eta() const noexcept { return eta_; }
  bool two_sided() const noexcept { return two_sided_; }

 private:
  Basis basis_;
  double sigma_;
  double mu_;
  std::size_t ell_;
  double eta_;
  bool two_sided_;
};

struct TrainingDiagnostics {
  std::size_t passes = 0;
  double final_pass_residual = 0.0;  // mean relative Omega fit residual
  bool converged = false;
  std::size_t resamples = 0;  // Omega redraws forced by the conditioning guard
};

struct TrainingResult {
  SubspaceModel model;
  std::vector<double> maxima;      // actual maxima of the training columns
  Eigen::MatrixXd columns;         // T_ex, v x ell
  std::vector<double> observed;    // identity-labeling map (training column 0)
  TrainingDiagnostics diagnostics;
  std::uint64_t evaluations = 0;   // v * ell
  double seconds = 0.0;
};

/// Computes ell full statistic columns (plan indices 0..ell-1, index 0 being
/// the observed labeling), tracks a rank-r basis over sub-sampled passes until
/// the mean relative fit residual of a pass drops below the tolerance, then
/// estimates sigma on the sampled residuals and the max shift mu.
TrainingResult train(const DataMatrix& x, const RunConfig& config);

struct ColumnTrainingConfig {
  std::size_t rank = 1;
  double eta = 1.0;
  TrainingOptions training;
  std::uint64_t seed = 0;
  ShiftEstimator shift = ShiftEstimator::kSupResidual;
  bool two_sided = false;
};

/// The tracking/residual/shift half of train() on already computed full
/// columns (v x ell). Column 0 is reported as the observed map.
TrainingResult train_columns(Eigen::MatrixXd columns, const ColumnTrainingConfig& config);

struct RecoveryResult {
  MaxNull null;
  std::uint64_t evaluations = 0;  // ceil(eta v) * (L - ell)
  std::size_t resamples = 0;
  double seconds = 0.0;
};

/// Completes columns ell..L-1 from ceil(eta v) sampled statistics each and
/// assembles the estimated max null. `training_maxima` fills indices
/// 0..ell-1 unshifted.
RecoveryResult recover(const DataMatrix& x, const SubspaceModel& model,
                       const PermutationPlan& plan, const RunConfig& config,
                       const std::vector<double>& training_maxima);

/// Maximum number of Omega redraws per column before giving up.
inline constexpr std::size_t kMaxResamples = 5;
/// Recovery columns completed per basis product.
inline constexpr std::size_t kRecoveryBlock = 32;
/// Voxels per block in the noisy-maximum sampler.
inline constexpr std::size_t kNoiseBlock = 32;
/// Rows of U per completion product (a multiple of kNoiseBlock).
inline constexpr std::size_t kPanelRows = 1024;

/// Draws max_j (c_j + sigma z_j) (or max_j |c_j + sigma z_j|) with z i.i.d.
/// N(0, 1), using the streams of (seed, kResidualNoise, index).
///
/// Each block of kNoiseBlock voxels has the maximum of its own noise fixed by
/// one uniform (inverse CDF of the maximum of m normals); individual draws
/// are only generated, conditionally on that maximum, for blocks that can
/// still beat the running maximum. The result has exactly the distribution
/// of the dense draw.
double sample_noisy_max(std::span<const double> column, double sigma, bool two_sided,
                        std::uint64_t seed, std::uint64_t index);

struct RapidCounters {
  std::uint64_t full_evaluations = 0;     // training: v * ell
  std::uint64_t sampled_evaluations = 0;  // recovery: ceil(eta v) * (L - ell)
  std::size_t resamples = 0;
  double train_seconds = 0.0;
  double recover_seconds = 0.0;
  double total_seconds = 0.0;
};

struct RapidResult {
  MaxNull null;
  SubspaceModel model;
  std::vector<double> observed;
  TrainingDiagnostics diagnostics;
  RapidCounters counters;
};

RapidResult run_rapid(const DataMatrix& x, const RunConfig& config);

}  // namespace rapidmaxnull
