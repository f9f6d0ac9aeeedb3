#pragma once

// Low-rank column completion: a Grassmannian incremental-gradient tracker
// (GROUSE-style) that learns an orthonormal basis from sub-sampled columns,
// per-column least-squares fits on that basis, and spectrum diagnostics.

#include <cstdint>
#include <span>
#include <vector>

#include "rapidmaxnull/types.hpp"

namespace rapidmaxnull {

/// The observed slice of one column: sorted distinct voxel indices and the
/// statistics at those voxels.
struct ObservedColumn {
  std::vector<std::size_t> indices;
  std::vector<double> values;

  /// Throws UsageError unless indices are strictly increasing, < voxels, and
  /// match values in length.
  void validate(std::size_t voxels) const;
};

struct TrackStep {
  double residual_norm = 0.0;           // ||y_Omega - U_Omega w|| before the update
  double relative_residual = 0.0;       // residual_norm / ||y_Omega||
  double angle = 0.0;                   // rotation applied
};

/// Orthonormal v x r basis. ||U^T U - I||_max is kept below
/// kOrthonormalityTolerance by re-orthonormalizing when drift is detected.
class Basis {
 public:
  static constexpr double kOrthonormalityTolerance = 1e-8;
  static constexpr std::size_t kDriftCheckInterval = 64;

  /// Takes ownership and re-orthonormalizes if needed. Throws UsageError for
  /// r > v or r == 0.
  explicit Basis(Eigen::MatrixXd u);

  std::size_t voxels() const noexcept { return static_cast<std::size_t>(u_.rows()); }
  std::size_t rank() const noexcept { return static_cast<std::size_t>(u_.cols()); }
  const Eigen::MatrixXd& matrix() const noexcept { return u_; }

  double orthonormality_error() const;

 private:
  friend TrackStep track_update(Basis&, const ObservedColumn&, double, const Vector&);
  void reorthonormalize();

  Eigen::MatrixXd u_;
  std::size_t updates_since_check_ = 0;
};

/// Random orthonormal v x r basis: thin QR of a seeded Gaussian matrix.
Basis init_basis(std::size_t voxels, std::size_t rank, std::uint64_t seed);

/// Restricted-basis condition number above which a fit is refused.
inline constexpr double kMaxCondition = 1e12;

/// Gram-matrix condition above which the fit switches from the Cholesky
/// normal-equation path to column-pivoted QR (cond(U_Omega) > 1e4).
inline constexpr double kNormalEquationLimit = 1e8;

/// A least-squares solver for one observed voxel set, factorized once. The
/// conditioning guard runs at construction so callers can redraw Omega
/// before computing any statistics. Well-conditioned restrictions (the
/// common case) are solved through the r x r Gram matrix; the rest fall back
/// to column-pivoted QR of U_Omega.
class RestrictedFit {
 public:
  /// Throws IllConditionedSampleError when U_Omega is rank deficient or
  /// cond(U_Omega) > kMaxCondition, UsageError when |Omega| < r.
  /// `row_major`, when given, must hold the same matrix as `basis`; it only
  /// makes gathering the observed rows cache-friendly.
  RestrictedFit(const Basis& basis, std::span<const std::size_t> indices,
                const RowMatrix* row_major = nullptr);

  Vector solve(std::span<const double> values) const;
  double condition() const noexcept { return condition_; }

 private:
  const Basis* basis_;
  bool full_;
  bool use_qr_ = false;
  Eigen::MatrixXd restricted_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
  double condition_ = 1.0;
};

/// argmin_w ||U_Omega w - y_Omega|| (U^T y when every voxel is observed). Throws IllConditionedSampleError when
/// U_Omega is rank deficient or cond(U_Omega) > kMaxCondition.
Vector fit_coefficients(const Basis& basis, const ObservedColumn& column);

/// One incremental-gradient step on the Grassmannian. With p = U w and r the
/// zero-filled residual on Omega, rotates the basis in span{p, r} by
/// theta = step * atan(||r|| / ||p||). Mutates `basis` in place.
TrackStep track_update(Basis& basis, const ObservedColumn& column, double step);
/// Same, with the coefficients of `column` on `basis` already solved.
TrackStep track_update(Basis& basis, const ObservedColumn& column, double step, const Vector& w);

/// U w.
Vector complete_column(const Basis& basis, const Vector& w);

/// Leading `count` singular values of `t`, nonincreasing.
std::vector<double> spectrum(const RowMatrix& t, std::size_t count);

/// Lower bound on the sub-sampling rate, n ln(v) / v clamped to (0, 1].
/// The recommended working rate is twice this.
double eta_min(std::size_t voxels, std::size_t subjects);

}  // namespace rapidmaxnull
