#include "rapidmaxnull/lrmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <fmt/format.h>

#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/random.hpp"

namespace rapidmaxnull {

Basis::Basis(Eigen::MatrixXd u) : u_(std::move(u)) {
  if (u_.cols() < 1) throw UsageError("basis rank must be >= 1");
  if (u_.cols() > u_.rows()) {
    throw UsageError(fmt::format("basis rank r={} exceeds voxel count v={}", u_.cols(), u_.rows()));
  }
  if (orthonormality_error() > kOrthonormalityTolerance) reorthonormalize();
}

double Basis::orthonormality_error() const {
  const Eigen::MatrixXd gram = u_.transpose() * u_;
  return (gram - Eigen::MatrixXd::Identity(u_.cols(), u_.cols())).cwiseAbs().maxCoeff();
}

void Basis::reorthonormalize() {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(u_);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(u_.rows(), u_.cols());
  // Keep column orientation: flip any column the QR sign convention negated.
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (q.col(j).dot(u_.col(j)) < 0.0) q.col(j) = -q.col(j);
  }
  u_ = std::move(q);
  updates_since_check_ = 0;
}

void ObservedColumn::validate(std::size_t voxels) const {
  if (indices.size() != values.size()) {
    throw UsageError(fmt::format("observed column has {} indices but {} values", indices.size(),
                                 values.size()));
  }
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= voxels) {
      throw UsageError(fmt::format("observed index {} out of range (v={})", indices[j], voxels));
    }
    if (j > 0 && indices[j] <= indices[j - 1]) {
      throw UsageError("observed indices must be strictly increasing");
    }
  }
}

Basis init_basis(std::size_t voxels, std::size_t rank, std::uint64_t seed) {
  if (rank < 1 || rank > voxels) {
    throw UsageError(fmt::format("cannot build a rank-{} basis in {} dimensions", rank, voxels));
  }
  auto rng = make_stream(seed, StreamDomain::kBasisInit, 0);
  const auto v = static_cast<Eigen::Index>(voxels);
  const auto r = static_cast<Eigen::Index>(rank);
  Eigen::MatrixXd g(v, r);
  fill_normal(std::span<double>(g.data(), static_cast<std::size_t>(g.size())), 1.0, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return Basis(qr.householderQ() * Eigen::MatrixXd::Identity(v, r));
}

namespace {

Eigen::MatrixXd restrict_rows(const Eigen::MatrixXd& u, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), u.cols());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) = u.row(static_cast<Eigen::Index>(rows[j]));
  }
  return out;
}

}  // namespace

RestrictedFit::RestrictedFit(const Basis& basis, std::span<const std::size_t> indices,
                             const RowMatrix* row_major)
    : basis_(&basis), full_(indices.size() == basis.voxels()) {
  const std::size_t r = basis.rank();
  if (indices.size() < r) {
    throw UsageError(
        fmt::format("{} observed entries cannot determine {} coefficients", indices.size(), r));
  }
  if (full_) return;
  if (row_major != nullptr) {
    if (row_major->rows() != basis.matrix().rows() || row_major->cols() != basis.matrix().cols()) {
      throw UsageError("row-major basis copy does not match the basis shape");
    }
    restricted_.resize(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(r));
    const auto cols = row_major->cols();
    for (std::size_t j = 0; j < indices.size(); ++j) {
      if (j + 4 < indices.size()) {
        const double* next = row_major->row(static_cast<Eigen::Index>(indices[j + 4])).data();
        for (Eigen::Index b = 0; b < cols; b += 8) __builtin_prefetch(next + b);
      }
      restricted_.row(static_cast<Eigen::Index>(j)) =
          row_major->row(static_cast<Eigen::Index>(indices[j]));
    }
  } else {
    restricted_ = restrict_rows(basis.matrix(), indices);
  }
  const Eigen::MatrixXd gram = restricted_.transpose() * restricted_;
  ldlt_.compute(gram);
  // The pivoted LDL^T diagonal ratio estimates cond(G) = cond(U_Omega)^2 the
  // same way the R diagonal does for the QR path.
  const auto d = ldlt_.vectorD().cwiseAbs();
  const double lo = ldlt_.vectorD().minCoeff();
  const double hi = d.maxCoeff();
  if (ldlt_.info() == Eigen::Success && lo > 0.0 && hi <= kNormalEquationLimit * lo) {
    condition_ = std::sqrt(hi / lo);
    return;
  }
  use_qr_ = true;
  qr_.compute(restricted_);
  const double top = std::abs(qr_.matrixQR()(0, 0));
  const double bottom = std::abs(qr_.matrixQR()(static_cast<Eigen::Index>(r) - 1,
                                                static_cast<Eigen::Index>(r) - 1));
  condition_ = bottom > 0.0 ? top / bottom : std::numeric_limits<double>::infinity();
  if (!(condition_ <= kMaxCondition)) {
    throw IllConditionedSampleError(
        condition_, fmt::format("restricted basis is ill-conditioned (cond ~ {:.3g}); "
                                "resample the observed voxel set",
                                condition_));
  }
}

Vector RestrictedFit::solve(std::span<const double> values) const {
  const Eigen::Map<const Vector> y(values.data(), static_cast<Eigen::Index>(values.size()));
  if (full_) return basis_->matrix().transpose() * y;
  if (use_qr_) return qr_.solve(y);
  return ldlt_.solve(restricted_.transpose() * y);
}

Vector fit_coefficients(const Basis& basis, const ObservedColumn& column) {
  column.validate(basis.voxels());
  return RestrictedFit(basis, column.indices).solve(column.values);
}

TrackStep track_update(Basis& basis, const ObservedColumn& column, double step) {
  return track_update(basis, column, step, fit_coefficients(basis, column));
}

TrackStep track_update(Basis& basis, const ObservedColumn& column, double step, const Vector& w) {
  column.validate(basis.voxels());
  if (static_cast<std::size_t>(w.size()) != basis.rank()) {
    throw UsageError("coefficient vector does not match the basis rank");
  }
  const auto& u = basis.u_;
  const std::size_t k = column.indices.size();

  TrackStep out;
  Vector residual = Vector::Zero(u.rows());
  double y_norm2 = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const auto row = static_cast<Eigen::Index>(column.indices[j]);
    residual(row) = column.values[j] - u.row(row).dot(w);
    y_norm2 += column.values[j] * column.values[j];
  }
  const double r_norm = residual.norm();
  out.residual_norm = r_norm;
  out.relative_residual = y_norm2 > 0.0 ? r_norm / std::sqrt(y_norm2) : 0.0;

  const double w_norm = w.norm();
  if (step == 0.0 || r_norm == 0.0 || w_norm == 0.0) return out;

  const Vector p = u * w;
  const double p_norm = p.norm();
  const double theta = step * std::atan(r_norm / p_norm);
  out.angle = theta;
  // U <- U + [(cos t - 1) p/|p| + sin t r/|r|] (w/|w|)^T keeps U orthonormal
  // because r is orthogonal to range(U).
  const Vector direction =
      ((std::cos(theta) - 1.0) / p_norm) * p + (std::sin(theta) / r_norm) * residual;
  basis.u_.noalias() += direction * (w / w_norm).transpose();

  if (++basis.updates_since_check_ >= Basis::kDriftCheckInterval) {
    basis.updates_since_check_ = 0;
    if (basis.orthonormality_error() > Basis::kOrthonormalityTolerance / 16) {
      basis.reorthonormalize();
    }
  }
  return out;
}

Vector complete_column(const Basis& basis, const Vector& w) {
  if (static_cast<std::size_t>(w.size()) != basis.rank()) {
    throw UsageError(fmt::format("coefficient vector has length {}, basis rank is {}", w.size(),
                                 basis.rank()));
  }
  return basis.matrix() * w;
}

std::vector<double> spectrum(const RowMatrix& t, std::size_t count) {
  const auto limit = static_cast<std::size_t>(std::min(t.rows(), t.cols()));
  if (count < 1 || count > limit) {
    throw UsageError(fmt::format("spectrum count {} must lie in [1, min(v, L)={}]", count, limit));
  }
  const Eigen::MatrixXd dense = t;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense);
  const auto& values = svd.singularValues();
  return {values.data(), values.data() + count};
}

double eta_min(std::size_t voxels, std::size_t subjects) {
  if (voxels < 2) throw UsageError("eta_min needs v > 1");
  const double raw = static_cast<double>(subjects) * std::log(static_cast<double>(voxels)) /
                     static_cast<double>(voxels);
  return std::min(1.0, raw);
}

}  // namespace rapidmaxnull
