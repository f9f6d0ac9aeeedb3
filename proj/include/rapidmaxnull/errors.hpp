#pragma once

#include <stdexcept>
#include <string>

namespace rapidmaxnull {

// Each category maps onto one CLI exit code.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Zero pooled variance with unequal group means at one voxel.
class DegenerateVoxelError : public NumericalError {
 public:
  DegenerateVoxelError(std::size_t voxel, const std::string& what)
      : NumericalError(what), voxel_(voxel) {}
  std::size_t voxel() const noexcept { return voxel_; }

 private:
  std::size_t voxel_;
};

/// The restricted basis U_Omega is too ill-conditioned for a stable fit; the
/// caller is expected to draw a fresh sample set and retry.
class IllConditionedSampleError : public NumericalError {
 public:
  IllConditionedSampleError(double condition, const std::string& what)
      : NumericalError(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

}  // namespace rapidmaxnull
