#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rapidmaxnull/types.hpp"

namespace rapidmaxnull {

/// Two equal groups; group 1 is N(0,1) everywhere, group 2 is N(effect_mu, 1)
/// on ceil(sparsity * v) scattered signal voxels and N(0,1) elsewhere.
struct SimSpec {
  std::size_t n = 60;
  std::size_t v = 20000;
  double effect_mu = 1.0;
  double sparsity = 0.01;
  std::uint64_t seed = 0;
};

struct SimData {
  DataMatrix data;
  SimSpec spec;
  std::vector<std::size_t> signal;  // sorted voxel indices
  std::vector<std::string> warnings;
};

/// n = 30 (15/15), v = 20000, 200 signal voxels with effect 1.
SimData gen_sim1(std::uint64_t seed);

/// Throws UsageError for odd n, n < 4, v < 1, sparsity outside (0, 1], or a
/// non-finite effect. Values off the 3 x 4 x 4 reference grid are accepted
/// with a warning.
SimData gen_sim2(const SimSpec& spec);

/// The 48 reference datasets: n in {60, 150, 600}, effect in {1, 5, 10, 25},
/// sparsity in {1%, 5%, 10%, 25%}.
std::vector<SimSpec> sim2_grid(std::size_t voxels, std::uint64_t seed);

/// Sidecar manifest: the spec, group split, and signal voxel indices.
nlohmann::json manifest(const SimData& sim, const std::string& kind);

}  // namespace rapidmaxnull
