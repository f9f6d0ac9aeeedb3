#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "rapidmaxnull/random.hpp"
#include "rapidmaxnull/types.hpp"

namespace test {

inline rapidmaxnull::RowMatrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                        double sigma = 1.0) {
  rapidmaxnull::RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  auto rng = rapidmaxnull::make_stream(seed, rapidmaxnull::StreamDomain::kSimulation, 999);
  rapidmaxnull::fill_normal(std::span<double>(m.data(), rows * cols), sigma, rng);
  return m;
}

inline rapidmaxnull::DataMatrix random_data(std::size_t v, std::size_t n1, std::size_t n2,
                                            std::uint64_t seed) {
  return rapidmaxnull::DataMatrix(gaussian(v, n1 + n2, seed), n1);
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("rapidmaxnull_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
