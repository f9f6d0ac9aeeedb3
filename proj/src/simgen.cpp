#include "rapidmaxnull/simgen.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/random.hpp"

namespace rapidmaxnull {
namespace {

constexpr std::size_t kGridN[] = {60, 150, 600};
constexpr double kGridEffect[] = {1.0, 5.0, 10.0, 25.0};
constexpr double kGridSparsity[] = {0.01, 0.05, 0.10, 0.25};

void check_spec(const SimSpec& spec) {
  if (spec.n < 4 || spec.n % 2 != 0) {
    throw UsageError(fmt::format("simulation needs an even n >= 4 (equal groups), got {}", spec.n));
  }
  if (spec.v < 1) throw UsageError("simulation needs v >= 1");
  if (!(spec.sparsity > 0.0 && spec.sparsity <= 1.0)) {
    throw UsageError(fmt::format("sparsity must lie in (0, 1], got {}", spec.sparsity));
  }
  if (!std::isfinite(spec.effect_mu)) throw UsageError("effect must be finite");
}

std::size_t signal_count(const SimSpec& spec) {
  const double raw = spec.sparsity * static_cast<double>(spec.v);
  const double nearest = std::round(raw);
  const double k = std::abs(raw - nearest) <= 1e-9 * std::max(1.0, raw) ? nearest : std::ceil(raw);
  return std::min(spec.v, static_cast<std::size_t>(k));
}

SimData generate(const SimSpec& spec) {
  check_spec(spec);
  auto placement = make_stream(spec.seed, StreamDomain::kSimulation, 0);
  auto signal = sample_without_replacement(spec.v, signal_count(spec), placement);

  const std::size_t n1 = spec.n / 2;
  RowMatrix values(static_cast<Eigen::Index>(spec.v), static_cast<Eigen::Index>(spec.n));
  for (std::size_t i = 0; i < spec.v; ++i) {
    // One stream per voxel, so blocks can be generated independently.
    auto rng = make_stream(spec.seed, StreamDomain::kSimulation, 1 + i);
    fill_normal(std::span<double>(values.row(static_cast<Eigen::Index>(i)).data(), spec.n), 1.0,
                rng);
  }
  for (std::size_t i : signal) {
    values.row(static_cast<Eigen::Index>(i)).tail(static_cast<Eigen::Index>(spec.n - n1)).array() +=
        spec.effect_mu;
  }
  return SimData{DataMatrix(std::move(values), n1), spec, std::move(signal), {}};
}

}  // namespace

SimData gen_sim1(std::uint64_t seed) {
  return generate(SimSpec{.n = 30, .v = 20000, .effect_mu = 1.0, .sparsity = 0.01, .seed = seed});
}

SimData gen_sim2(const SimSpec& spec) {
  auto sim = generate(spec);
  if (std::find(std::begin(kGridN), std::end(kGridN), spec.n) == std::end(kGridN)) {
    sim.warnings.push_back(fmt::format("n={} is off the reference grid {{60,150,600}}", spec.n));
  }
  if (std::find(std::begin(kGridEffect), std::end(kGridEffect), spec.effect_mu) ==
      std::end(kGridEffect)) {
    sim.warnings.push_back(
        fmt::format("effect={} is off the reference grid {{1,5,10,25}}", spec.effect_mu));
  }
  if (std::find(std::begin(kGridSparsity), std::end(kGridSparsity), spec.sparsity) ==
      std::end(kGridSparsity)) {
    sim.warnings.push_back(
        fmt::format("sparsity={} is off the reference grid {{0.01,0.05,0.10,0.25}}", spec.sparsity));
  }
  return sim;
}

std::vector<SimSpec> sim2_grid(std::size_t voxels, std::uint64_t seed) {
  std::vector<SimSpec> grid;
  for (auto n : kGridN) {
    for (auto mu : kGridEffect) {
      for (auto s : kGridSparsity) {
        grid.push_back(SimSpec{n, voxels, mu, s, mix64(seed ^ grid.size())});
      }
    }
  }
  return grid;
}

nlohmann::json manifest(const SimData& sim, const std::string& kind) {
  return nlohmann::json{{"kind", kind},
                        {"n", sim.spec.n},
                        {"v", sim.spec.v},
                        {"n1", sim.data.n1()},
                        {"n2", sim.data.n2()},
                        {"effect_mu", sim.spec.effect_mu},
                        {"sparsity", sim.spec.sparsity},
                        {"seed", sim.spec.seed},
                        {"signal_placement", "scattered"},
                        {"signal_indices", sim.signal},
                        {"warnings", sim.warnings}};
}

}  // namespace rapidmaxnull
