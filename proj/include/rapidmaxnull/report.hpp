#pragma once

// Machine-readable run artifacts and the command implementations behind the
// CLI (kept in the library so they can be tested without a subprocess).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rapidmaxnull/metrics.hpp"
#include "rapidmaxnull/types.hpp"

namespace rapidmaxnull {

inline constexpr const char* kEngineVersion = "1.0.0";

struct RunCounters {
  std::uint64_t statistic_evaluations = 0;  // full + sampled
  std::uint64_t full_evaluations = 0;
  std::uint64_t sampled_evaluations = 0;
  std::size_t resamples = 0;
};

struct RunTiming {
  double train_seconds = 0.0;
  double recover_seconds = 0.0;
  double total_seconds = 0.0;
};

struct ModelSummary {
  double sigma = 0.0;
  double mu = 0.0;
  std::size_t passes = 0;
  double final_pass_residual = 0.0;
  bool converged = false;
};

struct RunReport {
  RunConfig config;  // resolved
  std::string data_path;
  std::size_t voxels = 0;
  std::size_t subjects = 0;
  std::size_t n1 = 0;
  std::vector<double> maxima;
  double observed_max = 0.0;
  std::optional<std::string> observed_map_path;
  RunTiming timing;
  RunCounters counters;
  std::optional<ModelSummary> model;
  std::string engine_version = kEngineVersion;

  MaxNull null() const { return MaxNull(maxima); }
};

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);
RunReport load_report(const std::filesystem::path& path);
void save_report(const RunReport& report, const std::filesystem::path& path);

nlohmann::json config_to_json(const RunConfig& config);
/// Reads the keys present in `j` on top of `base`; unknown keys are errors.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

struct RunArtifacts {
  std::optional<std::filesystem::path> dump_stats;     // naive: full T
  std::optional<std::filesystem::path> dump_model;     // rapid: U, plus sigma/mu json
  std::optional<std::filesystem::path> observed_map;   // identity statistic map
};

/// Runs the configured engine and assembles the report. Throws NumericalError
/// when the counters would violate the engine identities.
RunReport execute_run(const DataMatrix& x, const RunConfig& config,
                      const std::string& data_path = "", const RunArtifacts& artifacts = {});

/// Throws NumericalError if the counters do not satisfy the engine identity.
void check_counter_identity(const RunReport& report);

struct CompareOptions {
  std::vector<double> alphas = {0.05, 0.01, 0.001};
  KlOptions kl;
};

/// KL(reference || candidate), per-alpha thresholds, and resampling risk of
/// the rejection sets when both reports carry an observed map.
nlohmann::json compare_reports(const RunReport& reference, const RunReport& candidate,
                               const CompareOptions& options);

/// CSV rendering of a compare result's threshold table.
std::string compare_csv(const nlohmann::json& comparison);

struct SweepOptions {
  bool parallel_cells = false;
  unsigned threads = 0;
};

struct SweepSummary {
  std::size_t cells = 0;
  std::size_t failures = 0;
  std::filesystem::path summary_csv;
};

/// Runs every (L, eta, ell) cell of the grid, writes one report per cell plus
/// reference naive reports, and a summary CSV derived from those files.
SweepSummary run_sweep(const nlohmann::json& grid, const std::filesystem::path& out_dir,
                       const SweepOptions& options = {});

/// One summary row recomputed from a reference and a cell report.
std::vector<std::string> summary_row(const RunReport& reference, const RunReport& cell,
                                     const CompareOptions& options);
std::vector<std::string> summary_header(const CompareOptions& options);

}  // namespace rapidmaxnull
