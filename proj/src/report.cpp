#include "rapidmaxnull/report.hpp"

#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/lrmc.hpp"
#include "rapidmaxnull/matrix_io.hpp"
#include "rapidmaxnull/naive_engine.hpp"
#include "rapidmaxnull/parallel.hpp"
#include "rapidmaxnull/random.hpp"
#include "rapidmaxnull/rapid_engine.hpp"
#include "rapidmaxnull/teststat.hpp"

namespace rapidmaxnull {

using nlohmann::json;
namespace fs = std::filesystem;

json config_to_json(const RunConfig& c) {
  return json{{"engine", to_string(c.engine)},
              {"permutations", c.permutations},
              {"training_columns", c.training_columns},
              {"eta", c.eta},
              {"rank", c.rank},
              {"seed", c.seed},
              {"two_sided", c.two_sided},
              {"shift", to_string(c.shift)},
              {"max_passes", c.training.max_passes},
              {"tolerance", c.training.tolerance},
              {"step_scale", c.training.step_scale},
              {"memory_cap_bytes", c.memory_cap_bytes}};
}

RunConfig config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw UsageError("run configuration must be a JSON object");
  static const std::set<std::string> known = {
      "engine",     "permutations", "training_columns", "eta",       "rank",
      "seed",       "two_sided",    "shift",            "max_passes", "tolerance",
      "step_scale", "memory_cap_bytes", "threads",      "eta_min",   "data",
      "n1"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw UsageError("unknown configuration key '" + key + "'");
    }
    if (j.contains("engine")) c.engine = engine_from_string(j.at("engine").get<std::string>());
    if (j.contains("permutations")) c.permutations = j.at("permutations").get<std::size_t>();
    if (j.contains("training_columns")) c.training_columns = j.at("training_columns").get<std::size_t>();
    if (j.contains("eta")) c.eta = j.at("eta").get<double>();
    if (j.contains("rank")) c.rank = j.at("rank").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("two_sided")) c.two_sided = j.at("two_sided").get<bool>();
    if (j.contains("shift")) c.shift = shift_from_string(j.at("shift").get<std::string>());
    if (j.contains("max_passes")) c.training.max_passes = j.at("max_passes").get<std::size_t>();
    if (j.contains("tolerance")) c.training.tolerance = j.at("tolerance").get<double>();
    if (j.contains("step_scale")) c.training.step_scale = j.at("step_scale").get<double>();
    if (j.contains("memory_cap_bytes")) c.memory_cap_bytes = j.at("memory_cap_bytes").get<std::size_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid configuration value: ") + e.what());
  }
  return c;
}

json to_json(const RunReport& r) {
  json j{{"engine_version", r.engine_version},
         {"config", config_to_json(r.config)},
         {"data", {{"path", r.data_path}, {"v", r.voxels}, {"n", r.subjects}, {"n1", r.n1}}},
         {"counters",
          {{"statistic_evaluations", r.counters.statistic_evaluations},
           {"full_evaluations", r.counters.full_evaluations},
           {"sampled_evaluations", r.counters.sampled_evaluations},
           {"resamples", r.counters.resamples}}},
         {"timing",
          {{"train_seconds", r.timing.train_seconds},
           {"recover_seconds", r.timing.recover_seconds},
           {"total_seconds", r.timing.total_seconds}}},
         {"observed_max", r.observed_max},
         {"maxima", r.maxima}};
  if (r.voxels > 1) {
    j["config"]["eta_min"] = eta_min(r.voxels, r.subjects);
  }
  if (r.observed_map_path) j["observed_map"] = *r.observed_map_path;
  if (r.model) {
    j["model"] = {{"sigma", r.model->sigma},
                  {"mu", r.model->mu},
                  {"passes", r.model->passes},
                  {"final_pass_residual", r.model->final_pass_residual},
                  {"converged", r.model->converged}};
  }
  return j;
}

RunReport report_from_json(const json& j) {
  try {
    RunReport r;
    r.engine_version = j.at("engine_version").get<std::string>();
    r.config = config_from_json(j.at("config"));
    const auto& d = j.at("data");
    r.data_path = d.at("path").get<std::string>();
    r.voxels = d.at("v").get<std::size_t>();
    r.subjects = d.at("n").get<std::size_t>();
    r.n1 = d.at("n1").get<std::size_t>();
    const auto& c = j.at("counters");
    r.counters.statistic_evaluations = c.at("statistic_evaluations").get<std::uint64_t>();
    r.counters.full_evaluations = c.at("full_evaluations").get<std::uint64_t>();
    r.counters.sampled_evaluations = c.at("sampled_evaluations").get<std::uint64_t>();
    r.counters.resamples = c.at("resamples").get<std::size_t>();
    const auto& t = j.at("timing");
    r.timing.train_seconds = t.at("train_seconds").get<double>();
    r.timing.recover_seconds = t.at("recover_seconds").get<double>();
    r.timing.total_seconds = t.at("total_seconds").get<double>();
    r.observed_max = j.at("observed_max").get<double>();
    r.maxima = j.at("maxima").get<std::vector<double>>();
    if (j.contains("observed_map")) r.observed_map_path = j.at("observed_map").get<std::string>();
    if (j.contains("model")) {
      const auto& m = j.at("model");
      r.model = ModelSummary{m.at("sigma").get<double>(), m.at("mu").get<double>(),
                             m.at("passes").get<std::size_t>(),
                             m.at("final_pass_residual").get<double>(),
                             m.at("converged").get<bool>()};
    }
    if (r.maxima.empty()) throw DataError("report has an empty maxima array");
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed run report: ") + e.what());
  }
}

RunReport load_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

void save_report(const RunReport& report, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report " + path.string());
  out << to_json(report).dump(2) << '\n';
}

void check_counter_identity(const RunReport& r) {
  const auto& c = r.counters;
  const auto L = static_cast<std::uint64_t>(r.config.permutations);
  if (r.config.engine == Engine::kNaive) {
    if (c.statistic_evaluations != r.voxels * L || c.sampled_evaluations != 0) {
      throw NumericalError(fmt::format("naive counter {} != v*L = {}", c.statistic_evaluations,
                                       r.voxels * L));
    }
    return;
  }
  const auto ell = static_cast<std::uint64_t>(r.config.training_columns);
  const auto k = static_cast<std::uint64_t>(r.config.samples_per_column(r.voxels));
  if (c.full_evaluations != r.voxels * ell || c.sampled_evaluations != k * (L - ell) ||
      c.statistic_evaluations != c.full_evaluations + c.sampled_evaluations) {
    throw NumericalError(fmt::format(
        "rapid counters violate the identity: full {} (expected {}), sampled {} (expected {})",
        c.full_evaluations, r.voxels * ell, c.sampled_evaluations, k * (L - ell)));
  }
}

RunReport execute_run(const DataMatrix& x, const RunConfig& config, const std::string& data_path,
                      const RunArtifacts& artifacts) {
  const RunConfig cfg = config.resolved(x.voxels(), x.subjects());
  cfg.validate(x.voxels(), x.subjects());
  const unsigned threads = resolve_threads(cfg.threads);

  RunReport report;
  report.config = cfg;
  report.data_path = data_path;
  report.voxels = x.voxels();
  report.subjects = x.subjects();
  report.n1 = x.n1();

  std::vector<double> observed;
  if (cfg.engine == Engine::kNaive) {
    if (artifacts.dump_model) throw UsageError("--dump-model applies to the rapid engine only");
    const PermutationPlan plan(cfg.seed, cfg.permutations, x.subjects());
    auto result = run_naive(x, plan,
                            NaiveOptions{artifacts.dump_stats.has_value(), cfg.two_sided, threads,
                                         cfg.memory_cap_bytes});
    if (artifacts.dump_stats) write_binary(result.stats->values, *artifacts.dump_stats);
    report.maxima = result.null.maxima();
    report.counters.statistic_evaluations = result.evaluations;
    report.counters.full_evaluations = result.evaluations;
    report.timing.recover_seconds = result.seconds;
    report.timing.total_seconds = result.seconds;
    observed = std::move(result.observed);
  } else {
    if (artifacts.dump_stats) throw UsageError("--dump-T applies to the naive engine only");
    RunConfig threaded = cfg;
    threaded.threads = threads;
    auto result = run_rapid(x, threaded);
    report.maxima = result.null.maxima();
    report.counters.full_evaluations = result.counters.full_evaluations;
    report.counters.sampled_evaluations = result.counters.sampled_evaluations;
    report.counters.statistic_evaluations =
        result.counters.full_evaluations + result.counters.sampled_evaluations;
    report.counters.resamples = result.counters.resamples;
    report.timing = {result.counters.train_seconds, result.counters.recover_seconds,
                     result.counters.total_seconds};
    report.model = ModelSummary{result.model.sigma(), result.model.mu(), result.diagnostics.passes,
                                result.diagnostics.final_pass_residual,
                                result.diagnostics.converged};
    if (artifacts.dump_model) {
      RowMatrix u = result.model.basis().matrix();
      write_binary(u, *artifacts.dump_model);
      std::ofstream meta(artifacts.dump_model->string() + ".json");
      meta << json{{"sigma", result.model.sigma()},
                   {"mu", result.model.mu()},
                   {"ell", result.model.ell()},
                   {"eta", result.model.eta()},
                   {"rank", result.model.basis().rank()},
                   {"two_sided", result.model.two_sided()}}
                  .dump(2)
           << '\n';
    }
    observed = std::move(result.observed);
  }
  report.observed_max = column_max(observed, cfg.two_sided);
  if (artifacts.observed_map) {
    const RowMatrix map = Eigen::Map<const RowMatrix>(observed.data(),
                                                      static_cast<Eigen::Index>(observed.size()), 1);
    write_binary(map, *artifacts.observed_map);
    report.observed_map_path = fs::absolute(*artifacts.observed_map).string();
  }
  check_counter_identity(report);
  return report;
}

namespace {

std::optional<std::vector<double>> load_observed(const RunReport& r) {
  if (!r.observed_map_path || !fs::exists(*r.observed_map_path)) return std::nullopt;
  const RowMatrix m = read_binary(*r.observed_map_path);
  return std::vector<double>(m.data(), m.data() + m.size());
}

}  // namespace

json compare_reports(const RunReport& reference, const RunReport& candidate,
                     const CompareOptions& options) {
  const MaxNull ref = reference.null();
  const MaxNull cand = candidate.null();
  json out;
  out["reference"] = {{"engine", to_string(reference.config.engine)},
                      {"permutations", ref.size()},
                      {"seed", reference.config.seed}};
  out["candidate"] = {{"engine", to_string(candidate.config.engine)},
                      {"permutations", cand.size()},
                      {"seed", candidate.config.seed}};
  out["kl"] = {{"value", kl_divergence(ref, cand, options.kl)},
               {"direction", "KL(reference || candidate)"},
               {"bins", options.kl.bins},
               {"epsilon", kl_epsilon(ref, cand, options.kl)}};

  const auto rows = threshold_table(cand, ref, options.alphas);
  const auto ref_map = load_observed(reference);
  const auto cand_map = load_observed(candidate);
  const bool two_sided = reference.config.two_sided;
  out["thresholds"] = json::array();
  out["resampling_risk"] = json::array();
  for (const auto& row : rows) {
    out["thresholds"].push_back(
        {{"alpha", row.alpha},
         {"tau_reference", row.tau_b},
         {"tau_candidate", row.tau_a},
         {"percent_difference",
          row.percent_difference ? json(*row.percent_difference) : json(nullptr)}});
    if (ref_map && cand_map) {
      const auto ra = reject_set(*ref_map, row.tau_b, two_sided);
      const auto rb = reject_set(*cand_map, row.tau_a, two_sided);
      const auto risk = resampling_risk(ra, rb);
      out["resampling_risk"].push_back(
          {{"alpha", row.alpha},
           {"rejected_reference", risk.rejected_a},
           {"rejected_candidate", risk.rejected_b},
           {"common", risk.common},
           {"risk", risk.risk ? json(*risk.risk) : json(nullptr)},
           {"outcome", risk.risk ? "ok" : "no-rejections"}});
    }
  }
  if (!(ref_map && cand_map)) out["resampling_risk_note"] = "observed maps unavailable";
  return out;
}

std::string compare_csv(const json& comparison) {
  std::ostringstream csv;
  csv << "alpha,tau_reference,tau_candidate,percent_difference,rejected_reference,"
         "rejected_candidate,common,risk\n";
  const auto& thresholds = comparison.at("thresholds");
  const auto& risks = comparison.at("resampling_risk");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const auto& t = thresholds[i];
    csv << fmt::format("{},{:.17g},{:.17g},", t.at("alpha").get<double>(),
                       t.at("tau_reference").get<double>(), t.at("tau_candidate").get<double>());
    if (!t.at("percent_difference").is_null()) {
      csv << fmt::format("{:.17g}", t.at("percent_difference").get<double>());
    }
    if (i < risks.size()) {
      const auto& r = risks[i];
      csv << fmt::format(",{},{},{},", r.at("rejected_reference").get<std::size_t>(),
                         r.at("rejected_candidate").get<std::size_t>(),
                         r.at("common").get<std::size_t>());
      if (!r.at("risk").is_null()) csv << fmt::format("{:.17g}", r.at("risk").get<double>());
    } else {
      csv << ",,,,";
    }
    csv << '\n';
  }
  csv << fmt::format("# kl={:.17g} bins={} epsilon={:.6g} direction=KL(reference||candidate)\n",
                     comparison.at("kl").at("value").get<double>(),
                     comparison.at("kl").at("bins").get<std::size_t>(),
                     comparison.at("kl").at("epsilon").get<double>());
  return csv.str();
}

std::vector<std::string> summary_header(const CompareOptions& options) {
  std::vector<std::string> h = {"cell", "L", "eta", "ell", "rank", "status", "kl",
                                "evaluation_ratio", "wall_speedup"};
  for (double a : options.alphas) {
    for (const char* col : {"tau_ref", "tau", "pct_diff", "risk", "rejected_ref", "rejected"}) {
      h.push_back(fmt::format("{}@{}", col, a));
    }
  }
  return h;
}

std::vector<std::string> summary_row(const RunReport& reference, const RunReport& cell,
                                     const CompareOptions& options) {
  const auto cmp = compare_reports(reference, cell, options);
  std::vector<std::string> row;
  row.push_back("");  // cell id filled by the caller
  row.push_back(std::to_string(cell.config.permutations));
  row.push_back(fmt::format("{:.17g}", cell.config.eta));
  row.push_back(std::to_string(cell.config.training_columns));
  row.push_back(std::to_string(cell.config.rank));
  row.push_back("ok");
  row.push_back(fmt::format("{:.17g}", cmp.at("kl").at("value").get<double>()));
  row.push_back(fmt::format("{:.17g}", static_cast<double>(reference.counters.statistic_evaluations) /
                                           static_cast<double>(cell.counters.statistic_evaluations)));
  row.push_back(cell.timing.total_seconds > 0.0
                    ? fmt::format("{:.6g}", reference.timing.total_seconds / cell.timing.total_seconds)
                    : std::string());
  const auto& th = cmp.at("thresholds");
  const auto& risks = cmp.at("resampling_risk");
  for (std::size_t i = 0; i < th.size(); ++i) {
    row.push_back(fmt::format("{:.17g}", th[i].at("tau_reference").get<double>()));
    row.push_back(fmt::format("{:.17g}", th[i].at("tau_candidate").get<double>()));
    row.push_back(th[i].at("percent_difference").is_null()
                      ? std::string()
                      : fmt::format("{:.17g}", th[i].at("percent_difference").get<double>()));
    if (i < risks.size()) {
      row.push_back(risks[i].at("risk").is_null()
                        ? std::string()
                        : fmt::format("{:.17g}", risks[i].at("risk").get<double>()));
      row.push_back(std::to_string(risks[i].at("rejected_reference").get<std::size_t>()));
      row.push_back(std::to_string(risks[i].at("rejected_candidate").get<std::size_t>()));
    } else {
      row.insert(row.end(), {"", "", ""});
    }
  }
  return row;
}

namespace {

template <typename T>
std::vector<T> list_or(const json& grid, const char* key, std::vector<T> fallback) {
  if (!grid.contains(key)) return fallback;
  return grid.at(key).get<std::vector<T>>();
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  return line + '\n';
}

}  // namespace

SweepSummary run_sweep(const json& grid, const fs::path& out_dir, const SweepOptions& options) {
  if (!grid.is_object()) throw UsageError("sweep grid must be a JSON object");
  fs::create_directories(out_dir);
  SweepSummary summary;
  summary.summary_csv = out_dir / "summary.csv";

  CompareOptions compare;
  std::vector<std::size_t> perms;
  std::vector<double> etas;
  std::vector<double> ell_multiples;
  std::vector<std::size_t> ells;
  std::uint64_t seed = 0;
  RunConfig base;
  try {
    compare.alphas = list_or<double>(grid, "alphas", {0.05, 0.01});
    compare.kl.bins = grid.value("bins", std::size_t{100});
    seed = grid.value("seed", std::uint64_t{0});
    const double scale = grid.value("scale", 1.0);
    perms = list_or<std::size_t>(grid, "permutations", {});
    if (!grid.contains("permutations")) {
      for (std::size_t L : {5000, 10000, 20000, 40000, 50000, 100000}) {
        perms.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(L * scale))));
      }
    }
    etas = list_or<double>(grid, "eta",
                           {0.005, 0.01, 0.016, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64});
    ells = list_or<std::size_t>(grid, "training_columns", {});
    ell_multiples = grid.contains("training_columns")
                        ? std::vector<double>{}
                        : list_or<double>(grid, "training_multiples", {1.0 / 3.0, 1.0, 2.0});
    base.rank = grid.value("rank", std::size_t{0});
    base.two_sided = grid.value("two_sided", false);
    if (grid.contains("shift")) base.shift = shift_from_string(grid.at("shift").get<std::string>());
    if (grid.contains("max_passes")) base.training.max_passes = grid.at("max_passes").get<std::size_t>();
    if (grid.contains("tolerance")) base.training.tolerance = grid.at("tolerance").get<double>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid sweep grid: ") + e.what());
  }

  std::ofstream csv(summary.summary_csv);
  if (!csv) throw DataError("cannot write " + summary.summary_csv.string());
  csv << csv_line(summary_header(compare));

  const bool empty_grid = perms.empty() || etas.empty() || (ells.empty() && ell_multiples.empty());
  if (empty_grid) return summary;
  if (!grid.contains("data")) throw UsageError("sweep grid needs a \"data\" path");
  const std::string data_path = grid.at("data").get<std::string>();
  std::optional<std::size_t> n1;
  if (grid.contains("n1")) n1 = grid.at("n1").get<std::size_t>();
  const DataMatrix x = read_matrix(data_path, n1);
  if (ells.empty()) {
    for (double m : ell_multiples) {
      ells.push_back(std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(m * static_cast<double>(x.subjects())))));
    }
  }

  struct Cell {
    std::size_t id;
    std::size_t permutations;
    double eta;
    std::size_t ell;
  };
  std::vector<Cell> cells;
  for (auto L : perms) {
    for (auto eta : etas) {
      for (auto ell : ells) cells.push_back({cells.size(), L, eta, ell});
    }
  }
  summary.cells = cells.size();

  const unsigned threads = resolve_threads(options.threads);
  const unsigned inner_threads = options.parallel_cells ? 1u : threads;
  std::map<std::size_t, RunReport> references;
  for (auto L : perms) {
    if (references.contains(L)) continue;
    RunConfig ref_cfg = base;
    ref_cfg.engine = Engine::kNaive;
    ref_cfg.permutations = L;
    ref_cfg.seed = seed;
    ref_cfg.threads = threads;
    const auto name = fmt::format("reference_L{}", L);
    auto report = execute_run(x, ref_cfg, data_path,
                              RunArtifacts{std::nullopt, std::nullopt, out_dir / (name + ".observed.mat0")});
    save_report(report, out_dir / (name + ".json"));
    references.emplace(L, std::move(report));
  }

  std::vector<std::vector<std::string>> rows(cells.size());
  std::mutex failure_mutex;
  parallel_for(cells.size(), options.parallel_cells ? threads : 1u, [&](std::size_t c) {
    const Cell& cell = cells[c];
    const auto name = fmt::format("cell_{:04d}", cell.id);
    RunConfig cfg = base;
    cfg.engine = Engine::kRapid;
    cfg.permutations = cell.permutations;
    cfg.eta = cell.eta;
    cfg.training_columns = cell.ell;
    cfg.seed = derive_seed(seed, StreamDomain::kCellSeed, cell.id);
    cfg.threads = inner_threads;
    try {
      auto report = execute_run(x, cfg, data_path,
                                RunArtifacts{std::nullopt, std::nullopt, out_dir / (name + ".observed.mat0")});
      save_report(report, out_dir / (name + ".json"));
      rows[c] = summary_row(references.at(cell.permutations), report, compare);
      rows[c][0] = name;
    } catch (const std::exception& e) {
      {
        std::lock_guard lock(failure_mutex);
        ++summary.failures;
      }
      std::ofstream(out_dir / (name + ".error.json"))
          << json{{"cell", name},
                  {"permutations", cell.permutations},
                  {"eta", cell.eta},
                  {"training_columns", cell.ell},
                  {"error", e.what()}}
                 .dump(2)
          << '\n';
      std::vector<std::string> row(summary_header(compare).size());
      row[0] = name;
      row[1] = std::to_string(cell.permutations);
      row[2] = fmt::format("{:.17g}", cell.eta);
      row[3] = std::to_string(cell.ell);
      std::string message = e.what();
      std::replace(message.begin(), message.end(), ',', ';');
      std::replace(message.begin(), message.end(), '\n', ' ');
      row[5] = "failed: " + message;
      rows[c] = std::move(row);
    }
  });
  for (const auto& row : rows) csv << csv_line(row);
  return summary;
}

}  // namespace rapidmaxnull
