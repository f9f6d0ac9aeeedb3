// rapidmaxnull: gen / run / sweep / compare / spectrum

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/lrmc.hpp"
#include "rapidmaxnull/matrix_io.hpp"
#include "rapidmaxnull/parallel.hpp"
#include "rapidmaxnull/report.hpp"
#include "rapidmaxnull/simgen.hpp"

namespace rmn = rapidmaxnull;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const double a = std::stod(item, &used);
      if (used != item.size() || !(a > 0.0 && a < 1.0)) throw std::invalid_argument(item);
      out.push_back(a);
    } catch (const std::exception&) {
      throw rmn::UsageError("--alphas: '" + item + "' is not a level in (0, 1)");
    }
  }
  if (out.empty()) throw rmn::UsageError("--alphas needs at least one level");
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rmn::DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw rmn::UsageError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw rmn::DataError("cannot write " + path);
  out << text;
}

unsigned threads_from_env() {
  const char* env = std::getenv("RAPIDMAXNULL_THREADS");
  if (env == nullptr) return 0;
  return rmn::resolve_threads_from(env);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Max-statistic permutation testing with a low-rank fast path"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rmn::kEngineVersion);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate synthetic two-group data");
  gen->require_subcommand(1);
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  auto* sim1 = gen->add_subcommand("sim1", "n=30, v=20000, 1% signal voxels at effect 1");
  sim1->add_option("--seed", gen_seed, "Master seed")->required();
  sim1->add_option("--out,-o", gen_out, "Output matrix (.mat0 or .csv)")->required();
  rmn::SimSpec sim2_spec;
  auto* sim2 = gen->add_subcommand("sim2", "Configurable signal strength and sparsity");
  sim2->add_option("--n", sim2_spec.n, "Subjects (even)");
  sim2->add_option("--v", sim2_spec.v, "Voxels");
  sim2->add_option("--mu", sim2_spec.effect_mu, "Effect size");
  sim2->add_option("--sparsity", sim2_spec.sparsity, "Fraction of signal voxels");
  sim2->add_option("--seed", gen_seed, "Master seed")->required();
  sim2->add_option("--out,-o", gen_out, "Output matrix (.mat0 or .csv)")->required();

  // run
  auto* run = app.add_subcommand("run", "Build a max null distribution");
  std::string data_path, config_path, report_path, dump_t, dump_model, engine_name, shift_name;
  std::optional<std::size_t> n1, perms, ell, rank, max_passes;
  std::optional<double> eta, tol;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool two_sided = false;
  run->add_option("--data,-d", data_path, "Input matrix (.mat0 or .csv)")->required();
  run->add_option("--config", config_path, "JSON run configuration");
  run->add_option("--engine", engine_name, "naive or rapid");
  run->add_option("--perms", perms, "Number of permutations L");
  run->add_option("--eta", eta, "Sub-sampling rate");
  run->add_option("--ell", ell, "Training columns");
  run->add_option("--rank", rank, "Subspace rank");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--shift", shift_name, "sup-residual or mean-gap");
  run->add_option("--max-passes", max_passes, "Training pass limit");
  run->add_option("--tol", tol, "Training convergence tolerance");
  run->add_option("--n1", n1, "Group-1 size (binary input defaults to n/2)");
  run->add_option("--threads", threads, "Worker threads (default: hardware)");
  run->add_flag("--two-sided", two_sided, "Use max |t|");
  run->add_option("--out,-o", report_path, "Report JSON path")->required();
  run->add_option("--dump-T", dump_t, "Naive: write the full statistic matrix");
  run->add_option("--dump-model", dump_model, "Rapid: write U (plus sigma/mu JSON sidecar)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a grid of rapid cells against naive references");
  std::string grid_path, sweep_out;
  bool parallel_cells = false;
  sweep->add_option("--grid", grid_path, "Grid JSON")->required();
  sweep->add_option("--out,-o", sweep_out, "Output directory")->required();
  sweep->add_flag("--parallel-cells", parallel_cells, "Run cells concurrently");
  sweep->add_option("--threads", threads, "Worker threads (default: hardware)");

  // compare
  auto* compare = app.add_subcommand("compare", "Compare two run reports");
  std::string report_a, report_b, alphas_text = "0.05,0.01,0.001", compare_out, format = "json";
  std::size_t bins = 100;
  std::optional<double> epsilon;
  compare->add_option("--a", report_a, "Reference report")->required();
  compare->add_option("--b", report_b, "Candidate report")->required();
  compare->add_option("--alphas", alphas_text, "Comma-separated levels");
  compare->add_option("--bins", bins, "Histogram bins");
  compare->add_option("--epsilon", epsilon, "Empty-bin smoothing mass");
  compare->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  compare->add_option("--out,-o", compare_out, "Output path (default stdout)");

  // spectrum
  auto* spec = app.add_subcommand("spectrum", "Leading singular values of a statistic matrix");
  std::string spectrum_in, spectrum_out;
  std::size_t spectrum_count = 0;
  spec->add_option("--input,-i", spectrum_in, "Matrix from run --dump-T")->required();
  spec->add_option("--count", spectrum_count, "Number of values (default all)");
  spec->add_option("--out,-o", spectrum_out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      rmn::SimData sim = sim1->parsed() ? rmn::gen_sim1(gen_seed)
                                        : rmn::gen_sim2([&] {
                                            auto s = sim2_spec;
                                            s.seed = gen_seed;
                                            return s;
                                          }());
      for (const auto& w : sim.warnings) std::cerr << "warning: " << w << '\n';
      rmn::write_matrix(sim.data, gen_out);
      const auto manifest = rmn::manifest(sim, sim1->parsed() ? "sim1" : "sim2");
      write_text(gen_out + ".json", manifest.dump(2) + "\n");
      return 0;
    }

    if (run->parsed()) {
      rmn::RunConfig cfg;
      cfg.threads = threads_from_env();
      if (!config_path.empty()) cfg = rmn::config_from_json(read_json_file(config_path), cfg);
      if (!engine_name.empty()) cfg.engine = rmn::engine_from_string(engine_name);
      if (perms) cfg.permutations = *perms;
      if (eta) cfg.eta = *eta;
      if (ell) cfg.training_columns = *ell;
      if (rank) cfg.rank = *rank;
      if (seed) cfg.seed = *seed;
      if (!shift_name.empty()) cfg.shift = rmn::shift_from_string(shift_name);
      if (max_passes) cfg.training.max_passes = *max_passes;
      if (tol) cfg.training.tolerance = *tol;
      if (two_sided) cfg.two_sided = true;
      if (threads) {
        if (*threads == 0) throw rmn::UsageError("--threads must be at least 1");
        cfg.threads = *threads;
      }
      const auto x = rmn::read_matrix(data_path, n1);
      rmn::RunArtifacts artifacts;
      if (!dump_t.empty()) artifacts.dump_stats = dump_t;
      if (!dump_model.empty()) artifacts.dump_model = dump_model;
      fs::path observed = report_path;
      observed.replace_extension(".observed.mat0");
      artifacts.observed_map = observed;
      const auto report = rmn::execute_run(x, cfg, data_path, artifacts);
      rmn::save_report(report, report_path);
      std::cerr << fmt::format("{}: L={} evaluations={} total={:.3f}s\n",
                               rmn::to_string(report.config.engine), report.config.permutations,
                               report.counters.statistic_evaluations,
                               report.timing.total_seconds);
      return 0;
    }

    if (sweep->parsed()) {
      rmn::SweepOptions opts;
      opts.parallel_cells = parallel_cells;
      opts.threads = threads_from_env();
      if (threads) {
        if (*threads == 0) throw rmn::UsageError("--threads must be at least 1");
        opts.threads = *threads;
      }
      const auto summary = rmn::run_sweep(read_json_file(grid_path), sweep_out, opts);
      std::cerr << fmt::format("{} cells, {} failed; summary at {}\n", summary.cells,
                               summary.failures, summary.summary_csv.string());
      return 0;
    }

    if (compare->parsed()) {
      rmn::CompareOptions opts;
      opts.alphas = parse_alphas(alphas_text);
      opts.kl.bins = bins;
      opts.kl.epsilon = epsilon;
      const auto result =
          rmn::compare_reports(rmn::load_report(report_a), rmn::load_report(report_b), opts);
      write_text(compare_out, format == "csv" ? rmn::compare_csv(result) : result.dump(2) + "\n");
      return 0;
    }

    if (spec->parsed()) {
      const auto t = rmn::read_binary(spectrum_in);
      const auto count = spectrum_count > 0
                             ? spectrum_count
                             : static_cast<std::size_t>(std::min(t.rows(), t.cols()));
      const auto values = rmn::spectrum(t, count);
      std::string csv = "index,value\n";
      for (std::size_t i = 0; i < values.size(); ++i) csv += fmt::format("{},{:.17g}\n", i, values[i]);
      write_text(spectrum_out, csv);
      return 0;
    }
  } catch (const rmn::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const rmn::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const rmn::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
