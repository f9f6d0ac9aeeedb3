#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/lrmc.hpp"
#include "rapidmaxnull/metrics.hpp"
#include "rapidmaxnull/naive_engine.hpp"
#include "rapidmaxnull/parallel.hpp"
#include "rapidmaxnull/rapid_engine.hpp"
#include "rapidmaxnull/report.hpp"
#include "rapidmaxnull/simgen.hpp"
#include "rapidmaxnull/teststat.hpp"

namespace py = pybind11;
namespace rmn = rapidmaxnull;
using namespace py::literals;

namespace {

rmn::DataMatrix to_data(const rmn::RowMatrix& values, std::optional<std::size_t> n1) {
  const auto n = static_cast<std::size_t>(values.cols());
  return rmn::DataMatrix(values, n1.value_or(n / 2));
}

py::dict sim_dict(const rmn::SimData& sim) {
  return py::dict("data"_a = sim.data.values(), "n1"_a = sim.data.n1(), "signal"_a = sim.signal,
                  "warnings"_a = sim.warnings);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Max-statistic permutation testing with a low-rank accelerated engine.";
  m.attr("__version__") = rmn::kEngineVersion;

  py::register_exception<rmn::UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<rmn::DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<rmn::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("eta_min", &rmn::eta_min, "voxels"_a, "subjects"_a);

  m.def(
      "tstat",
      [](const rmn::RowMatrix& data, std::optional<std::size_t> n1) {
        const auto x = to_data(data, n1);
        const rmn::PermutationPlan identity(0, 1, x.subjects());
        return rmn::tstat_full(rmn::permute_columns(x, identity, 0)).values;
      },
      "data"_a, "n1"_a = py::none(),
      "Welch t per row of a v x n matrix; the first n1 columns are group 1.");

  m.def(
      "run_naive",
      [](const rmn::RowMatrix& data, std::size_t permutations, std::optional<std::size_t> n1,
         std::uint64_t seed, bool two_sided, unsigned threads) {
        const auto x = to_data(data, n1);
        const rmn::PermutationPlan plan(seed, permutations, x.subjects());
        rmn::NaiveOptions opt;
        opt.two_sided = two_sided;
        opt.threads = rmn::resolve_threads(threads);
        rmn::NaiveResult res = [&] {
          py::gil_scoped_release release;
          return rmn::run_naive(x, plan, opt);
        }();
        return py::dict("maxima"_a = res.null.maxima(), "observed"_a = res.observed,
                        "evaluations"_a = res.evaluations, "seconds"_a = res.seconds);
      },
      "data"_a, "permutations"_a = 10000, "n1"_a = py::none(), "seed"_a = 0,
      "two_sided"_a = false, "threads"_a = 0);

  m.def(
      "run_rapid",
      [](const rmn::RowMatrix& data, std::size_t permutations, std::optional<std::size_t> n1,
         double eta, std::size_t training_columns, std::size_t rank, std::uint64_t seed,
         bool two_sided, const std::string& shift, std::size_t max_passes, double tolerance,
         unsigned threads) {
        const auto x = to_data(data, n1);
        rmn::RunConfig cfg;
        cfg.permutations = permutations;
        cfg.eta = eta;
        cfg.training_columns = training_columns;
        cfg.rank = rank;
        cfg.seed = seed;
        cfg.two_sided = two_sided;
        cfg.shift = rmn::shift_from_string(shift);
        cfg.training.max_passes = max_passes;
        cfg.training.tolerance = tolerance;
        cfg.threads = threads;
        cfg = cfg.resolved(x.voxels(), x.subjects());
        rmn::RapidResult res = [&] {
          py::gil_scoped_release release;
          return rmn::run_rapid(x, cfg);
        }();
        return py::dict("maxima"_a = res.null.maxima(), "observed"_a = res.observed,
                        "eta"_a = cfg.eta, "training_columns"_a = cfg.training_columns,
                        "rank"_a = cfg.rank, "sigma"_a = res.model.sigma(),
                        "mu"_a = res.model.mu(), "basis"_a = res.model.basis().matrix(),
                        "passes"_a = res.diagnostics.passes,
                        "converged"_a = res.diagnostics.converged,
                        "full_evaluations"_a = res.counters.full_evaluations,
                        "sampled_evaluations"_a = res.counters.sampled_evaluations,
                        "seconds"_a = res.counters.total_seconds);
      },
      "data"_a, "permutations"_a = 10000, "n1"_a = py::none(), "eta"_a = 0.0,
      "training_columns"_a = 0, "rank"_a = 0, "seed"_a = 0, "two_sided"_a = false,
      "shift"_a = "sup-residual", "max_passes"_a = 50, "tolerance"_a = 1e-3, "threads"_a = 0,
      "Zero eta, training_columns or rank select the defaults (2 eta_min, n, n).");

  m.def(
      "threshold",
      [](std::vector<double> maxima, double alpha) {
        return rmn::threshold_at(rmn::MaxNull(std::move(maxima)), alpha);
      },
      "maxima"_a, "alpha"_a);
  m.def(
      "pvalue",
      [](std::vector<double> maxima, double observed) {
        return rmn::pvalue(rmn::MaxNull(std::move(maxima)), observed);
      },
      "maxima"_a, "observed"_a);
  m.def(
      "kl_divergence",
      [](std::vector<double> reference, std::vector<double> candidate, std::size_t bins,
         std::optional<double> epsilon) {
        rmn::KlOptions opt;
        opt.bins = bins;
        opt.epsilon = epsilon;
        return rmn::kl_divergence(rmn::MaxNull(std::move(reference)),
                                  rmn::MaxNull(std::move(candidate)), opt);
      },
      "reference"_a, "candidate"_a, "bins"_a = 100, "epsilon"_a = py::none());
  m.def(
      "resampling_risk",
      [](std::size_t rejected_a, std::size_t rejected_b, std::size_t common) {
        return rmn::resampling_risk(rejected_a, rejected_b, common).risk;
      },
      "rejected_a"_a, "rejected_b"_a, "common"_a);

  m.def(
      "gen_sim1", [](std::uint64_t seed) { return sim_dict(rmn::gen_sim1(seed)); }, "seed"_a = 0);
  m.def(
      "gen_sim2",
      [](std::size_t n, std::size_t v, double effect_mu, double sparsity, std::uint64_t seed) {
        return sim_dict(rmn::gen_sim2(rmn::SimSpec{n, v, effect_mu, sparsity, seed}));
      },
      "n"_a = 60, "v"_a = 20000, "effect_mu"_a = 1.0, "sparsity"_a = 0.01, "seed"_a = 0);
}
