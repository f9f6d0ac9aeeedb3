#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/lrmc.hpp"
#include "rapidmaxnull/types.hpp"

using namespace rapidmaxnull;

TEST_CASE("DataMatrix validates its shape") {
  CHECK_NOTHROW(DataMatrix(test::gaussian(3, 4, 1), 2));
  CHECK_THROWS_AS(DataMatrix(test::gaussian(3, 4, 1), 1), DataError);
  CHECK_THROWS_AS(DataMatrix(test::gaussian(3, 4, 1), 3), DataError);
  CHECK_THROWS_AS(DataMatrix(RowMatrix(0, 4), 2), DataError);
  auto bad = test::gaussian(3, 4, 1);
  bad(1, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(DataMatrix(bad, 2), DataError);
}

TEST_CASE("permutation 0 is the observed labeling") {
  const PermutationPlan plan(5, 10, 8);
  const auto p0 = plan.permutation(0);
  for (std::size_t i = 0; i < 8; ++i) CHECK(p0[i] == i);
}

TEST_CASE("permutation plans are reproducible and seed dependent") {
  const PermutationPlan a(5, 50, 12);
  const PermutationPlan b(5, 50, 12);
  const PermutationPlan c(6, 50, 12);
  int differ = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a.permutation(i) == b.permutation(i));
    differ += a.permutation(i) != c.permutation(i);
    auto sorted = a.permutation(i);
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> id(12);
    std::iota(id.begin(), id.end(), std::size_t{0});
    CHECK(sorted == id);
  }
  CHECK(differ >= 48);
  CHECK_THROWS_AS(a.permutation(50), UsageError);
}

TEST_CASE("relabeled view splits the order at n1") {
  const auto x = test::random_data(4, 3, 5, 1);
  const PermutationPlan plan(1, 3, 8);
  const auto view = permute_columns(x, plan, 2);
  CHECK(view.group1().size() == 3);
  CHECK(view.group2().size() == 5);
  CHECK(view.group1().data() + 3 == view.group2().data());
}

TEST_CASE("MaxNull keeps raw order and a sorted copy") {
  const MaxNull m({3.0, 1.0, 2.0});
  CHECK(m.maxima() == std::vector<double>{3.0, 1.0, 2.0});
  CHECK(m.sorted() == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("RunConfig defaults resolve from the data shape") {
  RunConfig cfg;
  const auto r = cfg.resolved(20000, 30);
  CHECK(r.training_columns == 30);
  CHECK(r.rank == 30);
  CHECK(r.eta == doctest::Approx(2.0 * eta_min(20000, 30)));
  CHECK(r.eta == doctest::Approx(0.0297105).epsilon(1e-5));
  CHECK(r.samples_per_column(20000) == 595);
  CHECK_NOTHROW(r.validate(20000, 30));
}

TEST_CASE("RunConfig rejects violated invariants") {
  const auto base = RunConfig{}.resolved(1000, 20);
  auto with = [&](auto edit) {
    auto c = base;
    edit(c);
    return c;
  };
  CHECK_THROWS_AS(with([](RunConfig& c) { c.eta = 0.0; }).validate(1000, 20), UsageError);
  CHECK_THROWS_AS(with([](RunConfig& c) { c.eta = 1.5; }).validate(1000, 20), UsageError);
  CHECK_THROWS_AS(with([](RunConfig& c) { c.rank = 21; }).validate(1000, 20), UsageError);
  CHECK_THROWS_AS(with([](RunConfig& c) { c.training_columns = 10; }).validate(1000, 20),
                  UsageError);
  CHECK_THROWS_AS(with([](RunConfig& c) { c.training_columns = c.permutations + 1; })
                      .validate(1000, 20),
                  UsageError);
  CHECK_THROWS_AS(with([](RunConfig& c) { c.eta = 0.001; }).validate(1000, 20), UsageError);
  CHECK_THROWS_AS(with([](RunConfig& c) { c.permutations = 0; }).validate(1000, 20),
                  UsageError);
  try {
    with([](RunConfig& c) { c.training_columns = 10; }).validate(1000, 20);
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("cannot identify rank") != std::string::npos);
  }
  // The naive engine ignores the rapid-only fields.
  CHECK_NOTHROW(with([](RunConfig& c) {
                  c.engine = Engine::kNaive;
                  c.eta = 7.0;
                }).validate(1000, 20));
}

TEST_CASE("samples_per_column rounds up without float noise") {
  RunConfig c;
  c.eta = 0.03;
  CHECK(c.samples_per_column(100) == 3);
  c.eta = 0.031;
  CHECK(c.samples_per_column(100) == 4);
  c.eta = 1.0;
  CHECK(c.samples_per_column(977) == 977);
}

TEST_CASE("engine and shift names round-trip") {
  for (auto e : {Engine::kNaive, Engine::kRapid}) CHECK(engine_from_string(to_string(e)) == e);
  for (auto s : {ShiftEstimator::kSupResidual, ShiftEstimator::kMeanGap}) {
    CHECK(shift_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS(engine_from_string("fast"), UsageError);
  CHECK_THROWS_AS(shift_from_string("median"), UsageError);
}
