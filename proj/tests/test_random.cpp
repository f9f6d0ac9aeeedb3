#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/random.hpp"

using namespace rapidmaxnull;

TEST_CASE("derived seeds separate domains, indices and sub-streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t master : {0ULL, 1ULL, 42ULL}) {
    for (auto domain : {StreamDomain::kShuffle, StreamDomain::kTrainingSample,
                        StreamDomain::kRecoverySample, StreamDomain::kResidualNoise}) {
      for (std::uint64_t i = 0; i < 50; ++i) {
        for (std::uint64_t sub = 0; sub < 3; ++sub) {
          CHECK(seen.insert(derive_seed(master, domain, i, sub)).second);
        }
      }
    }
  }
  static_assert(derive_seed(7, StreamDomain::kShuffle, 3) ==
                derive_seed(7, StreamDomain::kShuffle, 3, 0));
}

TEST_CASE("a stream is reproducible from its coordinates") {
  auto a = make_stream(11, StreamDomain::kShuffle, 5);
  auto b = make_stream(11, StreamDomain::kShuffle, 5);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
}

TEST_CASE("shuffle_indices returns a permutation") {
  for (std::size_t n : {1u, 2u, 7u, 100u}) {
    auto rng = make_stream(3, StreamDomain::kShuffle, n);
    auto p = shuffle_indices(n, rng);
    std::sort(p.begin(), p.end());
    std::vector<std::size_t> id(n);
    std::iota(id.begin(), id.end(), std::size_t{0});
    CHECK(p == id);
  }
}

TEST_CASE("shuffles of 4 items are uniform over the 24 orders") {
  constexpr int kDraws = 100000;
  std::map<std::vector<std::size_t>, int> counts;
  for (int i = 0; i < kDraws; ++i) {
    auto rng = make_stream(2024, StreamDomain::kShuffle, static_cast<std::uint64_t>(i));
    ++counts[shuffle_indices(4, rng)];
  }
  CHECK(counts.size() == 24);
  for (const auto& [perm, c] : counts) {
    CHECK(std::abs(static_cast<double>(c) / kDraws - 1.0 / 24.0) < 0.01);
  }
}

TEST_CASE("sample_without_replacement") {
  auto rng = make_stream(9, StreamDomain::kRecoverySample, 0);

  SUBCASE("sorted and distinct") {
    for (std::size_t k : {0u, 1u, 5u, 50u, 999u}) {
      const auto s = sample_without_replacement(1000, k, rng);
      CHECK(s.size() == k);
      CHECK(std::adjacent_find(s.begin(), s.end(), std::greater_equal<>()) == s.end());
      if (!s.empty()) CHECK(s.back() < 1000);
    }
  }
  SUBCASE("k == n is the identity") {
    const auto s = sample_without_replacement(17, 17, rng);
    for (std::size_t i = 0; i < 17; ++i) CHECK(s[i] == i);
  }
  SUBCASE("k > n is a usage error") {
    CHECK_THROWS_AS(sample_without_replacement(3, 4, rng), UsageError);
  }
  SUBCASE("inclusion frequencies are uniform") {
    std::vector<int> hits(20, 0);
    constexpr int kDraws = 40000;
    for (int i = 0; i < kDraws; ++i) {
      auto r = make_stream(5, StreamDomain::kRecoverySample, static_cast<std::uint64_t>(i));
      for (auto j : sample_without_replacement(20, 5, r)) ++hits[j];
    }
    for (int h : hits) CHECK(std::abs(static_cast<double>(h) / kDraws - 0.25) < 0.01);
  }
}

TEST_CASE("fill_normal moments") {
  std::vector<double> x(200000);
  auto rng = make_stream(1, StreamDomain::kResidualNoise, 0);
  fill_normal(x, 2.0, rng);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size() - 1);
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(4.0).epsilon(0.02));
}
