#include "rapidmaxnull/random.hpp"

#include <algorithm>
#include <numeric>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "rapidmaxnull/errors.hpp"

namespace rapidmaxnull {

std::vector<std::size_t> shuffle_indices(std::size_t n, Stream& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  return perm;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                    std::size_t k,
                                                    Stream& rng) {
  if (k > n) {
    throw UsageError("cannot sample " + std::to_string(k) +
                     " distinct indices from " + std::to_string(n));
  }
  std::vector<std::size_t> out;
  out.reserve(k);
  if (k == n) {
    out.resize(n);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  std::vector<unsigned char> chosen(n, 0);
  for (std::size_t j = n - k; j < n; ++j) {
    boost::random::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t t = pick(rng);
    const std::size_t take = chosen[t] ? j : t;
    chosen[take] = 1;
    out.push_back(take);
  }
  if (n / 32 > k) {
    std::sort(out.begin(), out.end());
  } else {
    out.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) out.push_back(i);
    }
  }
  return out;
}

void fill_normal(std::span<double> out, double sigma, Stream& rng) {
  boost::random::normal_distribution<double> gauss(0.0, 1.0);
  for (double& x : out) x = sigma * gauss(rng);
}

}  // namespace rapidmaxnull
