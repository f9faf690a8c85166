#pragma once

// Small models shared by the test suites.

#include <random>

#include "xorpgd/xorpgd.hpp"

namespace testing_models {

using namespace xorpgd;

inline factor_graph single(double w0, double w1) { return factor_graph(1, {factor{{0}, {w0, w1}}}); }

/// Pairwise table [[1,2],[3,4]] over (theta_0, theta_1).
inline factor_graph pairwise_1234() { return factor_graph(2, {factor{{0, 1}, {1, 2, 3, 4}}}); }

inline factor_graph uniform(std::size_t n) {
  std::vector<factor> fs;
  for (std::size_t i = 0; i < n; ++i) fs.push_back(factor{{i}, {1.0, 1.0}});
  return factor_graph(n, std::move(fs));
}

/// Random MRF: unary factors plus `extra` random cliques of size 2..max_size,
/// log-entries uniform in [-spread, spread].
inline factor_graph random_mrf(std::size_t n, std::size_t extra, std::size_t max_size, double spread,
                               std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> le(-spread, spread);
  std::vector<factor> fs;
  for (std::size_t i = 0; i < n; ++i) fs.push_back(factor{{i}, {std::exp(le(rng)), std::exp(le(rng))}});
  std::vector<std::size_t> vars(n);
  for (std::size_t c = 0; c < extra && n >= 2; ++c) {
    const std::size_t size = std::uniform_int_distribution<std::size_t>(2, std::min(max_size, n))(rng);
    std::iota(vars.begin(), vars.end(), 0);
    std::shuffle(vars.begin(), vars.end(), rng);
    factor f;
    f.scope.assign(vars.begin(), vars.begin() + static_cast<std::ptrdiff_t>(size));
    f.table.resize(std::size_t{1} << size);
    for (double &v : f.table) v = std::exp(le(rng));
    fs.push_back(std::move(f));
  }
  return factor_graph(n, std::move(fs));
}

/// Random tree: unary factors plus one pairwise factor per tree edge.
inline factor_graph random_tree(std::size_t n, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> le(-1.5, 1.5);
  std::vector<factor> fs;
  for (std::size_t i = 0; i < n; ++i) fs.push_back(factor{{i}, {std::exp(le(rng)), std::exp(le(rng))}});
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t parent = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    factor f{{parent, i}, {}};
    for (int e = 0; e < 4; ++e) f.table.push_back(std::exp(le(rng)));
    fs.push_back(std::move(f));
  }
  return factor_graph(n, std::move(fs));
}

}  // namespace testing_models
