#pragma once

// Benchmark problems: stochastic inventory management (binarized demand) and
// stochastic network design (expected commute time under edge failures),
// plus a separable quadratic used to check the optimizers.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "factor_graph.hpp"
#include "numerics.hpp"
#include "optimizers.hpp"
#include "xor_sampling.hpp"

namespace xorpgd {

class problem_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Uniform on (0, hi]: 1 - U[0,1) lies in (0, 1].
inline double uniform_left_open(rng_type &rng, double hi) { return hi * (1.0 - uniform01(rng)); }

/// Uniform on the open interval (lo, hi).
inline double uniform_open(rng_type &rng, double lo, double hi) {
  for (;;) {
    const double u = uniform01(rng);
    if (u > 0.0) return lo + (hi - lo) * u;
  }
}

inline std::size_t uniform_int(rng_type &rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Inventory

struct inventory_instance {
  std::size_t n = 0;
  vec order_cost;      // c
  vec backorder_cost;  // b >= c
  vec holding_cost;    // h
  vec storage;         // w
  double storage_cap = 0.0;  // X at 100%
  vec demand_low, demand_high;
  factor_graph model{0, {}};

  void validate() const {
    auto sized = [&](const vec &v, const char *what) {
      if (v.size() != n) throw problem_error(std::string("inventory: ") + what + " has wrong length");
      for (double x : v)
        if (!(x > 0.0) || !std::isfinite(x))
          throw problem_error(std::string("inventory: ") + what + " must be positive");
    };
    sized(order_cost, "c");
    sized(backorder_cost, "b");
    sized(holding_cost, "h");
    sized(storage, "w");
    sized(demand_low, "d_low");
    sized(demand_high, "d_high");
    for (std::size_t i = 0; i < n; ++i)
      if (backorder_cost[i] < order_cost[i]) throw problem_error("inventory: need b_i >= c_i");
    if (!(storage_cap > 0.0)) throw problem_error("inventory: storage cap must be positive");
    if (model.num_vars() != n) throw problem_error("inventory: model must have one variable per material");
  }

  vec demand(const assignment &theta) const {
    vec d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = theta[i] ? demand_high[i] : demand_low[i];
    return d;
  }
};

/// sum_i c_i x_i + b_i [d_i - x_i]^+ + h_i [x_i - d_i]^+
inline double inventory_cost(const inventory_instance &inst, std::span<const double> x,
                             std::span<const double> d) {
  double s = 0.0;
  for (std::size_t i = 0; i < inst.n; ++i) {
    if (x[i] < 0.0) throw problem_error("inventory_cost: negative stock");
    s += inst.order_cost[i] * x[i] + inst.backorder_cost[i] * std::max(0.0, d[i] - x[i]) +
         inst.holding_cost[i] * std::max(0.0, x[i] - d[i]);
  }
  return s;
}

/// Kinks contribute 0 from the hinge terms.
inline vec inventory_subgradient(const inventory_instance &inst, std::span<const double> x,
                                 std::span<const double> d) {
  vec g(inst.n);
  for (std::size_t i = 0; i < inst.n; ++i)
    g[i] = inst.order_cost[i] - (d[i] > x[i] ? inst.backorder_cost[i] : 0.0) +
           (x[i] > d[i] ? inst.holding_cost[i] : 0.0);
  return g;
}

/// Storage constraint {x >= 0, w^T x <= percent/100 * X}.
inline constraint_set storage_constraint(const inventory_instance &inst, double percent) {
  if (!(percent >= 0.0)) throw problem_error("storage percent must be >= 0");
  return nonneg_halfspace{inst.storage, inst.storage_cap * percent / 100.0};
}

/// Clique-structured demand model: clique count in [n, 2n], sizes in [1, 6],
/// entries v1 + v2 v3 with v1 in (0,1), v2 in {0,1}, v3 in (10, 1000).
inline factor_graph gen_clique_model(std::size_t n, rng_type &rng) {
  std::vector<factor> fs;
  const std::size_t cliques = detail::uniform_int(rng, n, 2 * n);
  std::vector<std::size_t> vars(n);
  for (std::size_t c = 0; c < cliques; ++c) {
    const std::size_t size = detail::uniform_int(rng, 1, std::min<std::size_t>(6, n));
    std::iota(vars.begin(), vars.end(), 0);
    // partial Fisher-Yates for a uniformly random subset
    for (std::size_t i = 0; i < size; ++i) std::swap(vars[i], vars[detail::uniform_int(rng, i, n - 1)]);
    factor f;
    f.scope.assign(vars.begin(), vars.begin() + static_cast<std::ptrdiff_t>(size));
    std::sort(f.scope.begin(), f.scope.end());
    f.table.resize(std::size_t{1} << size);
    for (double &v : f.table) {
      const double v1 = detail::uniform_open(rng, 0.0, 1.0);
      const double v2 = uniform01(rng) < 0.5 ? 0.0 : 1.0;
      const double v3 = detail::uniform_open(rng, 10.0, 1000.0);
      v = v1 + v2 * v3;
    }
    fs.push_back(std::move(f));
  }
  return factor_graph(n, std::move(fs));
}

inline inventory_instance gen_inventory(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw problem_error("gen_inventory: n must be >= 1");
  rng_type rng(seed);
  inventory_instance inst;
  inst.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = detail::uniform_left_open(rng, 5.0);
    const double h = detail::uniform_left_open(rng, 10.0);
    const double s = detail::uniform_left_open(rng, 10.0);
    const double d1 = detail::uniform_left_open(rng, 10.0);
    const double d2 = detail::uniform_left_open(rng, 10.0);
    const double w = detail::uniform_left_open(rng, 10.0);
    inst.order_cost.push_back(c);
    inst.holding_cost.push_back(h);
    inst.backorder_cost.push_back(c + s);
    inst.demand_low.push_back(std::min(d1, d2));
    inst.demand_high.push_back(std::max(d1, d2));
    inst.storage.push_back(w);
  }
  inst.storage_cap = 5.0 * static_cast<double>(n);
  inst.model = gen_clique_model(n, rng);
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------------------
// Network

struct edge {
  std::size_t u = 0, v = 0;
};

struct network_instance {
  std::size_t nodes = 0;  // m
  std::vector<edge> edges;
  vec base_conductance;   // g0
  vec upgrade_cost;       // c_e
  double budget = 1000.0; // B at 100%
  factor_graph model{0, {}};  // theta_e = 1: edge survives
  double disconnection_penalty = 1e6;

  void validate() const {
    if (nodes < 2) throw problem_error("network: need at least two nodes");
    const std::size_t e = edges.size();
    if (base_conductance.size() != e || upgrade_cost.size() != e)
      throw problem_error("network: per-edge vectors have wrong length");
    for (std::size_t i = 0; i < e; ++i) {
      const auto &ed = edges[i];
      if (ed.u >= nodes || ed.v >= nodes || ed.u == ed.v)
        throw problem_error("network: bad edge endpoint");
      for (std::size_t j = 0; j < i; ++j)
        if (std::minmax(ed.u, ed.v) == std::minmax(edges[j].u, edges[j].v))
          throw problem_error("network: duplicate edge");
      if (!(base_conductance[i] >= 0.0)) throw problem_error("network: g0 must be >= 0");
      if (!(upgrade_cost[i] > 0.0)) throw problem_error("network: upgrade cost must be positive");
    }
    if (!(budget >= 0.0)) throw problem_error("network: budget must be >= 0");
    if (model.num_vars() != e) throw problem_error("network: model must have one variable per edge");
    if (!connected(assignment(e, 1), vec(e, 1.0)))
      throw problem_error("network: intact graph is not connected");
  }

  /// Connectivity of the graph formed by surviving edges with positive conductance.
  bool connected(const assignment &theta, std::span<const double> g) const {
    std::vector<std::size_t> parent(nodes);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::size_t comps = nodes;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (!theta[i] || !(g[i] > 0.0)) continue;
      const auto a = find(edges[i].u), b = find(edges[i].v);
      if (a != b) {
        parent[a] = b;
        --comps;
      }
    }
    return comps == 1;
  }

  /// M = L + 11^T/m with L = sum_e theta_e g_e b_e b_e^T.
  dense_matrix regularized_laplacian(const assignment &theta, std::span<const double> g) const {
    const double fill = 1.0 / static_cast<double>(nodes);
    dense_matrix m(nodes, nodes, fill);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (!theta[i]) continue;
      const auto [u, v] = edges[i];
      m(u, u) += g[i];
      m(v, v) += g[i];
      m(u, v) -= g[i];
      m(v, u) -= g[i];
    }
    return m;
  }
};

/// 4 (1^T g) / (m-1) * (Tr(L + 11^T/m)^{-1} - 1), or the penalty when the
/// surviving graph is disconnected.
inline double commute_time(const network_instance &inst, std::span<const double> g,
                           const assignment &theta) {
  for (double v : g)
    if (!(v >= 0.0)) throw problem_error("commute_time: conductances must be >= 0");
  if (!inst.connected(theta, g)) return inst.disconnection_penalty;
  const double total = std::accumulate(g.begin(), g.end(), 0.0);
  const double m = static_cast<double>(inst.nodes);
  return 4.0 * total / (m - 1.0) * (trace_inverse(inst.regularized_laplacian(theta, g)) - 1.0);
}

/// dC/dg_e = 4/(m-1) (Tr M^{-1} - 1) - 4 (1^T g)/(m-1) theta_e ||M^{-1} b_e||^2.
/// Zero on the disconnection plateau.
inline vec commute_gradient(const network_instance &inst, std::span<const double> g,
                            const assignment &theta) {
  const std::size_t ne = inst.edges.size();
  vec grad(ne, 0.0);
  if (!inst.connected(theta, g)) return grad;
  const dense_matrix minv = inverse_spd(inst.regularized_laplacian(theta, g));
  const double m = static_cast<double>(inst.nodes);
  const double total = std::accumulate(g.begin(), g.end(), 0.0);
  const double first = 4.0 / (m - 1.0) * (minv.trace() - 1.0);
  const double scale = 4.0 * total / (m - 1.0);
  for (std::size_t i = 0; i < ne; ++i) {
    grad[i] = first;
    if (!theta[i]) continue;
    const auto [u, v] = inst.edges[i];
    double s = 0.0;
    for (std::size_t r = 0; r < inst.nodes; ++r) {
      const double d = minv(r, u) - minv(r, v);
      s += d * d;
    }
    grad[i] -= scale * s;
  }
  return grad;
}

/// Budget constraint over the upgrade vector: {dg >= 0, c^T dg <= percent/100 * B}.
inline constraint_set budget_constraint(const network_instance &inst, double percent) {
  if (!(percent >= 0.0)) throw problem_error("budget percent must be >= 0");
  return nonneg_halfspace{inst.upgrade_cost, inst.budget * percent / 100.0};
}

enum class network_kind { grid, weak, strong };

inline network_kind parse_network_kind(const std::string &s) {
  if (s == "grid") return network_kind::grid;
  if (s == "weak") return network_kind::weak;
  if (s == "strong") return network_kind::strong;
  throw problem_error("unknown network kind '" + s + "' (expected grid, weak or strong)");
}

/// Failure model: unary survival odds with survival probability in
/// [0.7, 0.95] per edge, plus an agreement-favoring pairwise factor for each
/// pair of edges sharing a node.
inline factor_graph gen_failure_model(const std::vector<edge> &edges, rng_type &rng) {
  std::vector<factor> fs;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double p = 0.7 + 0.25 * uniform01(rng);
    fs.push_back(factor{{i}, {1.0 - p, p}});
  }
  for (std::size_t i = 0; i < edges.size(); ++i)
    for (std::size_t j = i + 1; j < edges.size(); ++j) {
      const auto &a = edges[i], &b = edges[j];
      if (a.u != b.u && a.u != b.v && a.v != b.u && a.v != b.v) continue;
      const double agree = 1.0 + 2.0 * uniform01(rng);
      fs.push_back(factor{{i, j}, {agree, 1.0, 1.0, agree}});
    }
  return factor_graph(edges.size(), std::move(fs));
}

/// Desk-scale families, each with at most 20 edges:
///   grid   3x3 lattice (9 nodes, 12 edges)
///   weak   two 5-node communities (ring plus two chords) joined by 1 bridge
///   strong the same communities joined by 3 bridges
inline network_instance gen_network(network_kind kind, std::uint64_t seed) {
  rng_type rng(seed);
  network_instance inst;
  if (kind == network_kind::grid) {
    inst.nodes = 9;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t id = 3 * r + c;
        if (c + 1 < 3) inst.edges.push_back({id, id + 1});
        if (r + 1 < 3) inst.edges.push_back({id, id + 3});
      }
  } else {
    inst.nodes = 10;
    for (std::size_t base : {std::size_t{0}, std::size_t{5}}) {
      for (std::size_t i = 0; i < 5; ++i) inst.edges.push_back({base + i, base + (i + 1) % 5});
      // two random chords per community
      std::vector<std::pair<std::size_t, std::size_t>> chords{{0, 2}, {0, 3}, {1, 3}, {1, 4}, {2, 4}};
      for (std::size_t k = 0; k < 2; ++k) {
        const std::size_t pick = detail::uniform_int(rng, k, chords.size() - 1);
        std::swap(chords[k], chords[pick]);
        inst.edges.push_back({base + chords[k].first, base + chords[k].second});
      }
    }
    const std::size_t bridges = kind == network_kind::weak ? 1 : 3;
    std::vector<std::size_t> left{0, 1, 2, 3, 4};
    for (std::size_t k = 0; k < bridges; ++k) {
      const std::size_t pick = detail::uniform_int(rng, k, left.size() - 1);
      std::swap(left[k], left[pick]);
      inst.edges.push_back({left[k], 5 + detail::uniform_int(rng, 0, 4)});
    }
  }
  const std::size_t ne = inst.edges.size();
  inst.base_conductance.assign(ne, 1.0);
  for (std::size_t i = 0; i < ne; ++i) inst.upgrade_cost.push_back(detail::uniform_open(rng, 0.0, 10.0));
  inst.model = gen_failure_model(inst.edges, rng);
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------------------
// Quadratic toy: f(x, theta) = 1/2 ||x - theta||^2 over independent bits.

struct quadratic_toy {
  factor_graph model{0, {}};
  vec p_one;  // marginals

  static quadratic_toy independent(const vec &marginals) {
    std::vector<factor> fs;
    for (std::size_t i = 0; i < marginals.size(); ++i) {
      const double p = marginals[i];
      if (!(p > 0.0 && p < 1.0)) throw problem_error("quadratic toy: marginals must lie in (0, 1)");
      fs.push_back(factor{{i}, {1.0 - p, p}});
    }
    return {factor_graph(marginals.size(), std::move(fs)), marginals};
  }

  std::size_t dim() const { return p_one.size(); }

  /// E f(x) = 1/2 ||x - p||^2 + 1/2 sum p_i (1 - p_i)
  double expected_value(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i)
      s += 0.5 * (x[i] - p_one[i]) * (x[i] - p_one[i]) + 0.5 * p_one[i] * (1.0 - p_one[i]);
    return s;
  }

  /// Minimizer over a box: clip the mean.
  vec box_optimum(const box &c) const {
    vec x(dim());
    for (std::size_t i = 0; i < dim(); ++i) x[i] = std::clamp(p_one[i], c.lower[i], c.upper[i]);
    return x;
  }
};

// ---------------------------------------------------------------------------
// Problem adapters

inline stochastic_problem make_problem(const inventory_instance &inst, double regularization = 0.0) {
  stochastic_problem p;
  p.dim = inst.n;
  p.model = &inst.model;
  p.regularization = regularization;
  p.value = [&inst](std::span<const double> x, const assignment &theta) {
    vec xc(x.begin(), x.end());
    for (double &v : xc) v = std::max(0.0, v);  // penalty iterates may dip below zero
    return inventory_cost(inst, xc, inst.demand(theta));
  };
  p.gradient = [&inst](std::span<const double> x, const assignment &theta, std::span<double> out) {
    const vec d = inst.demand(theta);
    for (std::size_t i = 0; i < inst.n; ++i)
      out[i] = inst.order_cost[i] - (d[i] > x[i] ? inst.backorder_cost[i] : 0.0) +
               (x[i] > d[i] ? inst.holding_cost[i] : 0.0);
  };
  return p;
}

/// Decision variable is the upgrade dg; conductance is g0 + dg.
inline stochastic_problem make_problem(const network_instance &inst, double regularization = 0.0) {
  stochastic_problem p;
  p.dim = inst.edges.size();
  p.model = &inst.model;
  p.regularization = regularization;
  auto conductance = [&inst](std::span<const double> dg) {
    vec g(inst.base_conductance);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::max(0.0, g[i] + dg[i]);
    return g;
  };
  p.value = [&inst, conductance](std::span<const double> dg, const assignment &theta) {
    return commute_time(inst, conductance(dg), theta);
  };
  p.gradient = [&inst, conductance](std::span<const double> dg, const assignment &theta,
                                    std::span<double> out) {
    const vec gr = commute_gradient(inst, conductance(dg), theta);
    std::copy(gr.begin(), gr.end(), out.begin());
  };
  return p;
}

inline stochastic_problem make_problem(const quadratic_toy &toy) {
  stochastic_problem p;
  p.dim = toy.dim();
  p.model = &toy.model;
  p.value = [](std::span<const double> x, const assignment &theta) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += 0.5 * (x[i] - theta[i]) * (x[i] - theta[i]);
    return s;
  };
  p.gradient = [](std::span<const double> x, const assignment &theta, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - theta[i];
  };
  return p;
}

/// Exact E_theta f(x, theta) with the distribution enumerated once.
class exact_evaluator {
 public:
  exact_evaluator(const stochastic_problem &p, std::size_t cap = default_enumeration_cap)
      : problem_(p), dist_(std::make_shared<enumerated_distribution>(*p.model, cap)) {}

  double operator()(std::span<const double> x) const {
    const std::size_t n = dist_->num_vars();
    assignment a(n);
    return dist_->expectation_packed([&](std::uint64_t s) {
      for (std::size_t i = 0; i < n; ++i) a[i] = (s >> i) & 1u;
      return problem_.value(x, a);
    });
  }

 private:
  stochastic_problem problem_;
  std::shared_ptr<const enumerated_distribution> dist_;
};

inline double evaluate_objective_exact(const inventory_instance &inst, std::span<const double> x,
                                       std::size_t cap = default_enumeration_cap) {
  return exact_evaluator(make_problem(inst), cap)(x);
}

inline double evaluate_objective_exact(const network_instance &inst, std::span<const double> dg,
                                       std::size_t cap = default_enumeration_cap) {
  return exact_evaluator(make_problem(inst), cap)(dg);
}

// ---------------------------------------------------------------------------
// Initial points

/// |N(5, 3)| per coordinate, then projected into C.
inline vec initial_inventory_point(std::size_t n, const constraint_set &c, rng_type &rng) {
  std::normal_distribution<double> nd(5.0, 3.0);
  vec x(n);
  for (double &v : x) v = std::abs(nd(rng));
  return project(c, x);
}

/// |N(0, 1)| per coordinate, then projected into C.
inline vec initial_network_point(std::size_t edges, const constraint_set &c, rng_type &rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  vec x(edges);
  for (double &v : x) v = std::abs(nd(rng));
  return project(c, x);
}

}  // namespace xorpgd
