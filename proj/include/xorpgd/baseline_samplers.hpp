#pragma once

// Comparison samplers: systematic-scan Gibbs and loopy belief propagation
// with independent per-variable sampling from the beliefs.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "factor_graph.hpp"
#include "xor_sampling.hpp"

namespace xorpgd {

struct gibbs_config {
  std::size_t burn_in = 100;  // sweeps before the first emitted sample
  std::size_t thin = 30;      // sweeps between emitted samples

  void validate() const {
    if (thin < 1) throw std::invalid_argument("gibbs: thin must be >= 1");
  }
};

struct bp_config {
  std::size_t max_iters = 20;
  double damping = 0.0;
  double tolerance = 1e-8;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("bp: max_iters must be >= 1");
    if (!(damping >= 0.0 && damping < 1.0))
      throw std::invalid_argument("bp: damping must lie in [0, 1)");
  }
};

/// P(theta_i = 1 | rest), using only the factors that touch i.
inline double gibbs_conditional(const factor_graph &fg, const assignment &a,
                                std::size_t i) {
  if (i >= fg.num_vars()) throw std::out_of_range("gibbs_conditional: variable index");
  fg.check_assignment(a);
  assignment x = a;
  double l0 = 0.0, l1 = 0.0;
  for (std::size_t k : fg.factors_of(i)) {
    const auto &f = fg.factors()[k];
    x[i] = 0;
    l0 += fg.log_table(k)[f.entry_index(x)];
    x[i] = 1;
    l1 += fg.log_table(k)[f.entry_index(x)];
  }
  // 1 / (1 + exp(l0 - l1))
  return 1.0 / (1.0 + std::exp(l0 - l1));
}

/// A persistent systematic-scan chain. The first emission follows `burn_in`
/// sweeps; subsequent emissions are `thin` sweeps apart.
class gibbs_chain {
 public:
  gibbs_chain(const factor_graph &fg, gibbs_config cfg, rng_type &rng)
      : fg_(&fg), cfg_(cfg), state_(fg.num_vars()) {
    cfg_.validate();
    for (auto &v : state_) v = uniform01(rng) < 0.5 ? 1 : 0;
  }

  void sweep(rng_type &rng) {
    for (std::size_t i = 0; i < state_.size(); ++i) {
      const double p1 = gibbs_conditional(*fg_, state_, i);
      state_[i] = uniform01(rng) < p1 ? 1 : 0;
    }
  }

  const assignment &next(rng_type &rng) {
    const std::size_t sweeps = burned_ ? cfg_.thin : cfg_.burn_in;
    for (std::size_t s = 0; s < sweeps; ++s) sweep(rng);
    burned_ = true;
    return state_;
  }

  std::vector<assignment> draw(std::size_t count, rng_type &rng) {
    std::vector<assignment> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) out.push_back(next(rng));
    return out;
  }

  const assignment &state() const { return state_; }

 private:
  const factor_graph *fg_;
  gibbs_config cfg_;
  assignment state_;
  bool burned_ = false;
};

inline std::vector<assignment> gibbs_sample(const factor_graph &fg, const gibbs_config &cfg,
                                            std::size_t count, rng_type &rng) {
  if (count < 1) throw std::invalid_argument("gibbs_sample: count must be >= 1");
  gibbs_chain chain(fg, cfg, rng);
  return chain.draw(count, rng);
}

struct bp_result {
  std::vector<double> marginals;  // belief that theta_i = 1
  bool converged = false;
  std::size_t iterations = 0;
};

namespace detail {

using log_msg = std::array<double, 2>;

inline void normalize(log_msg &m) {
  const double hi = std::max(m[0], m[1]);
  const double z = hi + std::log(std::exp(m[0] - hi) + std::exp(m[1] - hi));
  m[0] -= z;
  m[1] -= z;
}

}  // namespace detail

/// Flooding-schedule sum-product in log space. Stops when the largest change
/// of any normalized message probability falls below the tolerance.
inline bp_result bp_marginals(const factor_graph &fg, const bp_config &cfg = {}) {
  using detail::log_msg;
  cfg.validate();
  const auto &fs = fg.factors();
  // Edge (k, j): factor k, scope position j.
  std::vector<std::vector<log_msg>> to_var(fs.size()), to_fac(fs.size());
  for (std::size_t k = 0; k < fs.size(); ++k) {
    to_var[k].assign(fs[k].scope.size(), {std::log(0.5), std::log(0.5)});
    to_fac[k].assign(fs[k].scope.size(), {std::log(0.5), std::log(0.5)});
  }

  bp_result res;
  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    res.iterations = it;
    double change = 0.0;
    // factor -> variable
    for (std::size_t k = 0; k < fs.size(); ++k) {
      const auto &f = fs[k];
      const auto &lt = fg.log_table(k);
      const std::size_t s = f.scope.size();
      for (std::size_t j = 0; j < s; ++j) {
        log_msg acc{-INFINITY, -INFINITY};
        for (std::size_t e = 0; e < lt.size(); ++e) {
          double v = lt[e];
          for (std::size_t o = 0; o < s; ++o) {
            if (o == j) continue;
            v += to_fac[k][o][(e >> (s - 1 - o)) & 1u];
          }
          const std::size_t xj = (e >> (s - 1 - j)) & 1u;
          const double hi = std::max(acc[xj], v);
          acc[xj] = hi == -INFINITY ? v
                                    : hi + std::log(std::exp(acc[xj] - hi) + std::exp(v - hi));
        }
        detail::normalize(acc);
        log_msg &old = to_var[k][j];
        if (cfg.damping > 0.0) {
          for (int x = 0; x < 2; ++x)
            acc[x] = (1.0 - cfg.damping) * acc[x] + cfg.damping * old[x];
          detail::normalize(acc);
        }
        change = std::max(change, std::abs(std::exp(acc[1]) - std::exp(old[1])));
        old = acc;
      }
    }
    // variable -> factor
    for (std::size_t v = 0; v < fg.num_vars(); ++v) {
      const auto &adj = fg.factors_of(v);
      for (std::size_t k : adj) {
        log_msg m{0.0, 0.0};
        for (std::size_t k2 : adj) {
          if (k2 == k) continue;
          const auto &sc = fs[k2].scope;
          for (std::size_t j = 0; j < sc.size(); ++j)
            if (sc[j] == v) {
              m[0] += to_var[k2][j][0];
              m[1] += to_var[k2][j][1];
            }
        }
        detail::normalize(m);
        const auto &sc = fs[k].scope;
        for (std::size_t j = 0; j < sc.size(); ++j)
          if (sc[j] == v) {
            change = std::max(change, std::abs(std::exp(m[1]) - std::exp(to_fac[k][j][1])));
            to_fac[k][j] = m;
          }
      }
    }
    if (change < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }

  res.marginals.assign(fg.num_vars(), 0.5);
  for (std::size_t v = 0; v < fg.num_vars(); ++v) {
    log_msg b{0.0, 0.0};
    for (std::size_t k : fg.factors_of(v)) {
      const auto &sc = fs[k].scope;
      for (std::size_t j = 0; j < sc.size(); ++j)
        if (sc[j] == v) {
          b[0] += to_var[k][j][0];
          b[1] += to_var[k][j][1];
        }
    }
    detail::normalize(b);
    res.marginals[v] = std::exp(b[1]);
  }
  return res;
}

/// Mean-field product sampling: each variable drawn independently from its belief.
inline std::vector<assignment> bp_sample(const std::vector<double> &marginals,
                                         std::size_t count, rng_type &rng) {
  for (double p : marginals)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bp_sample: belief outside [0, 1]");
  std::vector<assignment> out(count, assignment(marginals.size()));
  for (auto &a : out)
    for (std::size_t i = 0; i < marginals.size(); ++i) a[i] = uniform01(rng) < marginals[i];
  return out;
}

}  // namespace xorpgd
