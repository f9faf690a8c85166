#pragma once

// Projected stochastic gradient methods driven by sampled gradients:
// XOR-PGD with the 1/k and 2/(k+1) schedules, the unprojected and
// multiplier-penalized SGD baselines, and the linearized augmented-Lagrangian
// primal-dual method for affine equality constraints.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "baseline_samplers.hpp"
#include "factor_graph.hpp"
#include "numerics.hpp"
#include "xor_sampling.hpp"

namespace xorpgd {

class optimizer_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Constraint sets and projection

/// {x >= 0, w^T x <= cap}
struct nonneg_halfspace {
  vec weights;
  double cap = 0.0;
};

struct box {
  vec lower, upper;  // entries may be infinite
};

/// {x : A x <= b}
struct polyhedron {
  dense_matrix a;
  vec b;
};

/// {x : A x + b = 0}
struct equality_affine {
  dense_matrix a;
  vec b;
};

using constraint_set = std::variant<nonneg_halfspace, box, polyhedron, equality_affine>;

inline std::size_t dimension(const constraint_set &c) {
  return std::visit(
      [](const auto &s) -> std::size_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, nonneg_halfspace>) return s.weights.size();
        else if constexpr (std::is_same_v<T, box>) return s.lower.size();
        else return s.a.cols();
      },
      c);
}

inline void validate(const constraint_set &c) {
  std::visit(
      [](const auto &s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, nonneg_halfspace>) {
          if (!(s.cap >= 0.0)) throw optimizer_error("nonneg halfspace: cap must be >= 0");
          for (double w : s.weights)
            if (!(w > 0.0)) throw optimizer_error("nonneg halfspace: weights must be positive");
        } else if constexpr (std::is_same_v<T, box>) {
          if (s.lower.size() != s.upper.size()) throw optimizer_error("box: bound size mismatch");
          for (std::size_t i = 0; i < s.lower.size(); ++i)
            if (!(s.lower[i] <= s.upper[i])) throw optimizer_error("box: lower > upper");
        } else {
          if (s.a.rows() != s.b.size()) throw optimizer_error("affine set: A/b shape mismatch");
        }
      },
      c);
}

/// Largest constraint violation (0 when x is feasible).
inline double feasibility_residual(const constraint_set &c, std::span<const double> x) {
  return std::visit(
      [&](const auto &s) -> double {
        using T = std::decay_t<decltype(s)>;
        double r = 0.0;
        if constexpr (std::is_same_v<T, nonneg_halfspace>) {
          for (double v : x) r = std::max(r, -v);
          r = std::max(r, dot(s.weights, x) - s.cap);
        } else if constexpr (std::is_same_v<T, box>) {
          for (std::size_t i = 0; i < x.size(); ++i)
            r = std::max({r, s.lower[i] - x[i], x[i] - s.upper[i]});
        } else if constexpr (std::is_same_v<T, polyhedron>) {
          for (std::size_t i = 0; i < s.a.rows(); ++i)
            r = std::max(r, dot(s.a.row(i), x) - s.b[i]);
        } else {
          for (std::size_t i = 0; i < s.a.rows(); ++i)
            r = std::max(r, std::abs(dot(s.a.row(i), x) + s.b[i]));
        }
        return r;
      },
      c);
}

inline bool contains(const constraint_set &c, std::span<const double> x, double tol = 1e-8) {
  return feasibility_residual(c, x) <= tol;
}

namespace detail {

/// Projection onto {y >= 0, w^T y <= cap}: y(lambda) = max(0, x - lambda w).
/// Bisection on lambda identifies the active coordinates; lambda is then
/// recomputed in closed form on that support.
inline vec project_nonneg_halfspace(const nonneg_halfspace &c, std::span<const double> x) {
  const std::size_t n = x.size();
  vec y(n);
  auto at = [&](double lam) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = std::max(0.0, x[i] - lam * c.weights[i]);
      s += c.weights[i] * y[i];
    }
    return s;
  };
  if (at(0.0) <= c.cap) return y;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, x[i] / c.weights[i]);
  for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (at(mid) > c.cap) lo = mid;
    else hi = mid;
  }
  // Exact lambda on the support of y(hi).
  at(hi);
  double swx = 0.0, sww = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (y[i] > 0.0) {
      swx += c.weights[i] * x[i];
      sww += c.weights[i] * c.weights[i];
    }
  if (sww > 0.0) {
    const double lam = (swx - c.cap) / sww;
    if (lam >= lo - 1e-9 * std::max(1.0, hi) && lam <= hi + 1e-9 * std::max(1.0, hi)) at(lam);
  }
  return y;
}

/// Dykstra's alternating projections over the halfspaces a_i^T x <= b_i.
inline vec project_polyhedron(const polyhedron &c, std::span<const double> x,
                              double tol = 1e-8, std::size_t max_sweeps = 100000) {
  const std::size_t m = c.a.rows(), n = x.size();
  vec y(x.begin(), x.end());
  std::vector<vec> incr(m, vec(n, 0.0));
  vec norms(m);
  for (std::size_t i = 0; i < m; ++i) norms[i] = dot(c.a.row(i), c.a.row(i));
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double moved = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (norms[i] == 0.0) {
        if (c.b[i] < 0.0) throw optimizer_error("polyhedron: infeasible zero row");
        continue;
      }
      vec z(n);
      for (std::size_t j = 0; j < n; ++j) z[j] = y[j] + incr[i][j];
      const double viol = dot(c.a.row(i), z) - c.b[i];
      vec p = z;
      if (viol > 0.0)
        for (std::size_t j = 0; j < n; ++j) p[j] -= viol / norms[i] * c.a(i, j);
      for (std::size_t j = 0; j < n; ++j) {
        incr[i][j] = z[j] - p[j];
        moved = std::max(moved, std::abs(p[j] - y[j]));
      }
      y = std::move(p);
    }
    double resid = 0.0;
    for (std::size_t i = 0; i < m; ++i) resid = std::max(resid, dot(c.a.row(i), y) - c.b[i]);
    if (moved < tol && resid < tol) return y;
  }
  throw optimizer_error("polyhedron projection: Dykstra iteration cap reached");
}

inline vec project_affine(const equality_affine &c, std::span<const double> x) {
  // x - A^T (A A^T)^{-1} (A x + b)
  vec r = c.a.multiply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += c.b[i];
  dense_matrix aat(c.a.rows(), c.a.rows());
  for (std::size_t i = 0; i < c.a.rows(); ++i)
    for (std::size_t j = 0; j < c.a.rows(); ++j) aat(i, j) = dot(c.a.row(i), c.a.row(j));
  const vec mult = solve_spd(aat, r);
  const vec corr = c.a.multiply_transposed(mult);
  vec y(x.begin(), x.end());
  for (std::size_t j = 0; j < y.size(); ++j) y[j] -= corr[j];
  return y;
}

}  // namespace detail

/// Euclidean projection argmin_{y in C} 1/2 ||x - y||^2.
inline vec project(const constraint_set &c, std::span<const double> x) {
  if (dimension(c) != x.size()) throw optimizer_error("project: dimension mismatch");
  return std::visit(
      [&](const auto &s) -> vec {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, nonneg_halfspace>) {
          return detail::project_nonneg_halfspace(s, x);
        } else if constexpr (std::is_same_v<T, box>) {
          vec y(x.begin(), x.end());
          for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(y[i], s.lower[i], s.upper[i]);
          return y;
        } else if constexpr (std::is_same_v<T, polyhedron>) {
          return detail::project_polyhedron(s, x);
        } else {
          return detail::project_affine(s, x);
        }
      },
      c);
}

// ---------------------------------------------------------------------------
// Problems and gradient estimation

/// min_x E_theta f(x, theta) + 1/2 regularization ||x||^2.
struct stochastic_problem {
  std::size_t dim = 0;
  const factor_graph *model = nullptr;
  std::function<double(std::span<const double>, const assignment &)> value;
  std::function<void(std::span<const double>, const assignment &, std::span<double>)> gradient;
  double regularization = 0.0;
};

enum class estimator_kind { xor_sampler, gibbs, bp, exact };

inline const char *to_string(estimator_kind k) {
  switch (k) {
    case estimator_kind::xor_sampler: return "xor";
    case estimator_kind::gibbs: return "gibbs";
    case estimator_kind::bp: return "bp";
    case estimator_kind::exact: return "exact";
  }
  return "?";
}

struct estimator_config {
  estimator_kind kind = estimator_kind::xor_sampler;
  std::size_t samples = 10;  // N
  xor_sampler_config xor_sampler;
  gibbs_config gibbs;
  bp_config bp;
  std::size_t enumeration_cap = default_enumeration_cap;
};

struct gradient_estimate {
  vec mean;
  std::size_t attempts = 0;     // sampler attempts (XOR) or samples drawn
  double variance = 0.0;        // trace of the per-sample gradient covariance
};

/// Averages N per-sample gradients, or returns the exact expectation.
class gradient_estimator {
 public:
  gradient_estimator(const stochastic_problem &problem, estimator_config cfg)
      : problem_(&problem), cfg_(std::move(cfg)) {
    if (!problem.model) throw optimizer_error("estimator: problem has no model");
    if (cfg_.samples < 1) throw optimizer_error("estimator: N must be >= 1");
    switch (cfg_.kind) {
      case estimator_kind::xor_sampler:
        xor_ = std::make_unique<xor_sampler>(*problem.model, cfg_.xor_sampler);
        break;
      case estimator_kind::bp:
        beliefs_ = bp_marginals(*problem.model, cfg_.bp).marginals;
        break;
      case estimator_kind::exact:
        exact_ = std::make_unique<enumerated_distribution>(*problem.model, cfg_.enumeration_cap);
        break;
      case estimator_kind::gibbs:
        cfg_.gibbs.validate();
        break;
    }
  }
  gradient_estimator(stochastic_problem &&, estimator_config) = delete;

  const estimator_config &config() const { return cfg_; }
  xor_sampler *sampler() { return xor_.get(); }

  /// Per-run state: the XOR constraint count is re-estimated and the Gibbs
  /// chain restarts with a fresh burn-in.
  void begin_run(rng_type &rng) {
    if (xor_) {
      xor_->reset_constraint_count();
      xor_->estimate_constraint_count(rng);
    }
    chain_.reset();
  }

  std::vector<assignment> draw(rng_type &rng, std::size_t &attempts) {
    switch (cfg_.kind) {
      case estimator_kind::xor_sampler: {
        auto b = xor_->sample_batch(cfg_.samples, rng);
        attempts = b.attempts;
        return std::move(b.samples);
      }
      case estimator_kind::gibbs:
        if (!chain_) chain_.emplace(*problem_->model, cfg_.gibbs, rng);
        attempts = cfg_.samples;
        return chain_->draw(cfg_.samples, rng);
      case estimator_kind::bp:
        attempts = cfg_.samples;
        return bp_sample(beliefs_, cfg_.samples, rng);
      case estimator_kind::exact:
        break;
    }
    throw optimizer_error("estimator: exact mode does not draw samples");
  }

  gradient_estimate estimate(std::span<const double> x, rng_type &rng) {
    const std::size_t d = problem_->dim;
    gradient_estimate out;
    out.mean.assign(d, 0.0);
    vec g(d), sq(d, 0.0);
    if (cfg_.kind == estimator_kind::exact) {
      const auto &probs = exact_->probabilities();
      assignment a(exact_->num_vars());
      for (std::uint64_t s = 0; s < probs.size(); ++s) {
        if (probs[s] == 0.0) continue;
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = (s >> i) & 1u;
        problem_->gradient(x, a, g);
        for (std::size_t j = 0; j < d; ++j) {
          out.mean[j] += probs[s] * g[j];
          sq[j] += probs[s] * g[j] * g[j];
        }
      }
    } else {
      const auto samples = draw(rng, out.attempts);
      const double inv = 1.0 / static_cast<double>(samples.size());
      for (const auto &a : samples) {
        problem_->gradient(x, a, g);
        for (std::size_t j = 0; j < d; ++j) {
          out.mean[j] += inv * g[j];
          sq[j] += inv * g[j] * g[j];
        }
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(out.mean[j])) throw optimizer_error("estimator: non-finite gradient");
      out.variance += std::max(0.0, sq[j] - out.mean[j] * out.mean[j]);
      out.mean[j] += problem_->regularization * x[j];
    }
    return out;
  }

 private:
  const stochastic_problem *problem_;
  estimator_config cfg_;
  std::unique_ptr<xor_sampler> xor_;
  std::optional<gibbs_chain> chain_;
  std::vector<double> beliefs_;
  std::unique_ptr<enumerated_distribution> exact_;
};

inline gradient_estimate estimate_gradient(gradient_estimator &est, std::span<const double> x,
                                           rng_type &rng) {
  return est.estimate(x, rng);
}

// ---------------------------------------------------------------------------
// Schedules and averaging

enum class schedule_kind {
  plain,      // t_k = rho*kappa/(mu k), uniform average
  improved,   // t_k = 2 rho*kappa/(mu (k+1)), k-weighted average
  piecewise,  // t_0, divided by `decay_factor` at each milestone, uniform average
};

inline const char *to_string(schedule_kind s) {
  switch (s) {
    case schedule_kind::plain: return "plain";
    case schedule_kind::improved: return "improved";
    case schedule_kind::piecewise: return "piecewise";
  }
  return "?";
}

struct step_schedule {
  schedule_kind kind = schedule_kind::plain;
  double mu = 1.0;
  double rho_kappa = std::sqrt(2.0);
  double initial = 0.1;                       // piecewise only
  std::vector<std::size_t> milestones{50, 100};
  double decay_factor = 10.0;

  double at(std::size_t k) const {
    if (k < 1) throw optimizer_error("step schedule: k must be >= 1");
    switch (kind) {
      case schedule_kind::plain: return rho_kappa / (mu * static_cast<double>(k));
      case schedule_kind::improved: return 2.0 * rho_kappa / (mu * static_cast<double>(k + 1));
      case schedule_kind::piecewise: {
        double t = initial;
        for (std::size_t m : milestones)
          if (k > m) t /= decay_factor;
        return t;
      }
    }
    return 0.0;
  }
};

/// Output rule paired with the schedule: k-weighted 2 sum k x_k / (K (K+1))
/// for the improved schedule, uniform otherwise.
inline vec average_iterates(const std::vector<vec> &iterates, schedule_kind kind) {
  if (iterates.empty()) throw optimizer_error("average_iterates: no iterates");
  const std::size_t K = iterates.size(), d = iterates.front().size();
  vec out(d, 0.0);
  for (std::size_t k = 1; k <= K; ++k) {
    const double w = kind == schedule_kind::improved
                         ? 2.0 * static_cast<double>(k) / (static_cast<double>(K) * static_cast<double>(K + 1))
                         : 1.0 / static_cast<double>(K);
    for (std::size_t j = 0; j < d; ++j) out[j] += w * iterates[k - 1][j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run tracing

struct trace_record {
  std::size_t k = 0;
  double step = 0.0;
  vec x;
  std::size_t attempts = 0;
  double feasibility_residual = 0.0;
  std::optional<double> objective;
};

struct run_trace {
  std::vector<trace_record> records;
  vec output;
  double output_residual = 0.0;
  std::optional<double> output_objective;
  double sigma2_hat = 0.0;  // max over iterations of the sample-gradient variance
  double eps2_hat = 0.0;    // max over iterations of ||mean gradient||^2
  std::size_t total_attempts = 0;
  bool time_limited = false;
  std::optional<vec> best_point;
  std::optional<double> best_objective;
  std::vector<vec> multipliers;  // dual iterates, when the method has any
};

struct run_options {
  std::size_t iterations = 200;  // K
  vec x0;
  /// Optional objective evaluator (e.g. exact expectation); evaluated at
  /// every `evaluate_every`-th iterate and at the output.
  std::function<double(std::span<const double>)> objective;
  std::size_t evaluate_every = 1;
  std::optional<double> time_limit_s;
  /// Set used for feasibility reporting by methods that do not project.
  std::optional<constraint_set> report_set;
};

namespace detail {

class run_clock {
 public:
  explicit run_clock(std::optional<double> limit)
      : limit_(limit), start_(std::chrono::steady_clock::now()) {}
  bool expired() const {
    if (!limit_) return false;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count() > *limit_;
  }

 private:
  std::optional<double> limit_;
  std::chrono::steady_clock::time_point start_;
};

inline void note_estimate(run_trace &tr, const gradient_estimate &g) {
  tr.sigma2_hat = std::max(tr.sigma2_hat, g.variance);
  tr.eps2_hat = std::max(tr.eps2_hat, dot(g.mean, g.mean));
  tr.total_attempts += g.attempts;
}

inline void record(run_trace &tr, const run_options &opt, std::size_t k, double step,
                   const vec &x, std::size_t attempts, double residual) {
  trace_record r{k, step, x, attempts, residual, std::nullopt};
  if (opt.objective && opt.evaluate_every > 0 && (k - 1) % opt.evaluate_every == 0) {
    r.objective = opt.objective(x);
    if (!tr.best_objective || *r.objective < *tr.best_objective) {
      tr.best_objective = r.objective;
      tr.best_point = x;
    }
  }
  tr.records.push_back(std::move(r));
}

inline void finish(run_trace &tr, const run_options &opt, vec output, double residual) {
  tr.output = std::move(output);
  tr.output_residual = residual;
  if (opt.objective) {
    tr.output_objective = opt.objective(tr.output);
    if (!tr.best_objective || *tr.output_objective <= *tr.best_objective) {
      tr.best_objective = tr.output_objective;
      tr.best_point = tr.output;
    }
  }
}

inline void check_dim(const stochastic_problem &p, const vec &x0) {
  if (x0.size() != p.dim) throw optimizer_error("initial point has wrong dimension");
}

}  // namespace detail

struct pgd_config {
  run_options run;
  step_schedule schedule;
};

/// Projected stochastic gradient descent: for k = 1..K-1 estimate the
/// gradient at x_k from N samples, step by t_k, project onto C. Returns the
/// schedule's average of x_1..x_K. Every iterate is feasible.
inline run_trace xor_pgd(const stochastic_problem &problem, gradient_estimator &estimator,
                         const constraint_set &c, const pgd_config &cfg, rng_type &rng) {
  validate(c);
  detail::check_dim(problem, cfg.run.x0);
  if (cfg.run.iterations < 1) throw optimizer_error("xor_pgd: K must be >= 1");
  if (!(cfg.schedule.mu > 0.0)) throw optimizer_error("xor_pgd: mu must be positive");
  if (!contains(c, cfg.run.x0, 1e-8)) throw optimizer_error("xor_pgd: x0 is not in C");
  estimator.begin_run(rng);

  run_trace tr;
  detail::run_clock clock(cfg.run.time_limit_s);
  std::vector<vec> iterates{cfg.run.x0};
  vec x = cfg.run.x0;
  for (std::size_t k = 1; k < cfg.run.iterations; ++k) {
    if (clock.expired()) {
      tr.time_limited = true;
      break;
    }
    const gradient_estimate g = estimator.estimate(x, rng);
    detail::note_estimate(tr, g);
    const double t = cfg.schedule.at(k);
    detail::record(tr, cfg.run, k, t, x, g.attempts, feasibility_residual(c, x));
    vec step(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) step[j] = x[j] - t * g.mean[j];
    x = project(c, step);
    iterates.push_back(x);
  }
  detail::record(tr, cfg.run, iterates.size(), cfg.schedule.at(iterates.size()), x, 0,
                 feasibility_residual(c, x));
  vec out = average_iterates(iterates, cfg.schedule.kind);
  const double resid = feasibility_residual(c, out);
  detail::finish(tr, cfg.run, std::move(out), resid);
  return tr;
}

/// Largest fixed step admitted by the unconstrained convergence bound,
/// (2 - (rho kappa)^2) / (L rho kappa). Zero at rho kappa = sqrt(2).
inline double max_sgd_step(double smoothness, double rho_kappa) {
  return std::max(0.0, (2.0 - rho_kappa * rho_kappa) / (smoothness * rho_kappa));
}

struct sgd_config {
  run_options run;
  step_schedule schedule{schedule_kind::piecewise};
};

/// Unprojected SGD with uniform averaging of x_1..x_K.
inline run_trace xor_sgd(const stochastic_problem &problem, gradient_estimator &estimator,
                         const sgd_config &cfg, rng_type &rng) {
  detail::check_dim(problem, cfg.run.x0);
  if (cfg.run.iterations < 1) throw optimizer_error("xor_sgd: K must be >= 1");
  estimator.begin_run(rng);
  auto resid = [&](const vec &x) {
    return cfg.run.report_set ? feasibility_residual(*cfg.run.report_set, x) : 0.0;
  };
  run_trace tr;
  detail::run_clock clock(cfg.run.time_limit_s);
  std::vector<vec> iterates{cfg.run.x0};
  vec x = cfg.run.x0;
  for (std::size_t k = 1; k < cfg.run.iterations; ++k) {
    if (clock.expired()) {
      tr.time_limited = true;
      break;
    }
    const gradient_estimate g = estimator.estimate(x, rng);
    detail::note_estimate(tr, g);
    const double t = cfg.schedule.at(k);
    detail::record(tr, cfg.run, k, t, x, g.attempts, resid(x));
    for (std::size_t j = 0; j < x.size(); ++j) x[j] -= t * g.mean[j];
    iterates.push_back(x);
  }
  detail::record(tr, cfg.run, iterates.size(), cfg.schedule.at(iterates.size()), x, 0, resid(x));
  vec out = average_iterates(iterates, schedule_kind::plain);
  const double r = resid(out);
  detail::finish(tr, cfg.run, std::move(out), r);
  return tr;
}

struct penalty_config {
  run_options run;
  step_schedule step{schedule_kind::piecewise, 1.0, std::sqrt(2.0), 0.1, {50, 100}, 10.0};
  step_schedule dual_step{schedule_kind::piecewise, 1.0, std::sqrt(2.0), 10.0, {50, 100}, 10.0};
};

/// SGD on the min-max form min_{x in S} max_{mu >= 0} E f + mu^T (A x - b):
/// primal descent with simple bounds S enforced by clipping, dual ascent
/// with multipliers clipped at zero. The linear rows are only penalized, so
/// the output can violate them.
inline run_trace penalized_sgd(const stochastic_problem &problem, gradient_estimator &estimator,
                               const constraint_set &c, const penalty_config &cfg,
                               rng_type &rng) {
  validate(c);
  detail::check_dim(problem, cfg.run.x0);
  if (cfg.run.iterations < 1) throw optimizer_error("penalized_sgd: K must be >= 1");
  const std::size_t d = problem.dim;

  // Split C into clip bounds and penalized rows.
  vec lower(d, -std::numeric_limits<double>::infinity());
  vec upper(d, std::numeric_limits<double>::infinity());
  std::vector<vec> rows;
  vec rhs;
  if (const auto *h = std::get_if<nonneg_halfspace>(&c)) {
    std::fill(lower.begin(), lower.end(), 0.0);
    rows.push_back(h->weights);
    rhs.push_back(h->cap);
  } else if (const auto *bx = std::get_if<box>(&c)) {
    lower = bx->lower;
    upper = bx->upper;
  } else if (const auto *p = std::get_if<polyhedron>(&c)) {
    for (std::size_t i = 0; i < p->a.rows(); ++i) {
      rows.emplace_back(p->a.row(i).begin(), p->a.row(i).end());
      rhs.push_back(p->b[i]);
    }
  } else {
    throw optimizer_error("penalized_sgd: equality constraints need the primal-dual method");
  }

  estimator.begin_run(rng);
  run_trace tr;
  detail::run_clock clock(cfg.run.time_limit_s);
  vec mult(rows.size(), 0.0);
  std::vector<vec> iterates{cfg.run.x0};
  vec x = cfg.run.x0;
  for (std::size_t k = 1; k < cfg.run.iterations; ++k) {
    if (clock.expired()) {
      tr.time_limited = true;
      break;
    }
    gradient_estimate g = estimator.estimate(x, rng);
    detail::note_estimate(tr, g);
    const double t = cfg.step.at(k), eta = cfg.dual_step.at(k);
    detail::record(tr, cfg.run, k, t, x, g.attempts, feasibility_residual(c, x));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) g.mean[j] += mult[i] * rows[i][j];
    for (std::size_t j = 0; j < d; ++j) x[j] = std::clamp(x[j] - t * g.mean[j], lower[j], upper[j]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      mult[i] = std::max(0.0, mult[i] + eta * (dot(rows[i], x) - rhs[i]));
    tr.multipliers.push_back(mult);
    iterates.push_back(x);
  }
  detail::record(tr, cfg.run, iterates.size(), cfg.step.at(iterates.size()), x, 0,
                 feasibility_residual(c, x));
  vec out = average_iterates(iterates, schedule_kind::plain);
  const double r = feasibility_residual(c, out);
  detail::finish(tr, cfg.run, std::move(out), r);
  return tr;
}

struct al_config {
  run_options run;
  double beta = 1.0;        // penalty
  double tau = 1.0;         // dual-ball radius (reporting only)
  double domain_diameter = 1.0;  // D_X
  double gradient_bound = 1.0;   // M
  double rho_kappa = std::sqrt(2.0);

  double eta(std::size_t k) const {
    return domain_diameter / (gradient_bound * std::sqrt(2.0 * static_cast<double>(k)));
  }
  void validate() const {
    if (!(beta > 0.0)) throw optimizer_error("penalty must be positive");
    if (!(tau > 0.0) || !(domain_diameter > 0.0) || !(gradient_bound > 0.0))
      throw optimizer_error("augmented Lagrangian: tau, D_X and M must be positive");
  }
};

/// Linearized augmented-Lagrangian primal-dual method for A x + b = 0:
///   x_{k+1} = argmin g_k^T x + lambda_k^T (A x + b) + beta/2 ||A x + b||^2
///                     + ||x - x_k||^2 / (2 eta_{k+1})
///   lambda_{k+1} = lambda_k + beta (A x_{k+1} + b)
/// The x-step is one SPD solve with (beta A^T A + I / eta_{k+1}). Output is
/// the uniform average of x_1..x_K.
inline run_trace primal_dual_al(const stochastic_problem &problem, const equality_affine &c,
                                const al_config &cfg, gradient_estimator &estimator,
                                rng_type &rng) {
  cfg.validate();
  detail::check_dim(problem, cfg.run.x0);
  if (c.a.cols() != problem.dim || c.a.rows() != c.b.size())
    throw optimizer_error("primal_dual_al: constraint shape mismatch");
  if (cfg.run.iterations < 1) throw optimizer_error("primal_dual_al: K must be >= 1");
  const std::size_t d = problem.dim, m = c.a.rows();
  dense_matrix ata(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t r = 0; r < m; ++r) ata(i, j) += c.a(r, i) * c.a(r, j);
  const constraint_set cs = c;

  estimator.begin_run(rng);
  run_trace tr;
  detail::run_clock clock(cfg.run.time_limit_s);
  vec lambda(m, 0.0);
  vec x = cfg.run.x0;
  std::vector<vec> iterates;
  for (std::size_t k = 0; k < cfg.run.iterations; ++k) {
    if (clock.expired()) {
      tr.time_limited = true;
      break;
    }
    const gradient_estimate g = estimator.estimate(x, rng);
    detail::note_estimate(tr, g);
    const double eta = cfg.eta(k + 1);
    detail::record(tr, cfg.run, k + 1, eta, x, g.attempts, feasibility_residual(cs, x));
    dense_matrix h = ata;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) h(i, j) *= cfg.beta;
    for (std::size_t i = 0; i < d; ++i) h(i, i) += 1.0 / eta;
    const vec at_lambda = c.a.multiply_transposed(lambda);
    const vec at_b = c.a.multiply_transposed(c.b);
    vec rhs(d);
    for (std::size_t j = 0; j < d; ++j)
      rhs[j] = x[j] / eta - g.mean[j] - at_lambda[j] - cfg.beta * at_b[j];
    try {
      x = solve_spd(h, rhs);
    } catch (const not_spd_error &) {
      throw optimizer_error("primal_dual_al: subproblem is not SPD (check beta and eta)");
    }
    vec r = c.a.multiply(x);
    for (std::size_t i = 0; i < m; ++i) lambda[i] += cfg.beta * (r[i] + c.b[i]);
    tr.multipliers.push_back(lambda);
    iterates.push_back(x);
  }
  if (iterates.empty()) iterates.push_back(x);
  vec out = average_iterates(iterates, schedule_kind::plain);
  const double resid = feasibility_residual(cs, out);
  detail::finish(tr, cfg.run, std::move(out), resid);
  return tr;
}

}  // namespace xorpgd
