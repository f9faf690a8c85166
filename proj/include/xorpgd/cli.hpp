#pragma once

// Command implementations behind the `xorpgd` tool. Each command validates
// its options, runs, and writes its outputs into an output directory.
// usage_error maps to exit code 2; anything else thrown maps to 3.

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "io.hpp"
#include "xorpgd.hpp"

namespace xorpgd::cli {

namespace fs = std::filesystem;

class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::uint64_t fnv1a(const std::string &s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string config_hash(const json &config) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(config.dump()));
  return buf;
}

/// CSV writer: config-hash comment line, then the header.
class csv_file {
 public:
  csv_file(const fs::path &path, const json &config, const std::vector<std::string> &header)
      : out_(path) {
    if (!out_) throw io_error("cannot write " + path.string());
    out_ << "# config-hash: " << config_hash(config) << '\n';
    row(header);
  }
  void row(const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline void write_json(const fs::path &path, const json &j) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline std::string bits(const assignment &a) {
  std::string s;
  for (auto v : a) s.push_back(v ? '1' : '0');
  return s;
}

// ---------------------------------------------------------------------------
// Shared option blocks

struct sampler_options {
  std::size_t pivot = 100;
  unsigned b = 7;
  double epsilon = 0.01;
  std::optional<double> rho_kappa;  // default sqrt(2)
  unsigned quantization = 8;
  std::size_t max_attempts = 10000;
  unsigned workers = 1;
  std::size_t burn_in = 100, thin = 30;
  std::size_t bp_iters = 20;
  double bp_damping = 0.0;
  std::size_t enumeration_cap = default_enumeration_cap;

  xor_sampler_config xor_config() const {
    xor_sampler_config c;
    try {
      c.discretization = {b, epsilon};
      c.discretization.validate();
      c.pivot = pivot;
      c.quantization = quantization;
      c.max_attempts = max_attempts;
      c.workers = workers;
      c.enumeration_cap = enumeration_cap;
      c.kappa = rho_kappa.value_or(std::sqrt(2.0)) / c.rho();
      c.validate();
      if (quantization < 1) throw sampler_error("quantization too coarse: q must be >= 1");
      gibbs().validate();
      bp().validate();
    } catch (const std::exception &e) {
      throw usage_error(e.what());
    }
    return c;
  }
  gibbs_config gibbs() const { return {burn_in, thin}; }
  bp_config bp() const { return {bp_iters, bp_damping, 1e-8}; }

  json to_json() const {
    return {{"pivot", pivot}, {"b", b}, {"epsilon", epsilon},
            {"rho_kappa", rho_kappa.value_or(std::sqrt(2.0))}, {"quantization", quantization},
            {"max_attempts", max_attempts}, {"workers", workers}, {"burn_in", burn_in},
            {"thin", thin}, {"bp_iters", bp_iters}, {"bp_damping", bp_damping},
            {"enumeration_cap", enumeration_cap}};
  }
};

inline estimator_kind parse_estimator(const std::string &s) {
  if (s == "xor") return estimator_kind::xor_sampler;
  if (s == "gibbs") return estimator_kind::gibbs;
  if (s == "bp") return estimator_kind::bp;
  if (s == "exact") return estimator_kind::exact;
  throw usage_error("unknown estimator '" + s + "' (valid: xor, gibbs, bp, exact)");
}

// ---------------------------------------------------------------------------
// sample

struct sample_options {
  std::string model;
  std::string sampler = "xor";  // xor | gibbs | bp
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
  std::string out = "out";
  sampler_options s;

  json to_json() const {
    return {{"command", "sample"}, {"model", model}, {"sampler", sampler}, {"samples", samples},
            {"seed", seed}, {"sampler_options", s.to_json()}};
  }
};

struct sample_report {
  std::vector<assignment> samples;
  std::size_t attempts = 0;
  std::optional<double> tv_distance;
};

inline sample_report cmd_sample(const sample_options &o) {
  if (o.samples < 1) throw usage_error("--samples must be >= 1");
  if (o.sampler != "xor" && o.sampler != "gibbs" && o.sampler != "bp")
    throw usage_error("unknown sampler '" + o.sampler + "' (valid: xor, gibbs, bp)");
  const factor_graph fg = load_uai_file(o.model);
  const json config = o.to_json();
  fs::create_directories(o.out);
  rng_type rng(o.seed);
  const auto t0 = std::chrono::steady_clock::now();

  sample_report rep;
  json extra = json::object();
  if (o.sampler == "xor") {
    xor_sampler sampler(fg, o.s.xor_config());
    const std::size_t cons = sampler.estimate_constraint_count(rng);
    auto batch = sampler.sample_batch(o.samples, rng);
    rep.samples = std::move(batch.samples);
    rep.attempts = batch.attempts;
    extra = {{"constraint_count", cons},
             {"oracle_calls", batch.oracle_calls + sampler.estimate_oracle_calls()},
             {"aux_bits", sampler.slices().aux_bits},
             {"tail_empty", sampler.discretized().tail_empty},
             {"rho", sampler.config().rho()},
             {"quantization_distortion", sampler.slices().distortion}};
  } else if (o.sampler == "gibbs") {
    rep.samples = gibbs_sample(fg, o.s.gibbs(), o.samples, rng);
    rep.attempts = o.samples;
  } else {
    const bp_result bp = bp_marginals(fg, o.s.bp());
    rep.samples = bp_sample(bp.marginals, o.samples, rng);
    rep.attempts = o.samples;
    extra = {{"bp_converged", bp.converged}, {"bp_iterations", bp.iterations}, {"beliefs", bp.marginals}};
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    std::ofstream out(fs::path(o.out) / "samples.txt");
    for (const auto &a : rep.samples) {
      for (std::size_t i = 0; i < a.size(); ++i) out << (i ? " " : "") << int(a[i]);
      out << '\n';
    }
  }
  if (fg.num_vars() <= o.s.enumeration_cap) {
    const enumerated_distribution dist(fg, o.s.enumeration_cap);
    std::map<std::uint64_t, std::size_t> counts;
    for (const auto &a : rep.samples) ++counts[pack(a)];
    csv_file csv(fs::path(o.out) / "frequencies.csv", config,
                 {"assignment", "exact_p", "empirical_p", "ratio"});
    double tv = 0.0;
    const double n = static_cast<double>(rep.samples.size());
    for (std::uint64_t s = 0; s < dist.size(); ++s) {
      const double p = dist.probability(s);
      const auto it = counts.find(s);
      const double phat = it == counts.end() ? 0.0 : static_cast<double>(it->second) / n;
      tv += 0.5 * std::abs(p - phat);
      if (p < 1e-6 && phat == 0.0) continue;
      csv.row({bits(unpack(s, fg.num_vars())), num(p), num(phat), p > 0 ? num(phat / p) : "inf"});
    }
    rep.tv_distance = tv;
  }
  json summary = {{"config", config}, {"config_hash", config_hash(config)},
                  {"num_vars", fg.num_vars()}, {"samples", rep.samples.size()},
                  {"attempts", rep.attempts},
                  {"acceptance_rate", static_cast<double>(rep.samples.size()) / static_cast<double>(rep.attempts)},
                  {"details", extra}};
  if (rep.tv_distance) summary["tv_distance"] = *rep.tv_distance;
  write_json(fs::path(o.out) / "summary.json", summary);
  write_json(fs::path(o.out) / "timing.json", {{"wall_seconds", wall}});
  return rep;
}

// ---------------------------------------------------------------------------
// optimize

inline const std::vector<std::string> &method_names() {
  static const std::vector<std::string> m{"xor-pgd", "ixor-pgd", "xor-sgd", "xor-sgd-penalty",
                                          "al-primal-dual"};
  return m;
}

struct optimize_options {
  std::string instance;           // JSON instance, or an edge list with --edges
  bool edge_list = false;
  std::string model;              // UAI failure model for edge lists
  std::string method = "ixor-pgd";
  std::string estimator = "xor";
  std::size_t samples = 10;       // N
  std::size_t iters = 200;        // K
  std::optional<double> mu;       // step-rule constant; default 1
  double mu_reg = 1e-3;
  double storage_pct = 100.0;
  double budget_pct = 100.0;
  std::optional<double> time_limit_s;
  std::optional<double> step0;    // piecewise initial step; default per problem
  double dual_step0 = 10.0;
  double al_beta = 1.0, al_dx = 1.0, al_m = 1.0;
  std::size_t eval_every = 1;
  std::uint64_t seed = 1;
  std::string out = "out";
  sampler_options s;

  json to_json() const {
    json j = {{"command", "optimize"}, {"instance", instance}, {"edge_list", edge_list},
              {"model", model}, {"method", method}, {"estimator", estimator},
              {"samples", samples}, {"iters", iters}, {"mu", mu.value_or(1.0)},
              {"mu_reg", mu_reg}, {"storage_pct", storage_pct}, {"budget_pct", budget_pct},
              {"dual_step0", dual_step0}, {"al_beta", al_beta}, {"al_dx", al_dx}, {"al_m", al_m},
              {"eval_every", eval_every}, {"seed", seed}, {"sampler_options", s.to_json()}};
    if (time_limit_s) j["time_limit_s"] = *time_limit_s;
    if (step0) j["step0"] = *step0;
    return j;
  }
};

/// A toy instance file: {"type": "toy", "marginals": [...], optional "lower",
/// "upper", or "equality": {"a": [[...]], "b": [...]}}.
struct toy_instance {
  quadratic_toy toy;
  constraint_set set;
  std::optional<vec> optimum;
};

inline toy_instance load_toy(const json &j) {
  toy_instance t{quadratic_toy::independent(j.at("marginals").get<vec>()), box{}, std::nullopt};
  const std::size_t d = t.toy.dim();
  if (j.contains("equality")) {
    const auto rows = j.at("equality").at("a").get<std::vector<vec>>();
    dense_matrix a(rows.size(), d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != d) throw io_error("toy: equality row has wrong length");
      for (std::size_t c = 0; c < d; ++c) a(r, c) = rows[r][c];
    }
    equality_affine eq{a, j.at("equality").at("b").get<vec>()};
    t.optimum = project(eq, t.toy.p_one);
    t.set = std::move(eq);
  } else {
    box bx{vec(d, -INFINITY), vec(d, INFINITY)};
    if (j.contains("lower")) bx.lower = j.at("lower").get<vec>();
    if (j.contains("upper")) bx.upper = j.at("upper").get<vec>();
    t.optimum = t.toy.box_optimum(bx);
    t.set = std::move(bx);
  }
  validate(t.set);
  return t;
}

struct optimize_report {
  run_trace trace;
  std::optional<double> objective;
  std::optional<double> gap;
  bool feasible = true;
};

namespace detail {

struct prepared_problem {
  std::string type;
  std::optional<inventory_instance> inventory;
  std::optional<network_instance> network;
  std::optional<toy_instance> toy;
  stochastic_problem problem;
  constraint_set set;
  vec x0;
  double default_step0 = 0.1;
  std::vector<std::size_t> milestones{50, 100};
};

inline void prepare(prepared_problem &pp, const optimize_options &o, rng_type &init_rng) {
  if (pp.inventory) {
    pp.type = "inventory";
    pp.problem = make_problem(*pp.inventory, o.mu_reg);
    pp.set = storage_constraint(*pp.inventory, o.storage_pct);
    pp.x0 = initial_inventory_point(pp.inventory->n, pp.set, init_rng);
  } else if (pp.network) {
    pp.type = "network";
    pp.problem = make_problem(*pp.network, o.mu_reg);
    pp.set = budget_constraint(*pp.network, o.budget_pct);
    pp.x0 = initial_network_point(pp.network->edges.size(), pp.set, init_rng);
    pp.default_step0 = 1.0;
    pp.milestones = {20, 100};
  } else {
    pp.type = "toy";
    pp.problem = make_problem(pp.toy->toy);
    pp.set = pp.toy->set;
    vec z(pp.toy->toy.dim(), 0.0);
    pp.x0 = project(pp.set, z);
  }
}

inline prepared_problem load_problem(const optimize_options &o) {
  prepared_problem out;
  if (o.edge_list) {
    std::ifstream in(o.instance);
    if (!in) throw io_error("cannot open edge list " + o.instance);
    std::optional<factor_graph> model;
    if (!o.model.empty()) model = load_uai_file(o.model);
    out.network = network_from_edge_list(parse_edge_list(in), std::move(model), o.seed);
  } else {
    std::ifstream in(o.instance);
    if (!in) throw io_error("cannot open instance file " + o.instance);
    json j = json::parse(in);
    if (j.value("type", "") == "toy") {
      out.toy = load_toy(j);
    } else {
      auto inst = load_instance(o.instance);
      if (auto *inv = std::get_if<inventory_instance>(&inst)) out.inventory = std::move(*inv);
      else out.network = std::move(std::get<network_instance>(inst));
    }
  }
  return out;
}

}  // namespace detail

/// Runs one method on a prepared problem. Shared by optimize and bench.
inline run_trace run_method(const std::string &method, const stochastic_problem &problem,
                            const constraint_set &set, const vec &x0, const estimator_config &ec,
                            const optimize_options &o, double step0,
                            const std::vector<std::size_t> &milestones,
                            const std::function<double(std::span<const double>)> &objective,
                            rng_type &rng) {
  gradient_estimator est(problem, ec);
  run_options run;
  run.iterations = o.iters;
  run.x0 = x0;
  run.objective = objective;
  run.evaluate_every = o.eval_every;
  run.time_limit_s = o.time_limit_s;
  run.report_set = set;
  const double mu = o.mu.value_or(1.0);
  const double rk = ec.xor_sampler.rho_kappa();
  if (method == "xor-pgd" || method == "ixor-pgd") {
    pgd_config cfg{run, {}};
    cfg.schedule.kind = method == "xor-pgd" ? schedule_kind::plain : schedule_kind::improved;
    cfg.schedule.mu = mu;
    cfg.schedule.rho_kappa = rk;
    return xor_pgd(problem, est, set, cfg, rng);
  }
  if (method == "xor-sgd") {
    sgd_config cfg{run, {}};
    cfg.schedule.initial = step0;
    cfg.schedule.milestones = milestones;
    return xor_sgd(problem, est, cfg, rng);
  }
  if (method == "xor-sgd-penalty") {
    if (std::holds_alternative<equality_affine>(set))
      throw usage_error("xor-sgd-penalty needs an inequality constraint set");
    penalty_config cfg{run, {}, {}};
    cfg.step.initial = step0;
    cfg.step.milestones = milestones;
    cfg.dual_step.initial = o.dual_step0;
    cfg.dual_step.milestones = milestones;
    return penalized_sgd(problem, est, set, cfg, rng);
  }
  if (method == "al-primal-dual") {
    const auto *eq = std::get_if<equality_affine>(&set);
    if (!eq) throw usage_error("al-primal-dual needs an equality-constrained instance");
    al_config cfg;
    cfg.run = run;
    cfg.beta = o.al_beta;
    cfg.domain_diameter = o.al_dx;
    cfg.gradient_bound = o.al_m;
    cfg.rho_kappa = rk;
    return primal_dual_al(problem, *eq, cfg, est, rng);
  }
  std::string valid;
  for (const auto &m : method_names()) valid += (valid.empty() ? "" : ", ") + m;
  throw usage_error("unknown method '" + method + "' (valid: " + valid + ")");
}

inline void write_trace(const fs::path &path, const json &config, const run_trace &tr) {
  csv_file csv(path, config, {"k", "t_k", "feasibility_residual", "obj_estimate", "attempts"});
  for (const auto &r : tr.records)
    csv.row({std::to_string(r.k), num(r.step), num(r.feasibility_residual),
             r.objective ? num(*r.objective) : "", std::to_string(r.attempts)});
}

inline optimize_report cmd_optimize(const optimize_options &o) {
  if (std::find(method_names().begin(), method_names().end(), o.method) == method_names().end()) {
    std::string valid;
    for (const auto &m : method_names()) valid += (valid.empty() ? "" : ", ") + m;
    throw usage_error("unknown method '" + o.method + "' (valid: " + valid + ")");
  }
  estimator_config ec;
  ec.kind = parse_estimator(o.estimator);
  if (o.samples < 1) throw usage_error("--samples must be >= 1");
  if (o.iters < 1) throw usage_error("--iters must be >= 1");
  if (o.mu && !(*o.mu > 0.0)) throw usage_error("--mu must be positive");
  if (o.eval_every < 1) throw usage_error("--eval-every must be >= 1");
  ec.samples = o.samples;
  ec.xor_sampler = o.s.xor_config();
  ec.gibbs = o.s.gibbs();
  ec.bp = o.s.bp();
  ec.enumeration_cap = o.s.enumeration_cap;

  rng_type init_rng(o.seed ^ 0x9e3779b97f4a7c15ull);
  detail::prepared_problem pp = detail::load_problem(o);
  detail::prepare(pp, o, init_rng);
  if (o.method == "al-primal-dual" && !std::holds_alternative<equality_affine>(pp.set))
    throw usage_error("al-primal-dual needs an equality-constrained instance; '" + pp.type +
                      "' has inequality constraints only");

  std::function<double(std::span<const double>)> objective;
  std::optional<exact_evaluator> eval;
  stochastic_problem unreg = pp.problem;
  unreg.regularization = 0.0;
  if (pp.problem.model->num_vars() <= o.s.enumeration_cap) {
    eval.emplace(unreg, o.s.enumeration_cap);
    objective = [&eval](std::span<const double> x) { return (*eval)(x); };
  }
  const json config = o.to_json();
  fs::create_directories(o.out);
  rng_type rng(o.seed);
  const auto t0 = std::chrono::steady_clock::now();
  optimize_report rep;
  rep.trace = run_method(o.method, pp.problem, pp.set, pp.x0, ec, o, o.step0.value_or(pp.default_step0),
                         pp.milestones, objective, rng);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rep.objective = rep.trace.output_objective;
  rep.feasible = rep.trace.output_residual <= 1e-8;
  if (pp.toy && pp.toy->optimum && rep.objective)
    rep.gap = *rep.objective - pp.toy->toy.expected_value(*pp.toy->optimum);

  write_trace(fs::path(o.out) / "trace.csv", config, rep.trace);
  json summary = {{"config", config},
                  {"config_hash", config_hash(config)},
                  {"problem", pp.type},
                  {"x0", pp.x0},
                  {"output", rep.trace.output},
                  {"feasibility_residual", rep.trace.output_residual},
                  {"feasible", rep.feasible},
                  {"attempts", rep.trace.total_attempts},
                  {"iterations_run", rep.trace.records.size()},
                  {"time_limited", rep.trace.time_limited},
                  {"sigma2_hat", rep.trace.sigma2_hat},
                  {"eps2_hat", rep.trace.eps2_hat}};
  summary["objective"] = rep.objective ? json(*rep.objective) : json(nullptr);
  if (rep.trace.best_objective) {
    summary["best_objective"] = *rep.trace.best_objective;
    summary["best_point"] = *rep.trace.best_point;
  }
  if (rep.gap) summary["gap"] = *rep.gap;
  if (!rep.trace.multipliers.empty()) summary["final_multipliers"] = rep.trace.multipliers.back();
  write_json(fs::path(o.out) / "summary.json", summary);
  write_json(fs::path(o.out) / "timing.json",
             {{"wall_seconds", wall},
              {"seconds_per_iteration", wall / static_cast<double>(std::max<std::size_t>(1, rep.trace.records.size()))}});
  return rep;
}

// ---------------------------------------------------------------------------
// bench

struct bench_options {
  std::string suite = "inventory";           // inventory | network
  std::vector<std::string> sizes{"10"};      // inventory n, or network kinds
  std::size_t seeds = 10;
  std::size_t samples = 10;                  // N for XOR-based methods
  std::size_t baseline_factor = 10;          // Gibbs/BP get factor * N
  std::size_t iters = 200;
  double pct = 100.0;                        // storage or budget percent
  std::optional<double> mu;
  double mu_reg = 1e-3;
  std::optional<double> time_limit_s;
  std::uint64_t seed = 1;
  std::string out = "out";
  sampler_options s;

  json to_json() const {
    json j = {{"command", "bench"}, {"suite", suite}, {"sizes", sizes}, {"seeds", seeds},
              {"samples", samples}, {"baseline_factor", baseline_factor}, {"iters", iters},
              {"pct", pct}, {"mu", mu.value_or(1.0)}, {"mu_reg", mu_reg}, {"seed", seed},
              {"sampler_options", s.to_json()}};
    if (time_limit_s) j["time_limit_s"] = *time_limit_s;
    return j;
  }
};

struct bench_cell {
  std::string size;
  std::size_t seed_index = 0;
  std::string method;
  std::string estimator;
  std::size_t samples_per_iter = 0;
  double objective = 0.0;
  double residual = 0.0;
  bool satisfied = true;
  std::size_t attempts = 0;
};

struct bench_method {
  std::string label, method, estimator;
  bool projected;
};

inline const std::vector<bench_method> &bench_methods() {
  static const std::vector<bench_method> m{
      {"ixor-pgd", "ixor-pgd", "xor", true},
      {"xor-pgd", "xor-pgd", "xor", true},
      {"xor-sgd-penalty", "xor-sgd-penalty", "xor", false},
      {"gibbs-sgd-penalty", "xor-sgd-penalty", "gibbs", false},
      {"bp-sgd-penalty", "xor-sgd-penalty", "bp", false},
  };
  return m;
}

/// Savings of `ours` against `other`: (obj(other) - obj(ours)) / obj(other).
inline double savings(double ours, double other) { return (other - ours) / other; }

inline std::vector<bench_cell> cmd_bench(const bench_options &o) {
  if (o.suite != "inventory" && o.suite != "network")
    throw usage_error("unknown suite '" + o.suite + "' (valid: inventory, network)");
  if (o.seeds < 1 || o.samples < 1 || o.iters < 1 || o.baseline_factor < 1)
    throw usage_error("seeds, samples, iters and baseline factor must be >= 1");
  const json config = o.to_json();
  fs::create_directories(o.out);
  std::vector<bench_cell> cells;
  csv_file csv(fs::path(o.out) / "bench.csv", config,
               {"suite", "size", "seed", "method", "estimator", "samples_per_iter", "objective",
                "feasibility_residual", "satisfied", "attempts"});
  for (const auto &size : o.sizes) {
    for (std::size_t si = 0; si < o.seeds; ++si) {
      const std::uint64_t cell_seed = fnv1a(o.suite + "/" + size + "/" + std::to_string(si)) ^ o.seed;
      detail::prepared_problem pp;
      if (o.suite == "inventory") {
        std::size_t n = 0;
        try {
          n = std::stoul(size);
        } catch (const std::exception &) {
          throw usage_error("inventory sizes must be integers, got '" + size + "'");
        }
        if (n < 1 || n > o.s.enumeration_cap) throw usage_error("inventory size must lie in [1, enumeration cap]");
        pp.inventory = gen_inventory(n, cell_seed);
      } else {
        network_kind kind;
        try {
          kind = parse_network_kind(size);
        } catch (const problem_error &e) {
          throw usage_error(e.what());
        }
        pp.network = gen_network(kind, cell_seed);
      }
      optimize_options oo;
      oo.samples = o.samples;
      oo.iters = o.iters;
      oo.mu = o.mu;
      oo.mu_reg = o.mu_reg;
      oo.storage_pct = o.pct;
      oo.budget_pct = o.pct;
      oo.time_limit_s = o.time_limit_s;
      oo.eval_every = 0;  // evaluate the output only
      oo.s = o.s;
      rng_type init_rng(cell_seed ^ 0x9e3779b97f4a7c15ull);
      detail::prepare(pp, oo, init_rng);
      stochastic_problem unreg = pp.problem;
      unreg.regularization = 0.0;
      const exact_evaluator eval(unreg, o.s.enumeration_cap);
      auto objective = [&eval](std::span<const double> x) { return eval(x); };

      for (const auto &bm : bench_methods()) {
        estimator_config ec;
        ec.kind = parse_estimator(bm.estimator);
        ec.samples = bm.estimator == "xor" ? o.samples : o.samples * o.baseline_factor;
        ec.xor_sampler = o.s.xor_config();
        ec.gibbs = o.s.gibbs();
        ec.bp = o.s.bp();
        ec.enumeration_cap = o.s.enumeration_cap;
        rng_type rng(cell_seed);
        const run_trace tr = run_method(bm.method, pp.problem, pp.set, pp.x0, ec, oo,
                                        pp.default_step0, pp.milestones, objective, rng);
        bench_cell c{size, si, bm.label, bm.estimator, ec.samples,
                     tr.output_objective.value_or(NAN), tr.output_residual,
                     tr.output_residual <= 1e-8, tr.total_attempts};
        csv.row({o.suite, size, std::to_string(si), c.method, c.estimator,
                 std::to_string(c.samples_per_iter), num(c.objective), num(c.residual),
                 c.satisfied ? "1" : "0", std::to_string(c.attempts)});
        cells.push_back(std::move(c));
      }
    }
  }

  // Savings of ixor-pgd against each method, plus satisfaction rates.
  csv_file sv(fs::path(o.out) / "savings.csv", config,
              {"size", "method", "mean_savings_pct", "ixor_no_worse", "cells", "satisfaction_pct"});
  for (const auto &size : o.sizes)
    for (const auto &bm : bench_methods()) {
      double total = 0.0;
      std::size_t wins = 0, count = 0, sat = 0;
      for (std::size_t si = 0; si < o.seeds; ++si) {
        const bench_cell *ours = nullptr, *other = nullptr;
        for (const auto &c : cells) {
          if (c.size != size || c.seed_index != si) continue;
          if (c.method == "ixor-pgd") ours = &c;
          if (c.method == bm.label) other = &c;
        }
        if (!ours || !other) continue;
        total += savings(ours->objective, other->objective);
        wins += ours->objective <= other->objective;
        sat += other->satisfied;
        ++count;
      }
      sv.row({size, bm.label, num(100.0 * total / static_cast<double>(count)), std::to_string(wins),
              std::to_string(count), num(100.0 * static_cast<double>(sat) / static_cast<double>(count))});
    }
  return cells;
}

// ---------------------------------------------------------------------------
// gen

struct gen_options {
  std::string problem = "inventory";  // inventory | network
  std::string size = "10";            // n, or grid | weak | strong
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string stem = "instance";
};

inline fs::path cmd_gen(const gen_options &o) {
  if (o.problem == "inventory") {
    std::size_t n = 0;
    try {
      n = std::stoul(o.size);
    } catch (const std::exception &) {
      throw usage_error("inventory size must be an integer");
    }
    return save_instance(o.out, o.stem, gen_inventory(n, o.seed));
  }
  if (o.problem == "network") {
    try {
      return save_instance(o.out, o.stem, gen_network(parse_network_kind(o.size), o.seed));
    } catch (const problem_error &e) {
      throw usage_error(e.what());
    }
  }
  throw usage_error("unknown problem '" + o.problem + "' (valid: inventory, network)");
}

}  // namespace xorpgd::cli
