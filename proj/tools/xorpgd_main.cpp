// xorpgd: sample | optimize | bench | gen
//
// Exit codes: 0 success, 2 usage error, 3 runtime failure.

#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "xorpgd/cli.hpp"

namespace {

using xorpgd::json;
namespace cli = xorpgd::cli;

/// --config FILE.json: top-level keys are global flags, nested objects
/// configure the subcommand of the same name, e.g.
///   {"seed": 3, "optimize": {"method": "ixor-pgd", "iters": 200}}
class json_config : public CLI::Config {
 public:
  std::string to_config(const CLI::App *app, bool default_also, bool, std::string) const override {
    return dump(app, default_also).dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream &in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception &e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    walk(j, {}, items);
    return items;
  }

 private:
  static json dump(const CLI::App *app, bool default_also) {
    json j = json::object();
    for (const CLI::Option *opt : app->get_options()) {
      if (opt->get_lnames().empty() || opt->get_configurable() == false) continue;
      const auto &name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto &r = opt->results();
        j[name] = r.size() == 1 ? json(r.front()) : json(r);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const CLI::App *sub : app->get_subcommands({}))
      if (sub->parsed()) j[sub->get_name()] = dump(sub, default_also);
    return j;
  }

  static void walk(const json &j, std::vector<std::string> parents,
                   std::vector<CLI::ConfigItem> &items) {
    for (const auto &[key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        // entering a section marks the subcommand as used
        items.push_back({p, "++", {}});
        walk(value, p, items);
        items.push_back({p, "--", {}});
        continue;
      }
      CLI::ConfigItem item{parents, key, {}};
      auto scalar = [](const json &v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
        return v.dump();
      };
      if (value.is_array())
        for (const auto &v : value) item.inputs.push_back(scalar(v));
      else
        item.inputs.push_back(scalar(value));
      items.push_back(std::move(item));
    }
  }
};

void add_sampler_flags(CLI::App *app, cli::sampler_options &s) {
  app->add_option("--pivot", s.pivot, "pivot P")->capture_default_str();
  app->add_option("--b", s.b, "discretization bit parameter b")->capture_default_str();
  app->add_option("--epsilon", s.epsilon, "discretization epsilon")->capture_default_str();
  app->add_option("--rho-kappa", s.rho_kappa, "sampler constant rho*kappa in [1, sqrt(2)]");
  app->add_option("--quantization", s.quantization, "slice quantization bits q")->capture_default_str();
  app->add_option("--max-attempts", s.max_attempts, "failed XOR attempts allowed per draw")->capture_default_str();
  app->add_option("--workers", s.workers, "threads per XOR batch")->capture_default_str();
  app->add_option("--burn-in", s.burn_in, "Gibbs burn-in sweeps")->capture_default_str();
  app->add_option("--thin", s.thin, "Gibbs sweeps between samples")->capture_default_str();
  app->add_option("--bp-iters", s.bp_iters, "BP iteration cap")->capture_default_str();
  app->add_option("--bp-damping", s.bp_damping, "BP damping in [0, 1)")->capture_default_str();
  app->add_option("--enumeration-cap", s.enumeration_cap, "largest model enumerated exactly")->capture_default_str();
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"XOR-projected stochastic gradient descent: samplers, optimizers, benchmarks"};
  app.config_formatter(std::make_shared<json_config>());
  app.set_config("--config", "", "JSON configuration file");
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  std::string out = "out";
  app.add_option("--seed", seed, "random seed")->capture_default_str();
  app.add_option("--out", out, "output directory")->capture_default_str();

  cli::sample_options so;
  auto *sample = app.add_subcommand("sample", "draw samples from a UAI model");
  sample->add_option("--model", so.model, "UAI MARKOV file")->required();
  sample->add_option("--sampler", so.sampler, "xor | gibbs | bp")->capture_default_str();
  sample->add_option("--samples,-N", so.samples, "number of samples")->capture_default_str();
  add_sampler_flags(sample, so.s);

  cli::optimize_options oo;
  auto *optimize = app.add_subcommand("optimize", "run one optimizer on an instance");
  optimize->add_option("--instance", oo.instance, "instance JSON (or edge list with --edges)")->required();
  optimize->add_flag("--edges", oo.edge_list, "treat --instance as a 'u v c_e g0_e' edge list");
  optimize->add_option("--model", oo.model, "UAI failure model for an edge list");
  optimize->add_option("--method", oo.method,
                       "xor-pgd | ixor-pgd | xor-sgd | xor-sgd-penalty | al-primal-dual")
      ->capture_default_str();
  optimize->add_option("--estimator", oo.estimator, "xor | gibbs | bp | exact")->capture_default_str();
  optimize->add_option("--samples,-N", oo.samples, "samples per iteration")->capture_default_str();
  optimize->add_option("--iters,-K", oo.iters, "iterations K")->capture_default_str();
  optimize->add_option("--mu", oo.mu, "strong-convexity constant in the step rule (default 1)");
  optimize->add_option("--mu-reg", oo.mu_reg, "quadratic regularizer weight")->capture_default_str();
  optimize->add_option("--storage-pct", oo.storage_pct, "inventory storage limit, percent")->capture_default_str();
  optimize->add_option("--budget-pct", oo.budget_pct, "network budget, percent")->capture_default_str();
  optimize->add_option("--time-limit-s", oo.time_limit_s, "wall-clock budget in seconds");
  optimize->add_option("--step0", oo.step0, "initial step of the piecewise schedule");
  optimize->add_option("--dual-step0", oo.dual_step0, "initial multiplier step")->capture_default_str();
  optimize->add_option("--al-beta", oo.al_beta, "augmented-Lagrangian penalty")->capture_default_str();
  optimize->add_option("--al-dx", oo.al_dx, "domain diameter D_X")->capture_default_str();
  optimize->add_option("--al-m", oo.al_m, "gradient-norm bound M")->capture_default_str();
  optimize->add_option("--eval-every", oo.eval_every, "exact evaluation period")->capture_default_str();
  add_sampler_flags(optimize, oo.s);

  cli::bench_options bo;
  auto *bench = app.add_subcommand("bench", "compare methods on generated instances");
  bench->add_option("--suite", bo.suite, "inventory | network")->capture_default_str();
  bench->add_option("--sizes", bo.sizes, "inventory sizes n, or network kinds grid|weak|strong")
      ->capture_default_str();
  bench->add_option("--seeds", bo.seeds, "instances per size")->capture_default_str();
  bench->add_option("--samples,-N", bo.samples, "XOR samples per iteration")->capture_default_str();
  bench->add_option("--baseline-factor", bo.baseline_factor, "sample multiplier for Gibbs/BP")
      ->capture_default_str();
  bench->add_option("--iters,-K", bo.iters, "iterations K")->capture_default_str();
  bench->add_option("--pct,--storage-pct,--budget-pct", bo.pct, "storage or budget percent")
      ->capture_default_str();
  bench->add_option("--mu", bo.mu, "strong-convexity constant in the step rule (default 1)");
  bench->add_option("--mu-reg", bo.mu_reg, "quadratic regularizer weight")->capture_default_str();
  bench->add_option("--time-limit-s", bo.time_limit_s, "wall-clock budget per run");
  add_sampler_flags(bench, bo.s);

  cli::gen_options go;
  auto *gen = app.add_subcommand("gen", "write a generated instance (JSON + UAI)");
  gen->add_option("--problem", go.problem, "inventory | network")->capture_default_str();
  gen->add_option("--size", go.size, "n for inventory; grid | weak | strong for network")->capture_default_str();
  gen->add_option("--stem", go.stem, "output file stem")->capture_default_str();

  for (auto *sub : {sample, optimize, bench, gen}) sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sample->parsed()) {
      so.seed = seed;
      so.out = out;
      const auto rep = cli::cmd_sample(so);
      std::cout << rep.samples.size() << " samples, " << rep.attempts << " attempts";
      if (rep.tv_distance) std::cout << ", TV " << *rep.tv_distance;
      std::cout << " -> " << out << '\n';
    } else if (optimize->parsed()) {
      oo.seed = seed;
      oo.out = out;
      const auto rep = cli::cmd_optimize(oo);
      std::cout << oo.method << '/' << oo.estimator << ": objective "
                << (rep.objective ? cli::num(*rep.objective) : "n/a") << ", residual "
                << cli::num(rep.trace.output_residual);
      if (rep.gap) std::cout << ", gap " << cli::num(*rep.gap);
      std::cout << " -> " << out << '\n';
    } else if (bench->parsed()) {
      bo.seed = seed;
      bo.out = out;
      const auto cells = cli::cmd_bench(bo);
      std::cout << cells.size() << " runs -> " << out << "/bench.csv, " << out << "/savings.csv\n";
    } else if (gen->parsed()) {
      go.seed = seed;
      go.out = out;
      std::cout << cli::cmd_gen(go).string() << '\n';
    }
  } catch (const cli::usage_error &e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const xorpgd::sampler_error &e) {
    std::cerr << "sampler error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
