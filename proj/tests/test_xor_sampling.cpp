#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "models.hpp"

using namespace xorpgd;
using namespace testing_models;

namespace {

/// One pairwise factor whose packed weights are {w(s=0), w(s=1), w(s=2), w(s=3)}.
/// Packed bit i is theta_i while the table runs with theta_1 fastest.
factor_graph two_var_weights(double w0, double w1, double w2, double w3) {
  return factor_graph(2, {factor{{0, 1}, {w0, w2, w1, w3}}});
}

slice_set uniform_slices(std::size_t n) {
  slice_set ss;
  ss.num_vars = n;
  ss.slice_count.assign(std::size_t{1} << n, 1);
  return ss;
}

/// Returns a fixed solution list, or reports truncation, regardless of the query.
class scripted_oracle final : public oracle_backend {
 public:
  scripted_oracle(std::vector<oracle_solution> sols, bool truncated)
      : sols_(std::move(sols)), truncated_(truncated) {}
  oracle_result solve(const slice_set &, std::span<const parity_constraint>,
                      std::size_t limit) const override {
    oracle_result r;
    if (truncated_) {
      r.solutions.assign(limit + 1, oracle_solution{});
      r.truncated = true;
      return r;
    }
    r.solutions = sols_;
    return r;
  }
  const char *name() const override { return "scripted"; }

 private:
  std::vector<oracle_solution> sols_;
  bool truncated_;
};

}  // namespace

TEST(DiscretizationConfig, DerivedQuantities) {
  const discretization_config c{1, 0.5};
  EXPECT_DOUBLE_EQ(c.ratio(), 2.0);
  EXPECT_EQ(c.levels(2), 3u);  // log2(4 / 0.5) = 3
  EXPECT_THROW((discretization_config{0, 0.5}.validate()), sampler_error);
  EXPECT_THROW((discretization_config{1, 0.0}.validate()), sampler_error);
  EXPECT_THROW((discretization_config{1, 1.0}.validate()), sampler_error);
}

TEST(Discretize, HandExample) {
  // weights {8, 5, 2, 1}, r = 2, l = 3: buckets (4,8], (2,4], (1,2], tail (0,1]
  const auto dw = discretize(two_var_weights(8, 5, 2, 1), {1, 0.5});
  EXPECT_EQ(dw.levels, 3u);
  EXPECT_NEAR(std::exp(dw.log_weight_prime(0)), 4.0, 1e-12);
  EXPECT_NEAR(std::exp(dw.log_weight_prime(1)), 4.0, 1e-12);
  EXPECT_NEAR(std::exp(dw.log_weight_prime(2)), 1.0, 1e-12);
  EXPECT_TRUE(dw.in_tail(3));
  EXPECT_EQ(std::exp(dw.log_weight_prime(3)), 0.0);
  EXPECT_FALSE(dw.tail_empty);
}

TEST(Discretize, AllEqualWeights) {
  const auto dw = discretize(two_var_weights(3, 3, 3, 3), {2, 0.1});
  for (std::uint64_t s = 0; s < 4; ++s) {
    EXPECT_EQ(dw.bucket_of[s], 0u);
    EXPECT_NEAR(std::exp(dw.log_weight_prime(s)), 3.0 / dw.config.ratio(), 1e-12);
  }
  EXPECT_TRUE(dw.tail_empty);
}

TEST(Discretize, RhoForPaperParameters) {
  const discretization_config c{7, 0.01};
  const double r = 128.0 / 127.0;
  EXPECT_NEAR(c.rho(), r * r / 0.99, 1e-15);
  EXPECT_NEAR(c.rho(), 1.0261, 1e-4);
}

TEST(Discretize, BucketInvariants) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    const auto fg = random_mrf(6, 6, 3, 2.0, rng);
    const discretization_config cfg{1 + static_cast<unsigned>(t % 3), 0.05};
    const auto dw = discretize(fg, cfg);
    const double lr = cfg.log_ratio();
    for (std::uint64_t s = 0; s < 64; ++s) {
      const double lw = fg.log_weight(s);
      const auto i = dw.bucket_of[s];
      if (i == dw.levels) {
        EXPECT_LE(lw, dw.log_max - static_cast<double>(dw.levels) * lr + 1e-9);
        continue;
      }
      EXPECT_GT(lw, dw.log_max - static_cast<double>(i + 1) * lr - 1e-9);
      EXPECT_LE(lw, dw.log_max - static_cast<double>(i) * lr + 1e-9);
      // (1/r) w < w' <= w
      EXPECT_GT(dw.log_weight_prime(s), lw - lr - 1e-9);
      EXPECT_LE(dw.log_weight_prime(s), lw + 1e-9);
    }
    const bool expect_empty = dw.log_max - static_cast<double>(dw.levels) * lr < dw.log_min;
    EXPECT_EQ(dw.tail_empty, expect_empty);
  }
}

TEST(Discretize, SandwichOnRandomModels) {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 10; ++t) {
    const auto fg = random_mrf(7, 7, 3, 3.0, rng);
    const auto dw = discretize(fg, {7, 0.01});
    const enumerated_distribution p(fg);
    const auto pp = discretized_distribution(dw);
    for (std::uint64_t s = 0; s < p.size(); ++s) {
      if (dw.in_tail(s)) continue;
      EXPECT_LE(pp[s], dw.rho() * p.probability(s) * (1 + 1e-12));
      EXPECT_GE(pp[s], p.probability(s) / dw.rho() * (1 - 1e-12));
    }
  }
}

TEST(Discretize, TightenEmptiesTail) {
  const auto fg = two_var_weights(8, 5, 2, 1);
  const auto cfg = tighten_for_empty_tail(fg, {1, 0.5});
  EXPECT_TRUE(discretize(fg, cfg).tail_empty);
  EXPECT_LT(cfg.epsilon, 0.5);
}

TEST(EmbedSlices, ExactPowersOfTwo) {
  // b = 1: w' = {4, 2, 1, 1} m'
  const auto dw = discretize(two_var_weights(8, 4, 2, 2), {1, 0.5});
  const auto ss = embed_slices(dw);
  EXPECT_EQ(ss.slice_count, (std::vector<std::uint64_t>{4, 2, 1, 1}));
  EXPECT_EQ(ss.aux_bits, 2u);
  EXPECT_EQ(ss.distortion, 1.0);
  for (std::uint64_t t = 0; t < 4; ++t) {
    std::uint64_t admissible = 0;
    for (std::uint64_t d = 0; d < 4; ++d) {
      admissible += ss.admissible(t, d);
      // delta_i = 0 whenever w' <= 2^i m' (bit i counted from 0)
      for (std::size_t i = 0; i < 2; ++i)
        if (ss.slice_count[t] <= (std::uint64_t{1} << i) && ss.admissible(t, d)) {
          EXPECT_EQ((d >> i) & 1u, 0u);
        }
    }
    EXPECT_EQ(admissible, ss.slice_count[t]);
  }
  EXPECT_EQ(ss.size(), 8.0L);
}

TEST(EmbedSlices, UnweightedCase) {
  const auto dw = discretize(uniform(3), {7, 0.01});
  const auto ss = embed_slices(dw);
  EXPECT_EQ(ss.aux_bits, 0u);
  for (auto k : ss.slice_count) EXPECT_EQ(k, 1u);
}

TEST(EmbedSlices, TailMapsToZero) {
  const auto dw = discretize(two_var_weights(8, 5, 2, 1), {1, 0.5});
  const auto ss = embed_slices(dw);
  EXPECT_EQ(ss.slice_count[3], 0u);
  for (std::uint64_t s = 0; s < 3; ++s) EXPECT_GE(ss.slice_count[s], 1u);
}

TEST(EmbedSlices, QuantizationTooCoarse) {
  const auto dw = discretize(uniform(2), {7, 0.01});
  try {
    embed_slices(dw, 0);
    FAIL();
  } catch (const sampler_error &e) {
    EXPECT_NE(std::string(e.what()).find("quantization too coarse"), std::string::npos);
  }
}

TEST(EmbedSlices, GeneralBWithinQuantizationBound) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 5; ++t) {
    const auto fg = random_mrf(6, 4, 3, 1.5, rng);
    const auto dw = discretize(fg, {7, 0.01});
    const auto ss = embed_slices(dw, 8);
    EXPECT_NEAR(ss.distortion, (1 + 1.0 / 256) / (1 - 1.0 / 256), 1e-15);
    // k / w' is constant up to the distortion bound
    double lo = INFINITY, hi = 0;
    for (std::uint64_t s = 0; s < 64; ++s) {
      if (dw.in_tail(s)) continue;
      const double ratio = static_cast<double>(ss.slice_count[s]) / std::exp(dw.log_weight_prime(s));
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    EXPECT_LE(hi / lo, ss.distortion * (1 + 1e-12));
    EXPECT_EQ(ss.aux_bits, static_cast<std::size_t>(std::bit_width(
                               *std::max_element(ss.slice_count.begin(), ss.slice_count.end()) - 1)));
  }
}

TEST(EmbedSlices, AuxiliaryCapExceeded) {
  const auto dw = discretize(two_var_weights(1e6, 1, 1, 1), {1, 1e-9});
  EXPECT_THROW(embed_slices(dw, 8, 4), sampler_error);
}

TEST(ParityConstraints, EmptyAndDeterministic) {
  rng_type rng(1);
  EXPECT_TRUE(draw_parity_constraints(8, 0, rng).empty());
  rng_type a(77), b(77);
  const auto x = draw_parity_constraints(8, 3, a);
  const auto y = draw_parity_constraints(8, 3, b);
  ASSERT_EQ(x.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(x[i].vars, y[i].vars);
    EXPECT_EQ(x[i].parity, y[i].parity);
    EXPECT_LT(x[i].vars.highest(), 8);
  }
}

TEST(ParityConstraints, MeanSubsetSize) {
  rng_type rng(5);
  double total = 0.0;
  std::size_t odd = 0;
  const auto cons = draw_parity_constraints(8, 10000, rng);
  for (const auto &c : cons) {
    total += static_cast<double>(c.vars.count());
    odd += c.parity;
  }
  EXPECT_NEAR(total / 10000.0, 4.0, 0.15);
  EXPECT_NEAR(static_cast<double>(odd) / 10000.0, 0.5, 0.03);
}

TEST(ParityConstraints, WideRowsUseBothWords) {
  rng_type rng(6);
  const auto cons = draw_parity_constraints(100, 50, rng);
  bool high = false;
  for (const auto &c : cons) {
    EXPECT_LT(c.vars.highest(), 100);
    high |= c.vars.highest() >= 64;
  }
  EXPECT_TRUE(high);
  EXPECT_THROW(draw_parity_constraints(129, 1, rng), sampler_error);
}

class OracleContract : public ::testing::TestWithParam<std::string> {
 protected:
  std::unique_ptr<oracle_backend> backend() const {
    if (GetParam() == "exhaustive") return std::make_unique<exhaustive_oracle>();
    return std::make_unique<elimination_oracle>();
  }
};

TEST_P(OracleContract, NoParities) {
  const auto r = backend()->solve(uniform_slices(2), {}, 10);
  EXPECT_EQ(r.solutions.size(), 4u);
  EXPECT_FALSE(r.truncated);
}

TEST_P(OracleContract, OneParity) {
  parity_constraint c;
  c.vars.set(0);
  c.vars.set(1);
  c.parity = false;
  const std::vector<parity_constraint> cons{c};
  const auto r = backend()->solve(uniform_slices(2), cons, 10);
  ASSERT_EQ(r.solutions.size(), 2u);
  EXPECT_EQ(r.solutions[0].theta, 0u);
  EXPECT_EQ(r.solutions[1].theta, 3u);
}

TEST_P(OracleContract, Truncation) {
  const auto r = backend()->solve(uniform_slices(2), {}, 1);
  EXPECT_EQ(r.solutions.size(), 2u);
  EXPECT_TRUE(r.truncated);
  const auto exact = backend()->solve(uniform_slices(2), {}, 4);
  EXPECT_EQ(exact.solutions.size(), 4u);
  EXPECT_FALSE(exact.truncated);
}

TEST_P(OracleContract, LimitMustBePositive) {
  EXPECT_THROW(backend()->solve(uniform_slices(2), {}, 0), sampler_error);
}

TEST_P(OracleContract, InconsistentParities) {
  parity_constraint a, b;
  a.vars.set(0);
  b.vars.set(0);
  b.parity = true;
  const std::vector<parity_constraint> cons{a, b};
  EXPECT_TRUE(backend()->solve(uniform_slices(3), cons, 10).solutions.empty());
}

TEST_P(OracleContract, SlicesRespected) {
  const auto dw = discretize(two_var_weights(8, 4, 2, 2), {1, 0.5});
  const auto ss = embed_slices(dw);
  const auto r = backend()->solve(ss, {}, 100);
  EXPECT_EQ(r.solutions.size(), 8u);
  for (const auto &s : r.solutions) EXPECT_TRUE(ss.admissible(s.theta, s.delta));
}

INSTANTIATE_TEST_SUITE_P(Backends, OracleContract, ::testing::Values("exhaustive", "elimination"));

TEST(Oracle, ExhaustiveBitBudget) {
  EXPECT_THROW(exhaustive_oracle(4).solve(uniform_slices(5), {}, 1), sampler_error);
}

TEST(Oracle, BackendsAgreeOnRandomInstances) {
  std::mt19937_64 mrng(31);
  rng_type rng(32);
  const exhaustive_oracle ex;
  const elimination_oracle el;
  for (int t = 0; t < 40; ++t) {
    const auto fg = random_mrf(2 + t % 5, 3, 3, 1.5, mrng);
    const auto dw = discretize(fg, {static_cast<unsigned>(1 + t % 2), 0.2});
    const auto ss = embed_slices(dw, 2);
    if (ss.total_bits() > 16) continue;
    const auto cons = draw_parity_constraints(ss.total_bits(), static_cast<std::size_t>(t % 6), rng);
    const auto a = ex.solve(ss, cons, 1000);
    const auto b = el.solve(ss, cons, 1000);
    EXPECT_EQ(a.solutions, b.solutions);
    EXPECT_EQ(a.truncated, b.truncated);
    const auto c = el.solve(ss, cons, 3);
    const auto d = ex.solve(ss, cons, 3);
    EXPECT_EQ(c.solutions, d.solutions);
    EXPECT_EQ(c.truncated, d.truncated);
  }
}

TEST(Oracle, ParityHalvesSurvivors) {
  const auto dw = discretize(two_var_weights(8, 4, 2, 2), {1, 0.5});
  const auto ss = embed_slices(dw);  // 8 admissible pairs
  rng_type rng(33);
  const exhaustive_oracle ex;
  double total = 0.0;
  const int reps = 4000;
  for (int i = 0; i < reps; ++i) {
    const auto cons = draw_parity_constraints(ss.total_bits(), 1, rng);
    total += static_cast<double>(ex.solve(ss, cons, 100).solutions.size());
  }
  EXPECT_NEAR(total / reps, 4.0, 0.15);
}

TEST(Oracle, QueryDumpHasXorLines) {
  rng_type rng(34);
  const auto ss = uniform_slices(3);
  const auto cons = draw_parity_constraints(3, 2, rng);
  std::ostringstream out;
  write_oracle_query(out, ss, cons);
  const std::string s = out.str();
  EXPECT_NE(s.find("p xor 3 2"), std::string::npos);
  std::size_t xs = 0;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) xs += !line.empty() && line[0] == 'x';
  EXPECT_EQ(xs, 2u);
}

TEST(XorSamplerConfig, RhoKappaRange) {
  xor_sampler_config c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_NEAR(c.rho_kappa(), std::sqrt(2.0), 1e-12);
  c.kappa = 2.0;
  EXPECT_THROW(c.validate(), sampler_error);
  c.kappa = 0.5;
  EXPECT_THROW(c.validate(), sampler_error);
  c.kappa = 1.0;
  EXPECT_NO_THROW(c.validate());
}

TEST(XorSampler, UniformFourConfigurations) {
  const auto fg = uniform(2);
  xor_sampler s(fg, {});
  rng_type rng(41);
  const auto b = s.sample_batch(10000, rng);
  std::map<std::uint64_t, double> freq;
  for (const auto &a : b.samples) freq[pack(a)] += 1.0 / 10000;
  for (std::uint64_t t = 0; t < 4; ++t) EXPECT_NEAR(freq[t], 0.25, 0.02);
  EXPECT_EQ(s.constraint_count(), 0u);
}

TEST(XorSampler, DominantConfiguration) {
  // mass 0.9 on theta = (1,1), 0.1/3 elsewhere
  const auto fg = two_var_weights(1, 1, 1, 27);
  xor_sampler s(fg, {});
  ASSERT_TRUE(s.discretized().tail_empty);
  rng_type rng(42);
  const std::size_t draws = 10000;
  const auto b = s.sample_batch(draws, rng);
  double hits = 0;
  for (const auto &a : b.samples) hits += a[0] && a[1];
  const double f = hits / draws;
  const double rk = s.config().rho_kappa() * s.slices().distortion;
  const double tol = 3.0 * std::sqrt(0.9 * 0.1 / draws);
  EXPECT_GE(f, 0.9 / rk - tol);
  EXPECT_LE(f, std::min(1.0, 0.9 * rk) + tol);
}

TEST(XorSampler, SmallerPivotFailsMore) {
  std::mt19937_64 mrng(43);
  const auto fg = random_mrf(6, 4, 3, 1.0, mrng);
  auto acceptance = [&](std::size_t pivot) {
    xor_sampler_config c;
    c.pivot = pivot;
    c.max_attempts = 100000;
    xor_sampler s(fg, c);
    rng_type rng(44);
    const auto b = s.sample_batch(2000, rng);
    return 2000.0 / static_cast<double>(b.attempts);
  };
  EXPECT_LT(acceptance(1), acceptance(100));
}

TEST(XorSampler, BatchSizes) {
  const auto fg = uniform(1);
  xor_sampler_config c;
  c.pivot = 2;  // two survivors at i* = 0, accepted with probability 2/2
  xor_sampler s(fg, c);
  rng_type rng(45);
  const auto one = s.sample_batch(1, rng);
  EXPECT_EQ(one.samples.size(), 1u);
  EXPECT_EQ(one.attempts, 1u);

  const auto fg4 = uniform(4);
  xor_sampler s2(fg4, {});
  const auto sixty = s2.sample_batch(60, rng);
  EXPECT_EQ(sixty.samples.size(), 60u);
  EXPECT_GE(sixty.attempts, 60u);
  EXPECT_THROW(s2.sample_batch(0, rng), sampler_error);
}

TEST(XorSampler, MaxAttemptsExhausted) {
  xor_sampler_config c;
  c.max_attempts = 1;
  const auto fg = uniform(2);
  xor_sampler s(fg, c, std::make_shared<scripted_oracle>(std::vector<oracle_solution>{}, true));
  rng_type rng(46);
  EXPECT_THROW(s.sample_batch(1, rng), sampler_error);
}

TEST(XorSampler, PivotStageIsUniform) {
  // survivors S = 3 pairs, P = 10: each returned with probability 1/P per attempt
  xor_sampler_config c;
  c.pivot = 10;
  c.max_attempts = 1;
  const std::vector<oracle_solution> sols{{0, 0}, {1, 0}, {2, 0}};
  const auto fg = uniform(2);
  xor_sampler s(fg, c, std::make_shared<scripted_oracle>(sols, false));
  rng_type rng(47);
  std::map<std::uint64_t, double> hits;
  const int attempts = 60000;
  int failures = 0;
  for (int i = 0; i < attempts; ++i) {
    const auto r = s.draw(rng);
    if (r.value) hits[pack(*r.value)] += 1;
    else ++failures;
  }
  for (std::uint64_t t = 0; t < 3; ++t) EXPECT_NEAR(hits[t] / attempts, 0.1, 0.006);
  EXPECT_NEAR(static_cast<double>(failures) / attempts, 0.7, 0.01);
}

TEST(XorSampler, DeterministicAndWorkerStable) {
  std::mt19937_64 mrng(48);
  const auto fg = random_mrf(5, 3, 3, 1.0, mrng);
  auto run = [&](unsigned workers) {
    xor_sampler_config c;
    c.workers = workers;
    xor_sampler s(fg, c);
    rng_type rng(49);
    return s.sample_batch(200, rng).samples;
  };
  EXPECT_EQ(run(1), run(1));
  EXPECT_EQ(run(3), run(3));
  EXPECT_EQ(run(3).size(), 200u);
}

TEST(XorSampler, SandwichOnSmallModel) {
  std::mt19937_64 mrng(50);
  const auto fg = random_mrf(4, 3, 3, 1.0, mrng);
  xor_sampler s(fg, {});
  rng_type rng(51);
  const std::size_t draws = 20000;
  const auto b = s.sample_batch(draws, rng);
  const enumerated_distribution p(fg);
  std::vector<double> freq(16, 0.0);
  for (const auto &a : b.samples) freq[pack(a)] += 1.0 / draws;
  for (std::uint64_t t = 0; t < 16; ++t) {
    if (p.probability(t) < 0.02) continue;
    const double ratio = freq[t] / p.probability(t);
    EXPECT_GT(ratio, 0.5);
    EXPECT_LT(ratio, 2.0);
  }
}
