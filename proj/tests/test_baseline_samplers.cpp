#include <gtest/gtest.h>

#include <map>

#include "models.hpp"

using namespace xorpgd;
using namespace testing_models;

namespace {

double tv_distance(const factor_graph &fg, const std::vector<assignment> &samples) {
  const enumerated_distribution p(fg);
  std::vector<double> freq(p.size(), 0.0);
  for (const auto &a : samples) freq[pack(a)] += 1.0 / static_cast<double>(samples.size());
  double tv = 0.0;
  for (std::uint64_t s = 0; s < p.size(); ++s) tv += 0.5 * std::abs(freq[s] - p.probability(s));
  return tv;
}

}  // namespace

TEST(GibbsConditional, Examples) {
  EXPECT_NEAR(gibbs_conditional(single(1, 3), {0}, 0), 0.75, 1e-12);
  EXPECT_NEAR(gibbs_conditional(pairwise_1234(), {1, 0}, 1), 4.0 / 7.0, 1e-12);
  EXPECT_NEAR(gibbs_conditional(uniform(3), {1, 0, 1}, 2), 0.5, 1e-12);
  EXPECT_THROW(gibbs_conditional(uniform(3), {1, 0, 1}, 3), std::out_of_range);
}

TEST(GibbsSample, SingleVariableMarginal) {
  rng_type rng(1);
  const auto s = gibbs_sample(single(1, 3), {}, 20000, rng);
  double ones = 0;
  for (const auto &a : s) ones += a[0];
  EXPECT_NEAR(ones / 20000, 0.75, 0.01);
}

TEST(GibbsSample, DeterministicGivenSeed) {
  rng_type a(7), b(7);
  EXPECT_EQ(gibbs_sample(pairwise_1234(), {}, 100, a), gibbs_sample(pairwise_1234(), {}, 100, b));
}

TEST(GibbsSample, UniformThreeVariables) {
  rng_type rng(2);
  const auto s = gibbs_sample(uniform(3), {10, 1}, 20000, rng);
  for (std::size_t i = 0; i < 3; ++i) {
    double ones = 0;
    for (const auto &a : s) ones += a[i];
    EXPECT_NEAR(ones / 20000, 0.5, 0.01);
  }
}

TEST(GibbsSample, Validation) {
  rng_type rng(3);
  EXPECT_THROW(gibbs_sample(uniform(2), {}, 0, rng), std::invalid_argument);
  EXPECT_THROW(gibbs_sample(uniform(2), {100, 0}, 1, rng), std::invalid_argument);
}

TEST(GibbsSample, ChainInvarianceOnRandomModel) {
  std::mt19937_64 mrng(4);
  const auto fg = random_mrf(5, 4, 3, 1.0, mrng);
  rng_type rng(5);
  EXPECT_LT(tv_distance(fg, gibbs_sample(fg, {}, 50000, rng)), 0.02);
}

TEST(BpMarginals, TreeIsExact) {
  std::mt19937_64 mrng(6);
  for (int t = 0; t < 5; ++t) {
    const auto fg = random_tree(8, mrng);
    const auto bp = bp_marginals(fg, {50, 0.0, 1e-12});
    const auto ex = exact_marginals(fg);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(bp.marginals[i], ex.marginals[i], 1e-6);
    EXPECT_TRUE(bp.converged);
  }
}

TEST(BpMarginals, SingleFactorOneIteration) {
  const auto bp = bp_marginals(pairwise_1234(), {1, 0.0, 1e-8});
  EXPECT_NEAR(bp.marginals[0], 0.7, 1e-12);
  EXPECT_NEAR(bp.marginals[1], 0.6, 1e-12);
}

TEST(BpMarginals, UniformModel) {
  const auto bp = bp_marginals(uniform(4));
  for (double m : bp.marginals) EXPECT_NEAR(m, 0.5, 1e-12);
}

TEST(BpMarginals, DampingStillConvergesOnTree) {
  std::mt19937_64 mrng(7);
  const auto fg = random_tree(6, mrng);
  const auto bp = bp_marginals(fg, {500, 0.5, 1e-12});
  const auto ex = exact_marginals(fg);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(bp.marginals[i], ex.marginals[i], 1e-6);
}

TEST(BpMarginals, Validation) {
  EXPECT_THROW(bp_marginals(uniform(2), {0, 0.0, 1e-8}), std::invalid_argument);
  EXPECT_THROW(bp_marginals(uniform(2), {5, 1.0, 1e-8}), std::invalid_argument);
}

TEST(BpSample, DegenerateBeliefs) {
  rng_type rng(8);
  for (const auto &a : bp_sample({1.0, 0.0}, 100, rng)) EXPECT_EQ(a, (assignment{1, 0}));
  EXPECT_THROW(bp_sample({1.5}, 1, rng), std::invalid_argument);
}

TEST(BpSample, IndependentHalves) {
  rng_type rng(9);
  std::map<std::uint64_t, double> f;
  for (const auto &a : bp_sample({0.5, 0.5}, 10000, rng)) f[pack(a)] += 1e-4;
  for (std::uint64_t s = 0; s < 4; ++s) EXPECT_NEAR(f[s], 0.25, 0.02);
}

TEST(BpSample, MatchesTreeBeliefs) {
  std::mt19937_64 mrng(10);
  const auto fg = random_tree(6, mrng);
  const auto bp = bp_marginals(fg);
  rng_type rng(11);
  const auto s = bp_sample(bp.marginals, 20000, rng);
  for (std::size_t i = 0; i < 6; ++i) {
    double ones = 0;
    for (const auto &a : s) ones += a[i];
    EXPECT_NEAR(ones / 20000, bp.marginals[i], 0.01);
  }
}
