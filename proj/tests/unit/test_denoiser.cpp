#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "posedp/denoiser.hpp"

using namespace posedp;

namespace {

DenoiserConfig small_config() {
  DenoiserConfig c;
  c.hidden_width = 16;
  c.depth = 2;
  c.embed_dim = 8;
  c.action_dim = 2;
  c.horizon = 3;
  c.obs_dim = 4;
  c.obs_horizon = 2;
  return c;
}

}  // namespace

TEST(TimestepEmbedding, MatchesSinusoidFormula) {
  for (int k : {1, 7, 100}) {
    const auto e = timestep_embedding(k, 16);
    const auto ref = oracle::ReferenceDenoiser::embedding(k, 16);
    ASSERT_EQ(e.size(), ref.size());
    for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(e[i], ref[i], 1e-6);
  }
  EXPECT_THROW(timestep_embedding(1, 7), std::invalid_argument);
  EXPECT_THROW(timestep_embedding(0, 8), std::out_of_range);
}

TEST(TimestepEmbedding, DistinctForEveryStep) {
  const int K = 10000;
  std::set<std::vector<float>> seen;
  for (int k = 1; k <= K; ++k) seen.insert(timestep_embedding(k, 16));
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(K));
}

TEST(Denoiser, ParameterCountMatchesLayout) {
  const DenoiserConfig c = small_config();
  std::size_t total = 0;
  for (const auto& [name, shape] : parameter_layout(c)) total += shape_numel(shape);
  EXPECT_EQ(parameter_count(c), total);
  EXPECT_EQ(DenoiserParams::initialize(c, 1).size(), total);
}

TEST(Denoiser, DoublingWidthRoughlyQuadruplesParameters) {
  // Hidden-to-hidden weights dominate once the width exceeds the input widths.
  DenoiserConfig c = small_config();
  c.hidden_width = 512;
  const double narrow = static_cast<double>(parameter_count(c));
  c.hidden_width = 1024;
  const double ratio = static_cast<double>(parameter_count(c)) / narrow;
  EXPECT_GT(ratio, 3.8);
  EXPECT_LT(ratio, 4.0);
}

TEST(Denoiser, BudgetPicksWidestFit) {
  DenoiserConfig c = small_config();
  const int w = hidden_width_for_budget(c, 5000);
  c.hidden_width = w;
  EXPECT_LE(parameter_count(c), 5000u);
  c.hidden_width = w + 1;
  EXPECT_GT(parameter_count(c), 5000u);
}

TEST(Denoiser, ForwardMatchesFloat64Reference) {
  const DenoiserConfig c = small_config();
  DenoiserParams p = DenoiserParams::initialize(c, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(-0.3f, 0.3f);
  for (auto& v : p.tensors().back().mutable_data()) v = u(rng);
  for (auto& v : p.tensors()[p.tensors().size() - 2].mutable_data()) v = u(rng);
  std::vector<float> x(2 * 6), cond(2 * 8);
  for (auto& v : x) v = u(rng);
  for (auto& v : cond) v = u(rng);
  const std::vector<int> steps{3, 91};
  const Tensor out = predict_noise(p, Tensor::from_data({2, 6}, x), steps,
                                   Tensor::from_data({2, 8}, cond));
  const auto ref = oracle::ReferenceDenoiser(p).forward({x.begin(), x.end()}, steps,
                                                        {cond.begin(), cond.end()});
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.data()[i], ref[i], 1e-5);
}

TEST(Denoiser, ZeroHeadPredictsZero) {
  const DenoiserConfig c = small_config();
  const DenoiserParams p = DenoiserParams::initialize(c, 1);
  const std::vector<int> steps{5};
  const Tensor out = predict_noise(p, Tensor::full({1, 6}, 0.3f), steps, Tensor::full({1, 8}, 0.1f));
  for (float v : out.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Denoiser, RejectsWidthMismatch) {
  const DenoiserParams p = DenoiserParams::initialize(small_config(), 1);
  const std::vector<int> steps{5};
  EXPECT_THROW(predict_noise(p, Tensor::zeros({1, 5}), steps, Tensor::zeros({1, 8})),
               std::invalid_argument);
  EXPECT_THROW(predict_noise(p, Tensor::zeros({1, 6}), steps, Tensor::zeros({1, 7})),
               std::invalid_argument);
}

TEST(Denoiser, GradientsMatchFloat64FiniteDifferences) {
  const auto probes = oracle::denoiser_gradient_probes(21, 20);
  for (const auto& p : probes) {
    EXPECT_LT(p.relative_error, 1e-3) << p.tensor << "[" << p.index << "] analytic " << p.analytic
                                      << " numeric " << p.numeric;
  }
}

TEST(Denoiser, EmaBlend) {
  const DenoiserConfig c = small_config();
  DenoiserParams ema = DenoiserParams::zeros(c);
  DenoiserParams cur = DenoiserParams::zeros(c);
  for (auto& t : cur.tensors()) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 1.0f);
  ema.blend_towards(cur, 0.995f);
  for (const auto& t : ema.tensors()) {
    for (float v : t.data()) EXPECT_NEAR(v, 0.005f, 1e-7);
  }
}
