#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "posedp/tensor.hpp"

namespace posedp {

using Rng = std::mt19937_64;

/// Per-step DDPM schedule tables, indexed 1..K.
class NoiseSchedule {
 public:
  /// Linear beta interpolation from beta_start (k=1) to beta_end (k=K).
  static NoiseSchedule linear(int steps, double beta_start, double beta_end);

  /// Schedule built from explicit betas; each must lie in [0, 1).
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int k) const { return betas_.at(index(k)); }
  double alpha(int k) const { return alphas_.at(index(k)); }
  double alpha_bar(int k) const { return alpha_bars_.at(index(k)); }
  /// Ancestral sampling std for step k (sqrt(beta_k)).
  double sigma(int k) const;

  std::span<const double> betas() const { return betas_; }
  std::span<const double> alphas() const { return alphas_; }
  std::span<const double> alpha_bars() const { return alpha_bars_; }

  void check_step(int k) const;

 private:
  std::size_t index(int k) const;

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

inline constexpr int kDefaultDiffusionSteps = 100;
inline constexpr double kDefaultBetaStart = 1e-3;
inline constexpr double kDefaultBetaEnd = 0.2;

NoiseSchedule default_schedule();

/// H_p rows of d_a normalized action values.
class ActionChunk {
 public:
  ActionChunk(int horizon, int action_dim);
  ActionChunk(int horizon, int action_dim, std::vector<float> values);

  int horizon() const { return horizon_; }
  int action_dim() const { return action_dim_; }
  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }
  std::span<const float> row(int t) const;
  float at(int t, int d) const { return values_.at(static_cast<std::size_t>(t * action_dim_ + d)); }

 private:
  int horizon_;
  int action_dim_;
  std::vector<float> values_;
};

/// x_k = sqrt(abar_k) x0 + sqrt(1 - abar_k) eps. The caller supplies eps.
std::vector<float> q_sample(std::span<const float> x0, int k,
                            std::span<const float> eps,
                            const NoiseSchedule& schedule);

/// Reverse-process mean from a noise prediction:
/// (x_k - beta_k / sqrt(1 - abar_k) * eps_pred) / sqrt(alpha_k).
std::vector<float> reverse_mean(std::span<const float> x_k, int k,
                                std::span<const float> eps_pred,
                                const NoiseSchedule& schedule);

/// Noise prediction for a single chunk: (x_k, k, cond) -> eps.
using EpsPredictor = std::function<std::vector<float>(
    std::span<const float> x_k, int k, std::span<const float> cond)>;

struct SamplerOptions {
  /// When false, sigma_k is forced to zero (deterministic reverse chain).
  bool stochastic = true;
};

/// Ancestral DDPM sampling from pure noise down to k = 1, clipped to [-1, 1].
ActionChunk ddpm_sample(const EpsPredictor& predictor,
                        std::span<const float> cond, int horizon,
                        int action_dim, const NoiseSchedule& schedule,
                        Rng& rng, SamplerOptions options = {});

/// Batched differentiable noise prediction used during training.
using BatchEpsPredictor = std::function<Tensor(
    Tape* tape, const Tensor& x_k, std::span<const int> steps,
    const Tensor& cond)>;

/// Denoising objective ||eps - eps_theta(x_k, k, cond)||^2 averaged over
/// batch and dimensions, with k ~ U{1..K} drawn per sample. When a tape is
/// given and the prediction depends on parameters, gradients are
/// back-propagated into them before returning.
float training_loss(const BatchEpsPredictor& predictor, const Tensor& x0,
                    const Tensor& cond, const NoiseSchedule& schedule,
                    Rng& rng, Tape* tape);

}  // namespace posedp
