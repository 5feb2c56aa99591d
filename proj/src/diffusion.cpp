#include "posedp/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace posedp {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start,
                                    double beta_end) {
  if (steps < 2) {
    throw std::invalid_argument("noise schedule needs K >= 2, got " +
                                std::to_string(steps));
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument(
        "noise schedule needs 0 < beta_start <= beta_end < 1, got (" +
        std::to_string(beta_start) + ", " + std::to_string(beta_end) + ")");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double frac = static_cast<double>(i) / (steps - 1);
    betas[static_cast<std::size_t>(i)] = beta_start + frac * (beta_end - beta_start);
  }
  return from_betas(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw std::invalid_argument("noise schedule is empty");
  NoiseSchedule s;
  double running = 1.0;
  for (double b : betas) {
    if (!(b >= 0.0 && b < 1.0)) {
      throw std::invalid_argument("beta outside [0, 1): " + std::to_string(b));
    }
    s.alphas_.push_back(1.0 - b);
    running *= 1.0 - b;
    s.alpha_bars_.push_back(running);
  }
  s.betas_ = std::move(betas);
  return s;
}

double NoiseSchedule::sigma(int k) const { return std::sqrt(beta(k)); }

void NoiseSchedule::check_step(int k) const {
  if (k < 1 || k > steps()) {
    throw std::out_of_range("diffusion step " + std::to_string(k) +
                            " outside [1, " + std::to_string(steps()) + "]");
  }
}

std::size_t NoiseSchedule::index(int k) const {
  check_step(k);
  return static_cast<std::size_t>(k - 1);
}

NoiseSchedule default_schedule() {
  return NoiseSchedule::linear(kDefaultDiffusionSteps, kDefaultBetaStart,
                               kDefaultBetaEnd);
}

// ---------------------------------------------------------------- chunk

ActionChunk::ActionChunk(int horizon, int action_dim)
    : ActionChunk(horizon, action_dim,
                  std::vector<float>(static_cast<std::size_t>(
                      std::max(horizon, 0) * std::max(action_dim, 0)))) {}

ActionChunk::ActionChunk(int horizon, int action_dim, std::vector<float> values)
    : horizon_(horizon), action_dim_(action_dim), values_(std::move(values)) {
  if (horizon < 1 || action_dim < 1) {
    throw std::invalid_argument("action chunk needs horizon >= 1 and dim >= 1");
  }
  if (values_.size() != static_cast<std::size_t>(horizon * action_dim)) {
    throw std::invalid_argument("action chunk size mismatch");
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("action chunk entry is not finite");
  }
}

std::span<const float> ActionChunk::row(int t) const {
  if (t < 0 || t >= horizon_) throw std::out_of_range("action chunk row");
  return std::span<const float>(values_).subspan(
      static_cast<std::size_t>(t * action_dim_),
      static_cast<std::size_t>(action_dim_));
}

// ---------------------------------------------------------------- math

std::vector<float> q_sample(std::span<const float> x0, int k,
                            std::span<const float> eps,
                            const NoiseSchedule& schedule) {
  schedule.check_step(k);
  if (x0.size() != eps.size()) {
    throw std::invalid_argument("q_sample: eps has " + std::to_string(eps.size()) +
                                " entries, x0 has " + std::to_string(x0.size()));
  }
  const double abar = schedule.alpha_bar(k);
  const auto signal = static_cast<float>(std::sqrt(abar));
  const auto noise = static_cast<float>(std::sqrt(1.0 - abar));
  std::vector<float> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = signal * x0[i] + noise * eps[i];
  return out;
}

std::vector<float> reverse_mean(std::span<const float> x_k, int k,
                                std::span<const float> eps_pred,
                                const NoiseSchedule& schedule) {
  schedule.check_step(k);
  if (x_k.size() != eps_pred.size()) {
    throw std::invalid_argument("reverse_mean: prediction has " +
                                std::to_string(eps_pred.size()) +
                                " entries, x_k has " + std::to_string(x_k.size()));
  }
  const double beta = schedule.beta(k);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(k));
  const double eps_coef =
      beta == 0.0 ? 0.0 : beta / std::sqrt(1.0 - schedule.alpha_bar(k));
  std::vector<float> out(x_k.size());
  for (std::size_t i = 0; i < x_k.size(); ++i) {
    out[i] = static_cast<float>(inv_sqrt_alpha * (x_k[i] - eps_coef * eps_pred[i]));
  }
  return out;
}

ActionChunk ddpm_sample(const EpsPredictor& predictor,
                        std::span<const float> cond, int horizon,
                        int action_dim, const NoiseSchedule& schedule,
                        Rng& rng, SamplerOptions options) {
  const auto n = static_cast<std::size_t>(horizon * action_dim);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> x(n);
  for (auto& v : x) v = normal(rng);
  for (int k = schedule.steps(); k >= 1; --k) {
    const auto eps = predictor(x, k, cond);
    if (eps.size() != n) {
      throw std::invalid_argument("ddpm_sample: predictor returned " +
                                  std::to_string(eps.size()) + " values, expected " +
                                  std::to_string(n));
    }
    x = reverse_mean(x, k, eps, schedule);
    if (k > 1 && options.stochastic) {
      const auto sigma = static_cast<float>(schedule.sigma(k));
      for (auto& v : x) v += sigma * normal(rng);
    }
    for (float v : x) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("ddpm_sample: non-finite value at step k=" +
                                 std::to_string(k));
      }
    }
  }
  for (auto& v : x) v = std::clamp(v, -1.0f, 1.0f);
  return ActionChunk(horizon, action_dim, std::move(x));
}

float training_loss(const BatchEpsPredictor& predictor, const Tensor& x0,
                    const Tensor& cond, const NoiseSchedule& schedule,
                    Rng& rng, Tape* tape) {
  if (x0.rank() != 2 || x0.dim(0) == 0) {
    throw std::invalid_argument("training_loss: expected nonempty [B, D] batch");
  }
  const std::size_t batch = x0.dim(0);
  const std::size_t width = x0.dim(1);
  std::uniform_int_distribution<int> pick_step(1, schedule.steps());
  std::normal_distribution<float> normal(0.0f, 1.0f);

  std::vector<int> steps(batch);
  std::vector<float> eps(x0.numel());
  std::vector<float> noisy(x0.numel());
  auto clean = x0.data();
  for (std::size_t b = 0; b < batch; ++b) {
    steps[b] = pick_step(rng);
    const double abar = schedule.alpha_bar(steps[b]);
    const auto signal = static_cast<float>(std::sqrt(abar));
    const auto noise = static_cast<float>(std::sqrt(1.0 - abar));
    for (std::size_t i = 0; i < width; ++i) {
      const std::size_t j = b * width + i;
      eps[j] = normal(rng);
      noisy[j] = signal * clean[j] + noise * eps[j];
    }
  }
  const Tensor target = Tensor::from_data(x0.shape(), std::move(eps));
  const Tensor x_k = Tensor::from_data(x0.shape(), std::move(noisy));
  const Tensor predicted = predictor(tape, x_k, steps, cond);
  const Tensor loss = ops::mse(tape, predicted, target);
  const float value = loss.item();
  if (!std::isfinite(value)) {
    throw std::runtime_error("training_loss: non-finite loss");
  }
  if (tape != nullptr && loss.requires_grad()) backward(*tape, loss);
  return value;
}

}  // namespace posedp
