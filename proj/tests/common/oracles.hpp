#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls into the library's own math for
// the quantity being checked.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "posedp/denoiser.hpp"
#include "posedp/diffusion.hpp"
#include "posedp/perception.hpp"
#include "posedp/pose.hpp"
#include "posedp/tensor.hpp"

namespace posedp::oracle {

// Float64 forward pass of the residual-MLP denoiser, written out from the
// architecture description.
class ReferenceDenoiser {
 public:
  explicit ReferenceDenoiser(const DenoiserParams& p) : config_(p.config()) {
    for (const auto& t : p.tensors()) {
      params_.emplace_back(t.data().begin(), t.data().end());
    }
  }

  std::vector<std::vector<double>>& params() { return params_; }

  std::vector<double> forward(const std::vector<double>& x,
                              const std::vector<int>& steps,
                              const std::vector<double>& cond) const {
    const std::size_t chunk = static_cast<std::size_t>(config_.chunk_width());
    const std::size_t cw = static_cast<std::size_t>(config_.cond_width());
    const std::size_t h = static_cast<std::size_t>(config_.hidden_width);
    const std::size_t batch = steps.size();
    std::vector<double> out;
    for (std::size_t b = 0; b < batch; ++b) {
      std::size_t i = 0;
      const std::vector<double> c(cond.begin() + static_cast<std::ptrdiff_t>(b * cw),
                                  cond.begin() + static_cast<std::ptrdiff_t>((b + 1) * cw));
      std::vector<double> in(x.begin() + static_cast<std::ptrdiff_t>(b * chunk),
                             x.begin() + static_cast<std::ptrdiff_t>((b + 1) * chunk));
      const auto emb = embedding(steps[b], config_.embed_dim);
      in.insert(in.end(), emb.begin(), emb.end());
      in.insert(in.end(), c.begin(), c.end());
      std::vector<double> hid = linear(in, params_[i], params_[i + 1], h);
      i += 2;
      for (int blk = 0; blk < config_.depth; ++blk) {
        std::vector<double> u = norm(hid, params_[i], params_[i + 1]);
        u.insert(u.end(), c.begin(), c.end());
        std::vector<double> z = linear(u, params_[i + 2], params_[i + 3], h);
        for (auto& v : z) v = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
        const std::vector<double> r = linear(z, params_[i + 4], params_[i + 5], h);
        for (std::size_t j = 0; j < h; ++j) hid[j] += r[j];
        i += 6;
      }
      const std::vector<double> y =
          linear(norm(hid, params_[i], params_[i + 1]), params_[i + 2], params_[i + 3], chunk);
      out.insert(out.end(), y.begin(), y.end());
    }
    return out;
  }

  static std::vector<double> embedding(int k, int dim) {
    std::vector<double> e;
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
      e.push_back(std::sin(k * freq));
      e.push_back(std::cos(k * freq));
    }
    return e;
  }

 private:
  static std::vector<double> linear(const std::vector<double>& in,
                                    const std::vector<double>& w,
                                    const std::vector<double>& b, std::size_t out) {
    std::vector<double> y(b.begin(), b.end());
    for (std::size_t r = 0; r < in.size(); ++r) {
      for (std::size_t c = 0; c < out; ++c) y[c] += in[r] * w[r * out + c];
    }
    return y;
  }

  static std::vector<double> norm(const std::vector<double>& x,
                                  const std::vector<double>& gain,
                                  const std::vector<double>& bias) {
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    std::vector<double> y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) y[j] = (x[j] - mu) * inv * gain[j] + bias[j];
    return y;
  }

  DenoiserConfig config_;
  std::vector<std::vector<double>> params_;
};

struct GradientProbe {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

// |a - n| / max(|a|, |n|), with a floor on the denominator so gradients
// that are zero in both computations do not divide by zero.
inline double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

// Compares tape gradients of an MSE loss against central differences of the
// float64 reference, probing `probes_per_tensor` entries of every tensor.
inline std::vector<GradientProbe> denoiser_gradient_probes(std::uint64_t seed,
                                                           int probes_per_tensor,
                                                           double h = 1e-6) {
  DenoiserConfig cfg;
  cfg.hidden_width = 12;
  cfg.depth = 2;
  cfg.embed_dim = 8;
  cfg.action_dim = 2;
  cfg.horizon = 3;
  cfg.obs_dim = 3;
  cfg.obs_horizon = 2;
  const std::size_t batch = 3;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  DenoiserParams params = DenoiserParams::zeros(cfg);
  for (auto& t : params.tensors()) {
    const bool gain = t.name().ends_with("norm.gain");
    for (auto& v : t.mutable_data()) v = gain ? 1.0f + u(rng) : u(rng);
  }
  auto fill = [&](std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = 2.0f * u(rng);
    return v;
  };
  const std::size_t chunk = static_cast<std::size_t>(cfg.chunk_width());
  const std::size_t cw = static_cast<std::size_t>(cfg.cond_width());
  const std::vector<float> x = fill(batch * chunk);
  const std::vector<float> c = fill(batch * cw);
  const std::vector<float> target = fill(batch * chunk);
  std::uniform_int_distribution<int> step(1, 100);
  const std::vector<int> steps{step(rng), step(rng), step(rng)};

  Tape tape;
  const Tensor pred = predict_noise(params, Tensor::from_data({batch, chunk}, x), steps,
                                    Tensor::from_data({batch, cw}, c), &tape);
  const Tensor loss = ops::mse(&tape, pred, Tensor::from_data({batch, chunk}, target));
  backward(tape, loss);

  ReferenceDenoiser ref(params);
  const std::vector<double> xd(x.begin(), x.end());
  const std::vector<double> cd(c.begin(), c.end());
  auto ref_loss = [&]() {
    const auto y = ref.forward(xd, steps, cd);
    double sum = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) sum += (y[j] - target[j]) * (y[j] - target[j]);
    return sum / static_cast<double>(y.size());
  };

  std::vector<GradientProbe> probes;
  for (std::size_t t = 0; t < params.tensors().size(); ++t) {
    const Tensor& tensor = params.tensors()[t];
    std::uniform_int_distribution<std::size_t> pick(0, tensor.numel() - 1);
    for (int p = 0; p < probes_per_tensor; ++p) {
      const std::size_t idx = pick(rng);
      double& w = ref.params()[t][idx];
      const double saved = w;
      w = saved + h;
      const double up = ref_loss();
      w = saved - h;
      const double down = ref_loss();
      w = saved;
      GradientProbe probe;
      probe.tensor = tensor.name();
      probe.index = idx;
      probe.analytic = tensor.grad()[idx];
      probe.numeric = (up - down) / (2.0 * h);
      probe.relative_error = relative_error(probe.analytic, probe.numeric);
      probes.push_back(probe);
    }
  }
  return probes;
}

struct MomentCheck {
  double max_mean_sigmas = 0.0;       // worst |mean - expected| / standard error
  double max_mean_rel_error = 0.0;    // worst |mean - expected| / |expected|
  double max_variance_rel_error = 0.0;
};

// Monte-Carlo moments of q_sample against sqrt(abar) x0 and 1 - abar.
inline MomentCheck q_sample_moments(const NoiseSchedule& schedule, int k,
                                    const std::vector<float>& x0, int draws,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  const std::size_t n = x0.size();
  std::vector<double> sum(n, 0.0), sq(n, 0.0);
  std::vector<float> eps(n);
  for (int d = 0; d < draws; ++d) {
    for (auto& e : eps) e = normal(rng);
    const auto xk = q_sample(x0, k, eps, schedule);
    for (std::size_t i = 0; i < n; ++i) {
      sum[i] += xk[i];
      sq[i] += static_cast<double>(xk[i]) * xk[i];
    }
  }
  double abar = 1.0;
  for (int j = 1; j <= k; ++j) abar *= 1.0 - schedule.beta(j);
  MomentCheck out;
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = sum[i] / draws;
    const double var = sq[i] / draws - mean * mean;
    const double expected_var = 1.0 - abar;
    const double se = std::sqrt(expected_var / draws);
    const double expected_mean = std::sqrt(abar) * x0[i];
    out.max_mean_sigmas = std::max(out.max_mean_sigmas, std::abs(mean - expected_mean) / se);
    out.max_mean_rel_error =
        std::max(out.max_mean_rel_error, std::abs(mean - expected_mean) / std::abs(expected_mean));
    out.max_variance_rel_error =
        std::max(out.max_variance_rel_error, std::abs(var - expected_var) / expected_var);
  }
  return out;
}

// Largest deviation between the stored schedule and a float64 recomputation
// of the linear betas and their running products.
inline double schedule_recompute_error(const NoiseSchedule& s, double beta_start,
                                       double beta_end) {
  const int K = s.steps();
  double worst = 0.0;
  double abar = 1.0;
  for (int k = 1; k <= K; ++k) {
    const double beta = K == 1 ? beta_start
                               : beta_start + (beta_end - beta_start) * (k - 1) / (K - 1);
    abar *= 1.0 - beta;
    worst = std::max({worst, std::abs(s.beta(k) - beta), std::abs(s.alpha(k) - (1.0 - beta)),
                      std::abs(s.alpha_bar(k) - abar)});
  }
  return worst;
}

// Runs the sampler with a predictor that returns the exact noise that maps
// the current sample back onto x0; returns the max-abs recovery error.
inline double identity_denoiser_error(const NoiseSchedule& schedule,
                                      const std::vector<float>& x0, int horizon,
                                      int action_dim, std::uint64_t seed) {
  const EpsPredictor exact = [&](std::span<const float> xk, int k, std::span<const float>) {
    double abar = 1.0;
    for (int j = 1; j <= k; ++j) abar *= 1.0 - schedule.beta(j);
    std::vector<float> eps(xk.size());
    for (std::size_t i = 0; i < xk.size(); ++i) {
      eps[i] = static_cast<float>((xk[i] - std::sqrt(abar) * x0[i]) / std::sqrt(1.0 - abar));
    }
    return eps;
  };
  Rng rng(seed);
  const std::vector<float> cond{0.0f};
  const ActionChunk out = ddpm_sample(exact, cond, horizon, action_dim, schedule, rng,
                                      SamplerOptions{.stochastic = false});
  double worst = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(out.values()[i]) - x0[i]));
  }
  return worst;
}

struct QuaternionPropertyCheck {
  double max_self_distance = 0.0;
  double max_double_cover_gap = 0.0;
  double max_symmetry_gap = 0.0;
  double max_distance = 0.0;
  double max_triangle_violation = 0.0;
  double max_norm_error = 0.0;
};

// Reference angle between rotations: 2 acos(|<a, b>|), computed directly.
inline double reference_angle(const Quaternion& a, const Quaternion& b) {
  const double d = std::abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z);
  return 2.0 * std::acos(std::min(1.0, d));
}

inline Quaternion random_unit_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return quat_normalize({n(rng), n(rng), n(rng), n(rng)});
}

inline QuaternionPropertyCheck quaternion_properties(int triples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  QuaternionPropertyCheck out;
  for (int i = 0; i < triples; ++i) {
    const Quaternion a = random_unit_quaternion(rng);
    const Quaternion b = random_unit_quaternion(rng);
    const Quaternion c = random_unit_quaternion(rng);
    const double ab = quat_angular_distance(a, b);
    const double bc = quat_angular_distance(b, c);
    const double ac = quat_angular_distance(a, c);
    out.max_norm_error = std::max(out.max_norm_error, std::abs(a.norm() - 1.0));
    out.max_self_distance = std::max(out.max_self_distance, quat_angular_distance(a, a));
    out.max_double_cover_gap =
        std::max(out.max_double_cover_gap, std::abs(quat_angular_distance(a, -b) - ab));
    out.max_symmetry_gap = std::max(out.max_symmetry_gap, std::abs(ab - quat_angular_distance(b, a)));
    out.max_distance = std::max({out.max_distance, ab, bc, ac});
    out.max_triangle_violation = std::max(out.max_triangle_violation, ac - (ab + bc));
  }
  return out;
}

// Largest |orientation error - phi| over a tracked trajectory with zero
// noise and a constant canonical offset of angle phi about `axis`.
inline double canonical_offset_deviation(double phi, std::array<double, 3> axis,
                                         int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Pose> truth;
  for (int f = 0; f < frames; ++f) {
    truth.push_back(Pose::make({u(rng), u(rng), 0.0}, random_unit_quaternion(rng)));
  }
  TrackerConfig cfg = TrackerConfig::noiseless();
  cfg.canonical_offsets = {Quaternion::from_axis_angle(axis, phi)};
  const PoseTrace trace = emulate_tracking({truth}, cfg, rng);
  double worst = 0.0;
  for (int f = 0; f < frames; ++f) {
    const double err = reference_angle(trace.objects[0][static_cast<std::size_t>(f)].rotation,
                                       truth[static_cast<std::size_t>(f)].rotation);
    worst = std::max(worst, std::abs(err - phi));
  }
  return worst;
}

struct TranslationNoiseCheck {
  double measured = 0.0;  // tracker mean translation error
  double oracle = 0.0;    // Monte-Carlo mean norm of an isotropic 3D Gaussian
  double relative_gap() const { return std::abs(measured - oracle) / oracle; }
};

inline TranslationNoiseCheck translation_noise(double sigma_pos, int frames,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Pose> truth(static_cast<std::size_t>(frames), Pose::planar(0.1, -0.2, 0.3));
  TrackerConfig cfg = TrackerConfig::noiseless();
  cfg.sigma_pos = sigma_pos;
  cfg.sigma_rot = 0.01;
  const PoseErrors errors = pose_errors(emulate_tracking({truth}, cfg, rng), {truth});

  std::mt19937_64 mc_rng(seed ^ 0x5bd1e995u);
  std::normal_distribution<double> n(0.0, sigma_pos);
  double sum = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    const double x = n(mc_rng), y = n(mc_rng), z = n(mc_rng);
    sum += std::sqrt(x * x + y * y + z * z);
  }
  return {errors.position, sum / draws};
}

}  // namespace posedp::oracle
