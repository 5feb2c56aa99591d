#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "posedp/tensor.hpp"

namespace posedp {

/// Architecture of the residual-MLP noise predictor.
///
/// Input layer sees [x_k | timestep embedding | condition]. Each residual
/// block computes h += fc2(gelu(fc1([layer_norm(h) | condition]))). The
/// output head is layer_norm followed by a zero-initialized linear map back
/// to the flattened chunk width.
struct DenoiserConfig {
  int hidden_width = 96;
  int depth = 2;
  int embed_dim = 32;
  int action_dim = 4;
  int horizon = 8;      // H_p
  int obs_dim = 12;     // d_o, width of one encoded observation frame
  int obs_horizon = 2;  // H_o

  int chunk_width() const { return horizon * action_dim; }
  int cond_width() const { return obs_horizon * obs_dim; }
  int input_width() const { return chunk_width() + embed_dim + cond_width(); }

  void validate() const;
  bool operator==(const DenoiserConfig&) const = default;
};

std::size_t linear_parameter_count(std::size_t in, std::size_t out);
std::size_t parameter_count(const DenoiserConfig& config);

/// Largest hidden width whose parameter count does not exceed the budget,
/// with every other field taken from `config`.
int hidden_width_for_budget(DenoiserConfig config, std::size_t budget);

/// Sinusoidal embedding of diffusion step k: pairs (sin, cos) at
/// geometrically spaced frequencies 10000^(-i / (embed_dim / 2)).
std::vector<float> timestep_embedding(int k, int embed_dim);

class DenoiserParams {
 public:
  /// Fan-in-scaled uniform init; the output layer starts at zero.
  static DenoiserParams initialize(const DenoiserConfig& config,
                                   std::uint64_t seed);
  /// All tensors zero-filled, shapes from config.
  static DenoiserParams zeros(const DenoiserConfig& config);

  const DenoiserConfig& config() const { return config_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const Tensor& get(const std::string& name) const;
  std::size_t size() const;

  DenoiserParams clone() const;

  /// ema <- decay * ema + (1 - decay) * current, tensor by tensor.
  void blend_towards(const DenoiserParams& current, float decay);

 private:
  DenoiserConfig config_;
  std::vector<Tensor> tensors_;
};

/// Ordered (name, shape) list; this order is also the checkpoint order.
std::vector<std::pair<std::string, Shape>> parameter_layout(
    const DenoiserConfig& config);

/// eps_theta(x_k, k, cond) for a batch: x_k is [B, H_p*d_a], cond is
/// [B, H_o*d_o], steps holds one diffusion step per row.
Tensor predict_noise(const DenoiserParams& params, const Tensor& x_k,
                     std::span<const int> steps, const Tensor& cond,
                     Tape* tape = nullptr);

}  // namespace posedp
