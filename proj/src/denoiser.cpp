#include "posedp/denoiser.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace posedp {

namespace {

std::string block_prefix(int b) { return "block" + std::to_string(b) + "."; }

Tensor linear(Tape* tape, const Tensor& x, const Tensor& weight,
              const Tensor& bias) {
  return ops::add(tape, ops::matmul(tape, x, weight), bias);
}

[[noreturn]] void width_error(const char* what, std::size_t expected,
                              std::size_t actual) {
  throw std::invalid_argument(std::string("predict_noise: ") + what +
                              " width expected " + std::to_string(expected) +
                              ", got " + std::to_string(actual));
}

}  // namespace

void DenoiserConfig::validate() const {
  if (hidden_width < 1 || depth < 1 || embed_dim < 2 || action_dim < 1 ||
      horizon < 1 || obs_dim < 1 || obs_horizon < 1) {
    throw std::invalid_argument("denoiser config fields must be positive");
  }
  if (embed_dim % 2 != 0) {
    throw std::invalid_argument("denoiser embed_dim must be even");
  }
}

std::size_t linear_parameter_count(std::size_t in, std::size_t out) {
  return in * out + out;
}

std::size_t parameter_count(const DenoiserConfig& c) {
  c.validate();
  const auto h = static_cast<std::size_t>(c.hidden_width);
  const auto cond = static_cast<std::size_t>(c.cond_width());
  const auto chunk = static_cast<std::size_t>(c.chunk_width());
  const std::size_t block = 2 * h + linear_parameter_count(h + cond, h) +
                            linear_parameter_count(h, h);
  return linear_parameter_count(static_cast<std::size_t>(c.input_width()), h) +
         static_cast<std::size_t>(c.depth) * block + 2 * h +
         linear_parameter_count(h, chunk);
}

int hidden_width_for_budget(DenoiserConfig config, std::size_t budget) {
  int best = 0;
  for (int h = 1; h <= 4096; ++h) {
    config.hidden_width = h;
    if (parameter_count(config) > budget) break;
    best = h;
  }
  if (best == 0) throw std::invalid_argument("parameter budget too small");
  return best;
}

std::vector<float> timestep_embedding(int k, int embed_dim) {
  if (embed_dim < 2 || embed_dim % 2 != 0) {
    throw std::invalid_argument("timestep embedding dim must be even, got " +
                                std::to_string(embed_dim));
  }
  if (k < 1) throw std::out_of_range("timestep must be >= 1");
  const int half = embed_dim / 2;
  std::vector<float> out(static_cast<std::size_t>(embed_dim));
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    const double angle = k * freq;
    out[static_cast<std::size_t>(2 * i)] = static_cast<float>(std::sin(angle));
    out[static_cast<std::size_t>(2 * i + 1)] = static_cast<float>(std::cos(angle));
  }
  return out;
}

std::vector<std::pair<std::string, Shape>> parameter_layout(
    const DenoiserConfig& c) {
  c.validate();
  const auto h = static_cast<std::size_t>(c.hidden_width);
  const auto cond = static_cast<std::size_t>(c.cond_width());
  std::vector<std::pair<std::string, Shape>> layout;
  layout.push_back({"input.weight", {static_cast<std::size_t>(c.input_width()), h}});
  layout.push_back({"input.bias", {h}});
  for (int b = 0; b < c.depth; ++b) {
    const auto p = block_prefix(b);
    layout.push_back({p + "norm.gain", {h}});
    layout.push_back({p + "norm.bias", {h}});
    layout.push_back({p + "fc1.weight", {h + cond, h}});
    layout.push_back({p + "fc1.bias", {h}});
    layout.push_back({p + "fc2.weight", {h, h}});
    layout.push_back({p + "fc2.bias", {h}});
  }
  layout.push_back({"head.norm.gain", {h}});
  layout.push_back({"head.norm.bias", {h}});
  layout.push_back({"head.weight", {h, static_cast<std::size_t>(c.chunk_width())}});
  layout.push_back({"head.bias", {static_cast<std::size_t>(c.chunk_width())}});
  return layout;
}

DenoiserParams DenoiserParams::zeros(const DenoiserConfig& config) {
  DenoiserParams p;
  p.config_ = config;
  for (auto& [name, shape] : parameter_layout(config)) {
    Tensor t = Tensor::zeros(shape, true);
    t.set_name(name);
    p.tensors_.push_back(std::move(t));
  }
  return p;
}

DenoiserParams DenoiserParams::initialize(const DenoiserConfig& config,
                                          std::uint64_t seed) {
  DenoiserParams p = zeros(config);
  std::mt19937_64 rng(seed);
  const auto layout = parameter_layout(config);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& name = layout[i].first;
    auto data = p.tensors_[i].mutable_data();
    if (name.starts_with("head.weight") || name.starts_with("head.bias") ||
        name.ends_with("norm.bias")) {
      continue;
    }
    if (name.ends_with("norm.gain")) {
      std::fill(data.begin(), data.end(), 1.0f);
      continue;
    }
    // Biases share the fan-in of the weight that precedes them.
    const Shape& weight_shape =
        name.ends_with(".bias") ? layout[i - 1].second : layout[i].second;
    const float bound = 1.0f / std::sqrt(static_cast<float>(weight_shape[0]));
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (auto& v : data) v = dist(rng);
  }
  return p;
}

const Tensor& DenoiserParams::get(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name() == name) return t;
  }
  throw std::out_of_range("no denoiser parameter named '" + name + "'");
}

std::size_t DenoiserParams::size() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

DenoiserParams DenoiserParams::clone() const {
  DenoiserParams p;
  p.config_ = config_;
  for (const auto& t : tensors_) p.tensors_.push_back(t.clone());
  return p;
}

void DenoiserParams::blend_towards(const DenoiserParams& current, float decay) {
  if (current.tensors_.size() != tensors_.size()) {
    throw std::invalid_argument("EMA blend: parameter sets differ");
  }
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    auto dst = tensors_[i].mutable_data();
    auto src = current.tensors_[i].data();
    for (std::size_t j = 0; j < dst.size(); ++j) {
      dst[j] = decay * dst[j] + (1.0f - decay) * src[j];
    }
  }
}

Tensor predict_noise(const DenoiserParams& params, const Tensor& x_k,
                     std::span<const int> steps, const Tensor& cond,
                     Tape* tape) {
  const auto& c = params.config();
  if (x_k.rank() != 2) width_error("x_k rank", 2, x_k.rank());
  const std::size_t batch = x_k.dim(0);
  if (x_k.dim(1) != static_cast<std::size_t>(c.chunk_width())) {
    width_error("action chunk", static_cast<std::size_t>(c.chunk_width()), x_k.dim(1));
  }
  if (cond.rank() != 2 || cond.dim(0) != batch) {
    width_error("condition batch", batch, cond.rank() == 2 ? cond.dim(0) : 0);
  }
  if (cond.dim(1) != static_cast<std::size_t>(c.cond_width())) {
    width_error("condition", static_cast<std::size_t>(c.cond_width()), cond.dim(1));
  }
  if (steps.size() != batch) width_error("step list", batch, steps.size());

  const auto e = static_cast<std::size_t>(c.embed_dim);
  std::vector<float> embed(batch * e);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = timestep_embedding(steps[b], c.embed_dim);
    std::copy(row.begin(), row.end(), embed.begin() + static_cast<std::ptrdiff_t>(b * e));
  }
  const Tensor temb = Tensor::from_data({batch, e}, std::move(embed));

  const auto& t = params.tensors();
  std::size_t i = 0;
  auto next = [&]() -> const Tensor& { return t[i++]; };

  const Tensor& w_in = next();
  const Tensor& b_in = next();
  Tensor h = linear(tape, ops::concat(tape, {x_k, temb, cond}), w_in, b_in);
  for (int blk = 0; blk < c.depth; ++blk) {
    const Tensor& gain = next();
    const Tensor& shift = next();
    const Tensor& w1 = next();
    const Tensor& b1 = next();
    const Tensor& w2 = next();
    const Tensor& b2 = next();
    Tensor u = ops::layer_norm(tape, h, gain, shift);
    Tensor z = ops::gelu(tape, linear(tape, ops::concat(tape, {u, cond}), w1, b1));
    h = ops::add(tape, h, linear(tape, z, w2, b2));
  }
  const Tensor& head_gain = next();
  const Tensor& head_shift = next();
  const Tensor& w_out = next();
  const Tensor& b_out = next();
  return linear(tape, ops::layer_norm(tape, h, head_gain, head_shift), w_out, b_out);
}

}  // namespace posedp
