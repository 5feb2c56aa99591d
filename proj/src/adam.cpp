#include "posedp/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace posedp {

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p.shape()));
    v_.push_back(Tensor::zeros(p.shape()));
  }
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (float g : params_[i].grad()) {
      if (!std::isfinite(g)) {
        const auto& name = params_[i].name();
        throw std::runtime_error(
            "adam: non-finite gradient in parameter '" +
            (name.empty() ? "#" + std::to_string(i) : name) + "'");
      }
    }
  }
  ++step_;
  const auto t = static_cast<double>(step_);
  const float correction1 =
      static_cast<float>(1.0 - std::pow(static_cast<double>(options_.beta1), t));
  const float correction2 =
      static_cast<float>(1.0 - std::pow(static_cast<double>(options_.beta2), t));
  const float b1 = options_.beta1;
  const float b2 = options_.beta2;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto p = params_[i].mutable_data();
    auto g = params_[i].grad();
    auto m = m_[i].mutable_data();
    auto v = v_[i].mutable_data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      const float m_hat = m[j] / correction1;
      const float v_hat = v[j] / correction2;
      p[j] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace posedp
