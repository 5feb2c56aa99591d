#include "posedp/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace posedp {

namespace detail {
struct TensorStorage {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;
  bool requires_grad = false;
  std::string name;
};
}  // namespace detail

namespace {

using RowMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have rank >= 1");
  for (auto extent : shape) {
    if (extent == 0) {
      throw std::invalid_argument("tensor extent must be >= 1, got shape " +
                                  shape_to_string(shape));
    }
  }
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_to_string(a) + " vs " + shape_to_string(b));
}

bool wants_grad(const Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() >= big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

bool is_leading_batch(const Shape& small, const Shape& big) {
  if (small.size() != big.size() || small.size() < 2 || small[0] != 1) {
    return false;
  }
  return std::equal(small.begin() + 1, small.end(), big.begin() + 1);
}

// Output shape for an elementwise binary op, or throws.
Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (is_suffix(b, a) || is_leading_batch(b, a)) return a;
  if (is_suffix(a, b) || is_leading_batch(a, b)) return b;
  shape_error(op, a, b);
}

// Sums a gradient over broadcast positions into an operand's grad buffer.
void accumulate_broadcast(std::span<float> dst, std::span<const float> src,
                          float sign = 1.0f) {
  const std::size_t n = dst.size();
  if (n == src.size()) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += sign * src[i];
    return;
  }
  for (std::size_t i = 0; i < src.size(); ++i) dst[i % n] += sign * src[i];
}

std::size_t last_extent(const Tensor& t) { return t.shape().back(); }

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// ---------------------------------------------------------------- Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  validate_shape(shape);
  auto impl = std::make_shared<detail::TensorStorage>();
  impl->data.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data,
                         bool requires_grad) {
  validate_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("tensor data length " +
                                std::to_string(data.size()) +
                                " does not match shape " +
                                shape_to_string(shape));
  }
  auto impl = std::make_shared<detail::TensorStorage>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw std::out_of_range("tensor axis out of range");
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<const float> Tensor::data() const { return impl_->data; }

std::span<float> Tensor::mutable_data() { return impl_->data; }

float Tensor::item() const {
  if (numel() != 1) {
    throw std::logic_error("item() on non-scalar tensor of shape " +
                           shape_to_string(shape()));
  }
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) { impl_->requires_grad = value; }

std::span<const float> Tensor::grad() const {
  if (impl_->grad.size() != impl_->data.size()) {
    impl_->grad.assign(impl_->data.size(), 0.0f);
  }
  return impl_->grad;
}

std::span<float> Tensor::mutable_grad() const {
  if (impl_->grad.size() != impl_->data.size()) {
    impl_->grad.assign(impl_->data.size(), 0.0f);
  }
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0f); }

const std::string& Tensor::name() const { return impl_->name; }

void Tensor::set_name(std::string name) { impl_->name = std::move(name); }

Tensor Tensor::clone() const {
  auto impl = std::make_shared<detail::TensorStorage>(*impl_);
  impl->grad.clear();
  return Tensor(std::move(impl));
}

// ---------------------------------------------------------------- Tape

void Tape::record(std::string op, std::function<void()> backward) {
  entries_.push_back({std::move(op), std::move(backward)});
}

void backward(Tape& tape, const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument(
        "backward: loss must be a scalar tensor, got shape " +
        (loss.defined() ? shape_to_string(loss.shape()) : std::string("[]")));
  }
  if (tape.empty()) throw std::invalid_argument("backward: tape is empty");
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0f;
  const auto& entries = tape.entries();
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) it->backward();
}

// ---------------------------------------------------------------- ops

namespace ops {

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  Tensor out = Tensor::zeros({a.dim(0), b.dim(1)});
  MatrixMap(out.mutable_data().data(), m, n).noalias() =
      ConstMatrixMap(a.data().data(), m, k) *
      ConstMatrixMap(b.data().data(), k, n);
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record("matmul", [a, b, out, m, k, n]() mutable {
      ConstMatrixMap d_out(out.grad().data(), m, n);
      if (a.requires_grad()) {
        MatrixMap(a.mutable_grad().data(), m, k).noalias() +=
            d_out * ConstMatrixMap(b.data().data(), k, n).transpose();
      }
      if (b.requires_grad()) {
        MatrixMap(b.mutable_grad().data(), k, n).noalias() +=
            ConstMatrixMap(a.data().data(), m, k).transpose() * d_out;
      }
    });
  }
  return out;
}

namespace {

template <typename Forward>
Tensor elementwise(Tape* tape, const char* op, const Tensor& a,
                   const Tensor& b, Forward forward, float sign_a,
                   float sign_b, bool product) {
  Shape shape = broadcast_shape(op, a.shape(), b.shape());
  Tensor out = Tensor::zeros(shape);
  auto o = out.mutable_data();
  auto da = a.data();
  auto db = b.data();
  const std::size_t na = da.size();
  const std::size_t nb = db.size();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = forward(da[i % na], db[i % nb]);
  }
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(op, [a, b, out, sign_a, sign_b, product]() mutable {
      auto g = out.grad();
      if (!product) {
        if (a.requires_grad()) accumulate_broadcast(a.mutable_grad(), g, sign_a);
        if (b.requires_grad()) accumulate_broadcast(b.mutable_grad(), g, sign_b);
        return;
      }
      auto va = a.data();
      auto vb = b.data();
      const std::size_t na = va.size();
      const std::size_t nb = vb.size();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i % na] += g[i] * vb[i % nb];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % nb] += g[i] * va[i % na];
      }
    });
  }
  return out;
}

template <typename Fn, typename Deriv>
Tensor unary(Tape* tape, const char* op, const Tensor& x, Fn fn, Deriv deriv) {
  Tensor out = Tensor::zeros(x.shape());
  auto o = out.mutable_data();
  auto v = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(v[i]);
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(op, [x, out, deriv]() mutable {
      auto g = out.grad();
      auto v = x.data();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(v[i]);
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  return elementwise(tape, "add", a, b, [](float x, float y) { return x + y; },
                     1.0f, 1.0f, false);
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
  return elementwise(tape, "sub", a, b, [](float x, float y) { return x - y; },
                     1.0f, -1.0f, false);
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  return elementwise(tape, "mul", a, b, [](float x, float y) { return x * y; },
                     1.0f, 1.0f, true);
}

Tensor broadcast_rows(Tape* tape, const Tensor& row, std::size_t rows) {
  if (row.rank() != 1 || rows == 0) {
    shape_error("broadcast", row.shape(), Shape{rows, row.numel()});
  }
  const std::size_t n = row.numel();
  Tensor out = Tensor::zeros({rows, n});
  auto o = out.mutable_data();
  auto v = row.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(v.begin(), v.end(), o.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  if (wants_grad(tape, {&row})) {
    out.set_requires_grad(true);
    tape->record("broadcast", [row, out]() mutable {
      accumulate_broadcast(row.mutable_grad(), out.grad());
    });
  }
  return out;
}

Tensor scale(Tape* tape, const Tensor& a, float factor) {
  return unary(
      tape, "scale", a, [factor](float x) { return factor * x; },
      [factor](float) { return factor; });
}

Tensor relu(Tape* tape, const Tensor& x) {
  return unary(
      tape, "relu", x, [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float v) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor gelu(Tape* tape, const Tensor& x) {
  constexpr float kInvSqrt2 = static_cast<float>(1.0 / std::numbers::sqrt2);
  constexpr float kInvSqrt2Pi =
      static_cast<float>(1.0 / (std::numbers::sqrt2 * 1.7724538509055160273));
  return unary(
      tape, "gelu", x,
      [](float v) { return 0.5f * v * (1.0f + std::erf(v * kInvSqrt2)); },
      [](float v) {
        const float cdf = 0.5f * (1.0f + std::erf(v * kInvSqrt2));
        const float pdf = kInvSqrt2Pi * std::exp(-0.5f * v * v);
        return cdf + v * pdf;
      });
}

Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, float eps) {
  const std::size_t n = last_extent(x);
  if (gain.rank() != 1 || gain.numel() != n) shape_error("layer_norm", x.shape(), gain.shape());
  if (bias.rank() != 1 || bias.numel() != n) shape_error("layer_norm", x.shape(), bias.shape());
  const std::size_t rows = x.numel() / n;
  Tensor out = Tensor::zeros(x.shape());
  std::vector<float> normalized(x.numel());
  std::vector<float> inv_std(rows);
  auto v = x.data();
  auto o = out.mutable_data();
  auto g = gain.data();
  auto b = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = v.data() + r * n;
    float mu = 0.0f;
    for (std::size_t i = 0; i < n; ++i) mu += row[i];
    mu /= static_cast<float>(n);
    float var = 0.0f;
    for (std::size_t i = 0; i < n; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<float>(n);
    const float inv = 1.0f / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t i = 0; i < n; ++i) {
      const float xh = (row[i] - mu) * inv;
      normalized[r * n + i] = xh;
      o[r * n + i] = xh * g[i] + b[i];
    }
  }
  if (wants_grad(tape, {&x, &gain, &bias})) {
    out.set_requires_grad(true);
    tape->record("layer_norm", [x, gain, bias, out, n, rows,
                                normalized = std::move(normalized),
                                inv_std = std::move(inv_std)]() mutable {
      auto dy = out.grad();
      auto g = gain.data();
      if (gain.requires_grad() || bias.requires_grad()) {
        auto dg = gain.mutable_grad();
        auto db = bias.mutable_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t i = 0; i < n; ++i) {
            dg[i] += dy[r * n + i] * normalized[r * n + i];
            db[i] += dy[r * n + i];
          }
        }
      }
      if (!x.requires_grad()) return;
      auto dx = x.mutable_grad();
      const float inv_n = 1.0f / static_cast<float>(n);
      for (std::size_t r = 0; r < rows; ++r) {
        float sum_d = 0.0f;
        float sum_dx = 0.0f;
        for (std::size_t i = 0; i < n; ++i) {
          const float d = dy[r * n + i] * g[i];
          sum_d += d;
          sum_dx += d * normalized[r * n + i];
        }
        for (std::size_t i = 0; i < n; ++i) {
          const float d = dy[r * n + i] * g[i];
          dx[r * n + i] += inv_std[r] * inv_n *
                           (static_cast<float>(n) * d - sum_d -
                            normalized[r * n + i] * sum_dx);
        }
      }
    });
  }
  return out;
}

Tensor concat(Tape* tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts.front().shape();
  const std::size_t rows = parts.front().numel() / first.back();
  std::size_t width = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() ||
        !std::equal(s.begin(), s.end() - 1, first.begin())) {
      shape_error("concat", first, s);
    }
    width += s.back();
  }
  Shape shape = first;
  shape.back() = width;
  Tensor out = Tensor::zeros(shape);
  auto o = out.mutable_data();
  std::size_t offset = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    const std::size_t w = p.shape().back();
    auto v = p.data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                  o.begin() + static_cast<std::ptrdiff_t>(r * width + offset));
    }
    offset += w;
    any_grad = any_grad || p.requires_grad();
  }
  if (tape != nullptr && any_grad) {
    out.set_requires_grad(true);
    tape->record("concat", [parts, out, rows, width]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (auto& p : parts) {
        const std::size_t w = p.shape().back();
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < w; ++i) {
              gp[r * w + i] += g[r * width + offset + i];
            }
          }
        }
        offset += w;
      }
    });
  }
  return out;
}

Tensor slice(Tape* tape, const Tensor& x, std::size_t start,
             std::size_t length) {
  const std::size_t width = last_extent(x);
  if (length == 0 || start + length > width) {
    Shape requested = x.shape();
    requested.back() = start + length;
    shape_error("slice", x.shape(), requested);
  }
  const std::size_t rows = x.numel() / width;
  Shape shape = x.shape();
  shape.back() = length;
  Tensor out = Tensor::zeros(shape);
  auto o = out.mutable_data();
  auto v = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * width + start),
                length, o.begin() + static_cast<std::ptrdiff_t>(r * length));
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record("slice", [x, out, rows, width, start, length]() mutable {
      auto g = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < length; ++i) {
          gx[r * width + start + i] += g[r * length + i];
        }
      }
    });
  }
  return out;
}

Tensor mean(Tape* tape, const Tensor& x) {
  double total = 0.0;
  for (float v : x.data()) total += v;
  const float n = static_cast<float>(x.numel());
  Tensor out = Tensor::scalar(static_cast<float>(total / n));
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record("mean", [x, out, n]() mutable {
      const float g = out.grad()[0] / n;
      for (float& gx : x.mutable_grad()) gx += g;
    });
  }
  return out;
}

Tensor mse(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mse", a.shape(), b.shape());
  auto va = a.data();
  auto vb = b.data();
  double total = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = static_cast<double>(va[i]) - vb[i];
    total += d * d;
  }
  const float n = static_cast<float>(a.numel());
  Tensor out = Tensor::scalar(static_cast<float>(total / n));
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record("mse", [a, b, out, n]() mutable {
      const float g = 2.0f * out.grad()[0] / n;
      auto va = a.data();
      auto vb = b.data();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * (va[i] - vb[i]);
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g * (va[i] - vb[i]);
      }
    });
  }
  return out;
}

}  // namespace ops

}  // namespace posedp
