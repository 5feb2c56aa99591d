#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace posedp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct TensorStorage;
}

/// Dense row-major float32 tensor with shared storage.
///
/// Copies of a Tensor alias the same buffer; use clone() for a deep copy.
/// Values produced by the primitives below are never mutated afterwards,
/// only parameters are updated in place by the optimizer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<float> data,
                          bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const float> data() const;
  std::span<float> mutable_data();
  float item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  /// Gradient buffer; all zeros when nothing has been accumulated.
  std::span<const float> grad() const;
  // Writable through const handles; the buffer belongs to the shared storage.
  std::span<float> mutable_grad() const;
  void zero_grad();

  const std::string& name() const;
  void set_name(std::string name);

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorStorage> impl)
      : impl_(std::move(impl)) {}

  std::shared_ptr<detail::TensorStorage> impl_;
};

/// Ordered record of differentiable operations.
///
/// Entries are appended in forward order, so every entry's inputs were
/// produced before it. backward() replays them in exact reverse order.
class Tape {
 public:
  struct Entry {
    std::string op;
    std::function<void()> backward;
  };

  void record(std::string op, std::function<void()> backward);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

/// Back-propagates from a scalar loss through every entry on the tape.
/// Gradients accumulate additively into each tensor's grad buffer.
void backward(Tape& tape, const Tensor& loss);

// Differentiable primitives. A nullptr tape disables recording.
//
// Elementwise ops accept identical shapes, or a lower-rank operand whose
// shape equals the trailing dims of the other (bias-style broadcast), or a
// leading-batch operand [1, ...] against [B, ...].
namespace ops {

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor broadcast_rows(Tape* tape, const Tensor& row, std::size_t rows);
Tensor scale(Tape* tape, const Tensor& a, float factor);
Tensor relu(Tape* tape, const Tensor& x);
Tensor gelu(Tape* tape, const Tensor& x);
Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, float eps = 1e-5f);
Tensor concat(Tape* tape, const std::vector<Tensor>& parts);
Tensor slice(Tape* tape, const Tensor& x, std::size_t start,
             std::size_t length);
Tensor mean(Tape* tape, const Tensor& x);
Tensor mse(Tape* tape, const Tensor& a, const Tensor& b);

}  // namespace ops

}  // namespace posedp
