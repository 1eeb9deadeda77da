#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "auda/errors.hpp"

namespace auda {

enum class DType : uint8_t { f32 = 0, f64 = 1 };

inline size_t dtype_size(DType dt) { return dt == DType::f32 ? 4 : 8; }
const char* dtype_name(DType dt);

namespace detail {

struct TensorImpl {
  std::vector<int64_t> shape;
  int64_t numel = 0;
  DType dtype = DType::f32;
  bool requires_grad = false;
  std::vector<std::byte> data;
  std::vector<std::byte> grad;  // empty until first accumulation

  template <typename T>
  T* data_as() {
    return reinterpret_cast<T*>(data.data());
  }
  template <typename T>
  const T* data_as() const {
    return reinterpret_cast<const T*>(data.data());
  }
  template <typename T>
  T* grad_as() {
    return reinterpret_cast<T*>(grad.data());
  }
  void ensure_zero_grad() {
    if (grad.empty()) grad.assign(data.size(), std::byte{0});
  }
};

}  // namespace detail

// Dense row-major n-d array. Value-semantics handle: copies share storage
// (needed so the tape can address tensors by identity); use clone() for a
// deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape, DType dt,
                      bool requires_grad = false);
  static Tensor full(std::vector<int64_t> shape, double value, DType dt,
                     bool requires_grad = false);
  static Tensor scalar(double value, DType dt);
  template <typename T>
  static Tensor from_vector(std::vector<int64_t> shape,
                            const std::vector<T>& values,
                            bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int64_t>& shape() const { return impl_->shape; }
  int64_t dim(int i) const { return impl_->shape[size_t(i)]; }
  int ndim() const { return int(impl_->shape.size()); }
  int64_t numel() const { return impl_ ? impl_->numel : 0; }
  DType dtype() const { return impl_->dtype; }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  template <typename T>
  std::span<T> data() {
    check_type<T>();
    return {impl_->data_as<T>(), size_t(impl_->numel)};
  }
  template <typename T>
  std::span<const T> data() const {
    check_type<T>();
    return {impl_->data_as<T>(), size_t(impl_->numel)};
  }

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  void ensure_zero_grad() { impl_->ensure_zero_grad(); }
  void clear_grad() { impl_->grad.clear(); }
  template <typename T>
  std::span<T> grad() {
    check_type<T>();
    impl_->ensure_zero_grad();
    return {impl_->grad_as<T>(), size_t(impl_->numel)};
  }

  // Scalar fetch (numel must be 1), promoted to double.
  double item() const;
  // Element fetch by flat index, promoted to double.
  double flat(int64_t i) const;
  // Grad element by flat index (0 if grad absent).
  double grad_flat(int64_t i) const;
  void set_flat(int64_t i, double v);

  // Deep copy of data; grad not copied; requires_grad preserved.
  Tensor clone() const;
  // Deep copy with requires_grad = false.
  Tensor detached() const;
  // Same data reinterpreted under a new shape (shares storage).
  Tensor reshaped(std::vector<int64_t> new_shape) const;
  // Copy converted to the given dtype (requires_grad = false).
  Tensor to(DType dt) const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

  std::string shape_str() const;

 private:
  template <typename T>
  void check_type() const;
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;

  friend Tensor make_tensor(std::vector<int64_t>, DType, bool);
  friend Tensor make_view(const Tensor&, std::vector<int64_t>);
};

// Reverse-mode tape. Constructing one makes it the active tape for the
// current thread; ops whose inputs require grad record a backward rule.
// backward() may be called once; replays rules in reverse order.
class GradientTape {
 public:
  GradientTape();
  ~GradientTape();
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  void backward(const Tensor& loss);
  size_t num_ops() const { return ops_.size(); }

  static GradientTape* active();

  // internal: called by ops
  void record(std::function<void()> fn, const Tensor& output);

 private:
  struct Node {
    std::function<void()> backward;
    std::shared_ptr<detail::TensorImpl> output;
  };
  std::vector<Node> ops_;
  bool consumed_ = false;
};

// Suspends recording within a scope (diagnostics, inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
};

// ---- operations ---------------------------------------------------------

// input N x Cin x H x W, weight Cout x Cin x k x k (k odd), bias Cout.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

// nearest-neighbor 2x upsample, N x C x H x W -> N x C x 2H x 2W
Tensor upsample2x(const Tensor& input);

// softmax over the channel dim of an NCHW tensor, max-stabilized
Tensor channel_softmax(const Tensor& input);

// sum over the channel dim, NCHW -> N x 1 x H x W
Tensor channel_sum(const Tensor& input);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor scalar_add(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// log(max(x, eps)); eps > 0
Tensor log_clamped(const Tensor& a, double eps);
Tensor square(const Tensor& a);
// x^p for x >= 0 (callers keep the base nonnegative)
Tensor pow_scalar(const Tensor& a, double p);
Tensor abs_val(const Tensor& a);

// reductions to a {1} scalar tensor
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// 3x3 max pool, stride 1, pad 1 (spatial size preserved); gradient routes
// to the argmax, ties broken by first row-major window index
Tensor max_pool3x3(const Tensor& input);

// ---- template definitions ----------------------------------------------

template <typename T>
void Tensor::check_type() const {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  DType want = std::is_same_v<T, float> ? DType::f32 : DType::f64;
  if (impl_->dtype != want) {
    throw ShapeError(std::string("tensor dtype is ") + dtype_name(impl_->dtype) +
                     ", accessed as " + dtype_name(want));
  }
}

template <typename T>
Tensor Tensor::from_vector(std::vector<int64_t> shape,
                           const std::vector<T>& values, bool requires_grad) {
  Tensor t = zeros(std::move(shape),
                   std::is_same_v<T, float> ? DType::f32 : DType::f64,
                   requires_grad);
  if (int64_t(values.size()) != t.numel()) {
    throw ShapeError("from_vector: " + std::to_string(values.size()) +
                     " values for shape " + t.shape_str());
  }
  std::copy(values.begin(), values.end(), t.data<T>().begin());
  return t;
}

}  // namespace auda
