#include "auda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "auda/threading.hpp"

namespace auda {

#define AUDA_DISPATCH(dt, ...)                \
  do {                                        \
    if ((dt) == DType::f32) {                 \
      using scalar_t = float;                 \
      __VA_ARGS__                             \
    } else {                                  \
      using scalar_t = double;                \
      __VA_ARGS__                             \
    }                                         \
  } while (0)

const char* dtype_name(DType dt) { return dt == DType::f32 ? "f32" : "f64"; }

namespace {

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
  }
  if (a.dtype() != b.dtype()) {
    throw ShapeError(std::string(op) + ": dtype mismatch " +
                     dtype_name(a.dtype()) + " vs " + dtype_name(b.dtype()));
  }
}

void require_nchw(const Tensor& t, const char* op) {
  if (t.ndim() != 4) {
    throw ShapeError(std::string(op) + ": expected a 4-d NCHW tensor, got " +
                     t.shape_str());
  }
}

#ifndef NDEBUG
void debug_check_finite(const Tensor& t, const char* op) {
  AUDA_DISPATCH(t.dtype(), {
    for (scalar_t v : t.data<scalar_t>()) {
      if (!std::isfinite(double(v))) {
        throw std::runtime_error(std::string(op) +
                                 " produced a non-finite value");
      }
    }
  });
}
#define AUDA_CHECK_FINITE(t, op) debug_check_finite((t), (op))
#else
#define AUDA_CHECK_FINITE(t, op) ((void)0)
#endif

// elementwise helper: chunked when large, inline when small
template <typename F>
void pfor(int64_t n, F&& f) {
  if (n < 32768 || num_threads() == 1) {
    f(int64_t{0}, n);
    return;
  }
  parallel_for(n, f);
}

thread_local std::vector<GradientTape*> g_tape_stack;

}  // namespace

Tensor make_tensor(std::vector<int64_t> shape, DType dt, bool requires_grad) {
  auto impl = std::make_shared<detail::TensorImpl>();
  for (int64_t d : shape) {
    if (d <= 0) {
      throw ShapeError("tensor dimension must be positive, got " +
                       std::to_string(d));
    }
  }
  impl->numel = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->dtype = dt;
  impl->requires_grad = requires_grad;
  impl->data.assign(size_t(impl->numel) * dtype_size(dt), std::byte{0});
  return Tensor(std::move(impl));
}

Tensor make_view(const Tensor& t, std::vector<int64_t> new_shape) {
  auto impl = std::make_shared<detail::TensorImpl>(*t.impl());
  if (shape_numel(new_shape) != impl->numel) {
    throw ShapeError("reshape: element count mismatch");
  }
  impl->shape = std::move(new_shape);
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(std::vector<int64_t> shape, DType dt, bool requires_grad) {
  return make_tensor(std::move(shape), dt, requires_grad);
}

Tensor Tensor::full(std::vector<int64_t> shape, double value, DType dt,
                    bool requires_grad) {
  Tensor t = make_tensor(std::move(shape), dt, requires_grad);
  AUDA_DISPATCH(dt, {
    auto d = t.data<scalar_t>();
    std::fill(d.begin(), d.end(), scalar_t(value));
  });
  return t;
}

Tensor Tensor::scalar(double value, DType dt) {
  return full({1}, value, dt, false);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item(): tensor has " + std::to_string(numel()) +
                     " elements, expected 1");
  }
  return flat(0);
}

double Tensor::flat(int64_t i) const {
  return impl_->dtype == DType::f32 ? double(impl_->data_as<float>()[i])
                                    : impl_->data_as<double>()[i];
}

double Tensor::grad_flat(int64_t i) const {
  if (impl_->grad.empty()) return 0.0;
  return impl_->dtype == DType::f32 ? double(impl_->grad_as<float>()[i])
                                    : impl_->grad_as<double>()[i];
}

void Tensor::set_flat(int64_t i, double v) {
  if (impl_->dtype == DType::f32) {
    impl_->data_as<float>()[i] = float(v);
  } else {
    impl_->data_as<double>()[i] = v;
  }
}

Tensor Tensor::clone() const {
  Tensor t = make_tensor(impl_->shape, impl_->dtype, impl_->requires_grad);
  std::memcpy(t.impl_->data.data(), impl_->data.data(), impl_->data.size());
  return t;
}

Tensor Tensor::detached() const {
  Tensor t = clone();
  t.impl_->requires_grad = false;
  return t;
}

Tensor Tensor::reshaped(std::vector<int64_t> new_shape) const {
  if (impl_->requires_grad && GradientTape::active()) {
    throw ShapeError(
        "reshaped(): view of a grad-tracked tensor inside an active tape");
  }
  return make_view(*this, std::move(new_shape));
}

Tensor Tensor::to(DType dt) const {
  if (dt == impl_->dtype) return detached();
  Tensor t = make_tensor(impl_->shape, dt, false);
  for (int64_t i = 0; i < numel(); ++i) t.set_flat(i, flat(i));
  return t;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < impl_->shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(impl_->shape[i]);
  }
  return s + "]";
}

// ---- tape ----------------------------------------------------------------

GradientTape::GradientTape() { g_tape_stack.push_back(this); }

GradientTape::~GradientTape() {
  // pop this tape (it is the top unless guards were mismatched)
  for (size_t i = g_tape_stack.size(); i-- > 0;) {
    if (g_tape_stack[i] == this) {
      g_tape_stack.erase(g_tape_stack.begin() + long(i));
      break;
    }
  }
}

GradientTape* GradientTape::active() {
  return g_tape_stack.empty() ? nullptr : g_tape_stack.back();
}

void GradientTape::record(std::function<void()> fn, const Tensor& output) {
  ops_.push_back({std::move(fn), output.impl()});
}

void GradientTape::backward(const Tensor& loss) {
  if (consumed_) {
    throw ConfigError("backward() already called on this tape");
  }
  if (loss.numel() != 1) {
    throw ShapeError("backward() requires a scalar loss, got shape " +
                     loss.shape_str());
  }
  bool connected = false;
  for (size_t i = ops_.size(); i-- > 0;) {
    if (ops_[i].output == loss.impl()) {
      connected = true;
      break;
    }
  }
  if (!connected) {
    throw ConfigError("backward(): loss is not connected to this tape");
  }
  consumed_ = true;
  loss.impl()->ensure_zero_grad();
  if (loss.dtype() == DType::f32) {
    loss.impl()->grad_as<float>()[0] = 1.0f;
  } else {
    loss.impl()->grad_as<double>()[0] = 1.0;
  }
  for (size_t i = ops_.size(); i-- > 0;) {
    ops_[i].backward();
  }
}

NoGradGuard::NoGradGuard() { g_tape_stack.push_back(nullptr); }
NoGradGuard::~NoGradGuard() { g_tape_stack.pop_back(); }

// ---- op helpers ------------------------------------------------------------

namespace {

// Marks the output and registers the backward closure when recording is on.
template <typename Fn>
void record_op(Tensor& out, std::initializer_list<const Tensor*> inputs,
               Fn&& make_backward) {
  GradientTape* tape = GradientTape::active();
  if (!tape) return;
  bool any = false;
  for (const Tensor* t : inputs) any = any || t->requires_grad();
  if (!any) return;
  out.set_requires_grad(true);
  tape->record(make_backward(), out);
}

template <typename T>
std::span<const T> grad_of(const Tensor& t) {
  return {reinterpret_cast<const T*>(t.impl()->grad.data()),
          size_t(t.numel())};
}

}  // namespace

// ---- elementwise ops -------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = make_tensor(a.shape(), a.dtype(), false);
  AUDA_DISPATCH(a.dtype(), {
    auto pa = a.data<scalar_t>();
    auto pb = b.data<scalar_t>();
    auto po = out.data<scalar_t>();
    pfor(a.numel(), [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) po[i] = pa[i] + pb[i];
    });
  });
  record_op(out, {&a, &b}, [&] {
    return [a, b, out] {
      if (!out.has_grad()) return;
      AUDA_DISPATCH(a.dtype(), {
        auto go = grad_of<scalar_t>(out);
        if (a.requires_grad()) {
          a.impl()->ensure_zero_grad();
          scalar_t* s = a.impl()->grad_as<scalar_t>();
          for (int64_t i = 0; i < a.numel(); ++i) s[i] += go[i];
        }
        if (b.requires_grad()) {
          b.impl()->ensure_zero_grad();
          scalar_t* s = b.impl()->grad_as<scalar_t>();
          for (int64_t i = 0; i < b.numel(); ++i) s[i] += go[i];
        }
      });
    };
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = make_tensor(a.shape(), a.dtype(), false);
  AUDA_DISPATCH(a.dtype(), {
    auto pa = a.data<scalar_t>();
    auto pb = b.data<scalar_t>();
    auto po = out.data<scalar_t>();
    pfor(a.numel(), [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) po[i] = pa[i] - pb[i];
    });
  });
  record_op(out, {&a, &b}, [&] {
    return [a, b, out] {
      if (!out.has_grad()) return;
      AUDA_DISPATCH(a.dtype(), {
        auto go = grad_of<scalar_t>(out);
        if (a.requires_grad()) {
          a.impl()->ensure_zero_grad();
          auto s = a.impl()->grad_as<scalar_t>();
          for (int64_t i = 0; i < a.numel(); ++i) s[i] += go[i];
        }
        if (b.requires_grad()) {
          b.impl()->ensure_zero_grad();
          auto s = b.impl()->grad_as<scalar_t>();
          for (int64_t i = 0; i < b.numel(); ++i) s[i] -= go[i];
        }
      });
    };
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = make_tensor(a.shape(), a.dtype(), false);
  AUDA_DISPATCH(a.dtype(), {
    auto pa = a.data<scalar_t>();
    auto pb = b.data<scalar_t>();
    auto po = out.data<scalar_t>();
    pfor(a.numel(), [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) po[i] = pa[i] * pb[i];
    });
  });
  record_op(out, {&a, &b}, [&] {
    return [a, b, out] {
      if (!out.has_grad()) return;
      AUDA_DISPATCH(a.dtype(), {
        auto go = grad_of<scalar_t>(out);
        auto pa = a.data<scalar_t>();
        auto pb = b.data<scalar_t>();
        if (a.requires_grad()) {
          a.impl()->ensure_zero_grad();
          auto s = a.impl()->grad_as<scalar_t>();
          for (int64_t i = 0; i < a.numel(); ++i) s[i] += go[i] * pb[i];
        }
        if (b.requires_grad()) {
          b.impl()->ensure_zero_grad();
          auto s = b.impl()->grad_as<scalar_t>();
          for (int64_t i = 0; i < b.numel(); ++i) s[i] += go[i] * pa[i];
        }
      });
    };
  });
  return out;
}

namespace {

// shared scaffolding for unary elementwise ops
template <typename FwdFn, typename BwdFn>
Tensor unary_op(const Tensor& a, const char* name, FwdFn fwd, BwdFn bwd) {
  Tensor out = make_tensor(a.shape(), a.dtype(), false);
  AUDA_DISPATCH(a.dtype(), {
    auto pa = a.data<scalar_t>();
    auto po = out.data<scalar_t>();
    pfor(a.numel(), [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) po[i] = scalar_t(fwd(double(pa[i])));
    });
  });
  AUDA_CHECK_FINITE(out, name);
  record_op(out, {&a}, [&] {
    return [a, out, bwd] {
      if (!out.has_grad()) return;
      AUDA_DISPATCH(a.dtype(), {
        auto go = grad_of<scalar_t>(out);
        auto pa = a.data<scalar_t>();
        auto py = out.data<scalar_t>();
        a.impl()->ensure_zero_grad();
        auto s = a.impl()->grad_as<scalar_t>();
        for (int64_t i = 0; i < a.numel(); ++i) {
          s[i] += scalar_t(bwd(double(pa[i]), double(py[i])) * double(go[i]));
        }
      });
    };
  });
  return out;
}

}  // namespace

Tensor scalar_mul(const Tensor& a, double c) {
  return unary_op(
      a, "scalar_mul", [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

Tensor scalar_add(const Tensor& a, double c) {
  return unary_op(
      a, "scalar_add", [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, "relu", [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, "sigmoid",
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log_clamped(const Tensor& a, double eps) {
  if (!(eps > 0)) throw ConfigError("log_clamped: eps must be > 0");
  return unary_op(
      a, "log_clamped",
      [eps](double x) { return std::log(x > eps ? x : eps); },
      [eps](double x, double) { return x >= eps ? 1.0 / x : 0.0; });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, "square", [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor pow_scalar(const Tensor& a, double p) {
  return unary_op(
      a, "pow_scalar", [p](double x) { return std::pow(x, p); },
      [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Tensor abs_val(const Tensor& a) {
  return unary_op(
      a, "abs_val", [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

// ---- reductions ------------------------------------------------------------

namespace {

Tensor reduce_all(const Tensor& a, const char* name, double scale) {
  Tensor out = make_tensor({1}, a.dtype(), false);
  double acc = 0.0;  // f64 accumulation regardless of dtype, fixed order
  AUDA_DISPATCH(a.dtype(), {
    for (scalar_t v : a.data<scalar_t>()) acc += double(v);
  });
  out.set_flat(0, acc * scale);
  AUDA_CHECK_FINITE(out, name);
  record_op(out, {&a}, [&] {
    return [a, out, scale] {
      if (!out.has_grad()) return;
      double g = out.grad_flat(0) * scale;
      AUDA_DISPATCH(a.dtype(), {
        a.impl()->ensure_zero_grad();
        auto s = a.impl()->grad_as<scalar_t>();
        for (int64_t i = 0; i < a.numel(); ++i) s[i] += scalar_t(g);
      });
    };
  });
  return out;
}

}  // namespace

Tensor sum(const Tensor& a) { return reduce_all(a, "sum", 1.0); }

Tensor mean(const Tensor& a) {
  return reduce_all(a, "mean", 1.0 / double(a.numel()));
}

// ---- conv2d ----------------------------------------------------------------

namespace {

template <typename T>
void conv2d_fwd_kernel(const T* x, const T* w, const T* b, T* y, int64_t N,
                       int64_t Cin, int64_t H, int64_t W, int64_t Cout,
                       int64_t K, int64_t stride, int64_t pad, int64_t Ho,
                       int64_t Wo) {
  parallel_for(N * Cout, [&](int64_t t0, int64_t t1) {
    for (int64_t t = t0; t < t1; ++t) {
      const int64_t n = t / Cout, co = t % Cout;
      T* yp = y + (n * Cout + co) * Ho * Wo;
      const T bias = b[co];
      for (int64_t i = 0; i < Ho * Wo; ++i) yp[i] = bias;
      for (int64_t ci = 0; ci < Cin; ++ci) {
        const T* xp = x + (n * Cin + ci) * H * W;
        const T* wp = w + (co * Cin + ci) * K * K;
        for (int64_t ky = 0; ky < K; ++ky) {
          for (int64_t kx = 0; kx < K; ++kx) {
            const T wv = wp[ky * K + kx];
            // valid output x range for this kx
            int64_t ox_lo = 0;
            while (ox_lo < Wo && ox_lo * stride + kx - pad < 0) ++ox_lo;
            int64_t ox_hi = Wo;  // exclusive
            while (ox_hi > ox_lo && (ox_hi - 1) * stride + kx - pad >= W)
              --ox_hi;
            for (int64_t oy = 0; oy < Ho; ++oy) {
              const int64_t iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= H) continue;
              T* yrow = yp + oy * Wo;
              const T* xrow = xp + iy * W + (kx - pad);
              if (stride == 1) {
                for (int64_t ox = ox_lo; ox < ox_hi; ++ox)
                  yrow[ox] += wv * xrow[ox];
              } else {
                for (int64_t ox = ox_lo; ox < ox_hi; ++ox)
                  yrow[ox] += wv * xrow[ox * stride];
              }
            }
          }
        }
      }
    }
  });
}

template <typename T>
void conv2d_bwd_input_kernel(const T* w, const T* gy, T* gx, int64_t N,
                             int64_t Cin, int64_t H, int64_t W, int64_t Cout,
                             int64_t K, int64_t stride, int64_t pad, int64_t Ho,
                             int64_t Wo) {
  parallel_for(N * Cin, [&](int64_t t0, int64_t t1) {
    for (int64_t t = t0; t < t1; ++t) {
      const int64_t n = t / Cin, ci = t % Cin;
      T* gxp = gx + (n * Cin + ci) * H * W;
      for (int64_t co = 0; co < Cout; ++co) {
        const T* gyp = gy + (n * Cout + co) * Ho * Wo;
        const T* wp = w + (co * Cin + ci) * K * K;
        for (int64_t ky = 0; ky < K; ++ky) {
          for (int64_t kx = 0; kx < K; ++kx) {
            const T wv = wp[ky * K + kx];
            if (wv == T(0)) continue;
            int64_t ox_lo = 0;
            while (ox_lo < Wo && ox_lo * stride + kx - pad < 0) ++ox_lo;
            int64_t ox_hi = Wo;
            while (ox_hi > ox_lo && (ox_hi - 1) * stride + kx - pad >= W)
              --ox_hi;
            for (int64_t oy = 0; oy < Ho; ++oy) {
              const int64_t iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= H) continue;
              const T* gyrow = gyp + oy * Wo;
              T* gxrow = gxp + iy * W + (kx - pad);
              if (stride == 1) {
                for (int64_t ox = ox_lo; ox < ox_hi; ++ox)
                  gxrow[ox] += wv * gyrow[ox];
              } else {
                for (int64_t ox = ox_lo; ox < ox_hi; ++ox)
                  gxrow[ox * stride] += wv * gyrow[ox];
              }
            }
          }
        }
      }
    }
  });
}

template <typename T>
void conv2d_bwd_weight_kernel(const T* x, const T* gy, T* gw, int64_t N,
                              int64_t Cin, int64_t H, int64_t W, int64_t Cout,
                              int64_t K, int64_t stride, int64_t pad,
                              int64_t Ho, int64_t Wo) {
  // parallel over (co, ci): each task owns a KxK slice of gw; batch loop is
  // innermost-fixed so accumulation order never depends on thread count
  parallel_for(Cout * Cin, [&](int64_t t0, int64_t t1) {
    for (int64_t t = t0; t < t1; ++t) {
      const int64_t co = t / Cin, ci = t % Cin;
      T* gwp = gw + (co * Cin + ci) * K * K;
      for (int64_t ky = 0; ky < K; ++ky) {
        for (int64_t kx = 0; kx < K; ++kx) {
          double acc = 0.0;
          for (int64_t n = 0; n < N; ++n) {
            const T* xp = x + (n * Cin + ci) * H * W;
            const T* gyp = gy + (n * Cout + co) * Ho * Wo;
            int64_t ox_lo = 0;
            while (ox_lo < Wo && ox_lo * stride + kx - pad < 0) ++ox_lo;
            int64_t ox_hi = Wo;
            while (ox_hi > ox_lo && (ox_hi - 1) * stride + kx - pad >= W)
              --ox_hi;
            for (int64_t oy = 0; oy < Ho; ++oy) {
              const int64_t iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= H) continue;
              const T* gyrow = gyp + oy * Wo;
              const T* xrow = xp + iy * W + (kx - pad);
              T rowacc = T(0);
              if (stride == 1) {
                for (int64_t ox = ox_lo; ox < ox_hi; ++ox)
                  rowacc += gyrow[ox] * xrow[ox];
              } else {
                for (int64_t ox = ox_lo; ox < ox_hi; ++ox)
                  rowacc += gyrow[ox] * xrow[ox * stride];
              }
              acc += double(rowacc);
            }
          }
          gwp[ky * K + kx] += T(acc);
        }
      }
    }
  });
}

template <typename T>
void conv2d_bwd_bias_kernel(const T* gy, T* gb, int64_t N, int64_t Cout,
                            int64_t Ho, int64_t Wo) {
  for (int64_t co = 0; co < Cout; ++co) {
    double acc = 0.0;
    for (int64_t n = 0; n < N; ++n) {
      const T* gyp = gy + (n * Cout + co) * Ho * Wo;
      for (int64_t i = 0; i < Ho * Wo; ++i) acc += double(gyp[i]);
    }
    gb[co] += T(acc);
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
  require_nchw(input, "conv2d input");
  if (weight.ndim() != 4) {
    throw ShapeError("conv2d: weight must be 4-d OIKK, got " +
                     weight.shape_str());
  }
  if (bias.ndim() != 1) {
    throw ShapeError("conv2d: bias must be 1-d, got " + bias.shape_str());
  }
  const int64_t N = input.dim(0), Cin = input.dim(1), H = input.dim(2),
                W = input.dim(3);
  const int64_t Cout = weight.dim(0), K = weight.dim(2);
  if (weight.dim(1) != Cin) {
    throw ShapeError("conv2d: weight input-channel dim is " +
                     std::to_string(weight.dim(1)) + " but input has " +
                     std::to_string(Cin) + " channels");
  }
  if (weight.dim(3) != K) {
    throw ShapeError("conv2d: kernel must be square, got " +
                     weight.shape_str());
  }
  if (K % 2 == 0 || K < 1) {
    throw ShapeError("conv2d: kernel size must be odd, got " +
                     std::to_string(K));
  }
  if (bias.dim(0) != Cout) {
    throw ShapeError("conv2d: bias dim is " + std::to_string(bias.dim(0)) +
                     " but weight has " + std::to_string(Cout) +
                     " output channels");
  }
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (padding < 0) throw ConfigError("conv2d: padding must be >= 0");
  if (input.dtype() != weight.dtype() || input.dtype() != bias.dtype()) {
    throw ShapeError("conv2d: mixed dtypes");
  }
  const int64_t Ho = (H + 2 * padding - K) / stride + 1;
  const int64_t Wo = (W + 2 * padding - K) / stride + 1;
  if (Ho < 1 || Wo < 1) {
    throw ShapeError("conv2d: kernel " + std::to_string(K) +
                     " does not fit input " + input.shape_str() +
                     " with padding " + std::to_string(padding));
  }

  Tensor out = make_tensor({N, Cout, Ho, Wo}, input.dtype(), false);
  AUDA_DISPATCH(input.dtype(), {
    conv2d_fwd_kernel<scalar_t>(input.data<scalar_t>().data(),
                                weight.data<scalar_t>().data(),
                                bias.data<scalar_t>().data(),
                                out.data<scalar_t>().data(), N, Cin, H, W, Cout,
                                K, stride, padding, Ho, Wo);
  });
  AUDA_CHECK_FINITE(out, "conv2d");

  record_op(out, {&input, &weight, &bias}, [&] {
    int64_t s = stride, p = padding;
    return [input, weight, bias, out, N, Cin, H, W, Cout, K, s, p, Ho, Wo] {
      if (!out.has_grad()) return;
      AUDA_DISPATCH(input.dtype(), {
        const scalar_t* gy =
            reinterpret_cast<const scalar_t*>(out.impl()->grad.data());
        if (input.requires_grad()) {
          input.impl()->ensure_zero_grad();
          conv2d_bwd_input_kernel<scalar_t>(
              weight.data<scalar_t>().data(), gy,
              input.impl()->grad_as<scalar_t>(), N, Cin, H, W, Cout, K, s, p,
              Ho, Wo);
        }
        if (weight.requires_grad()) {
          weight.impl()->ensure_zero_grad();
          conv2d_bwd_weight_kernel<scalar_t>(
              input.data<scalar_t>().data(), gy,
              weight.impl()->grad_as<scalar_t>(), N, Cin, H, W, Cout, K, s, p,
              Ho, Wo);
        }
        if (bias.requires_grad()) {
          bias.impl()->ensure_zero_grad();
          conv2d_bwd_bias_kernel<scalar_t>(
              gy, bias.impl()->grad_as<scalar_t>(), N, Cout, Ho, Wo);
        }
      });
    };
  });
  return out;
}

// ---- upsample2x ------------------------------------------------------------

Tensor upsample2x(const Tensor& input) {
  require_nchw(input, "upsample2x");
  const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                W = input.dim(3);
  Tensor out = make_tensor({N, C, 2 * H, 2 * W}, input.dtype(), false);
  AUDA_DISPATCH(input.dtype(), {
    auto x = input.data<scalar_t>();
    auto y = out.data<scalar_t>();
    pfor(N * C, [&](int64_t p0, int64_t p1) {
      for (int64_t pc = p0; pc < p1; ++pc) {
        const scalar_t* xp = x.data() + pc * H * W;
        scalar_t* yp = y.data() + pc * 4 * H * W;
        for (int64_t r = 0; r < H; ++r) {
          for (int64_t c = 0; c < W; ++c) {
            const scalar_t v = xp[r * W + c];
            scalar_t* o = yp + (2 * r) * (2 * W) + 2 * c;
            o[0] = v;
            o[1] = v;
            o[2 * W] = v;
            o[2 * W + 1] = v;
          }
        }
      }
    });
  });
  record_op(out, {&input}, [&] {
    return [input, out, N, C, H, W] {
      if (!out.has_grad()) return;
      AUDA_DISPATCH(input.dtype(), {
        auto gy = grad_of<scalar_t>(out);
        input.impl()->ensure_zero_grad();
        scalar_t* gx = input.impl()->grad_as<scalar_t>();
        for (int64_t pc = 0; pc < N * C; ++pc) {
          const scalar_t* gyp = gy.data() + pc * 4 * H * W;
          scalar_t* gxp = gx + pc * H * W;
          for (int64_t r = 0; r < H; ++r) {
            for (int64_t c = 0; c < W; ++c) {
              const scalar_t* o = gyp + (2 * r) * (2 * W) + 2 * c;
              gxp[r * W + c] += o[0] + o[1] + o[2 * W] + o[2 * W + 1];
            }
          }
        }
      });
    };
  });
  return out;
}

// ---- channel softmax / channel sum ------------------------------------------

Tensor channel_softmax(const Tensor& input) {
  require_nchw(input, "channel_softmax");
  const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                W = input.dim(3);
  if (C < 1) throw ShapeError("channel_softmax: C must be >= 1");
  const int64_t HW = H * W;
  Tensor out = make_tensor(input.shape(), input.dtype(), false);
  AUDA_DISPATCH(input.dtype(), {
    auto x = input.data<scalar_t>();
    auto y = out.data<scalar_t>();
    pfor(N * HW, [&](int64_t p0, int64_t p1) {
      for (int64_t p = p0; p < p1; ++p) {
        const int64_t n = p / HW, px = p % HW;
        const scalar_t* xp = x.data() + n * C * HW + px;
        scalar_t* yp = y.data() + n * C * HW + px;
        double mx = double(xp[0]);
        for (int64_t c = 1; c < C; ++c) mx = std::max(mx, double(xp[c * HW]));
        double z = 0.0;
        for (int64_t c = 0; c < C; ++c) {
          double e = std::exp(double(xp[c * HW]) - mx);
          yp[c * HW] = scalar_t(e);
          z += e;
        }
        const double inv = 1.0 / z;
        for (int64_t c = 0; c < C; ++c)
          yp[c * HW] = scalar_t(double(yp[c * HW]) * inv);
      }
    });
  });
  AUDA_CHECK_FINITE(out, "channel_softmax");
  record_op(out, {&input}, [&] {
    return [input, out, N, C, HW] {
      if (!out.has_grad()) return;
      AUDA_DISPATCH(input.dtype(), {
        auto gy = grad_of<scalar_t>(out);
        auto y = out.data<scalar_t>();
        input.impl()->ensure_zero_grad();
        scalar_t* gx = input.impl()->grad_as<scalar_t>();
        for (int64_t p = 0; p < N * HW; ++p) {
          const int64_t n = p / HW, px = p % HW;
          const int64_t base = n * C * HW + px;
          double dot = 0.0;
          for (int64_t c = 0; c < C; ++c)
            dot += double(gy[base + c * HW]) * double(y[base + c * HW]);
          for (int64_t c = 0; c < C; ++c) {
            const double yv = double(y[base + c * HW]);
            gx[base + c * HW] +=
                scalar_t(yv * (double(gy[base + c * HW]) - dot));
          }
        }
      });
    };
  });
  return out;
}

Tensor channel_sum(const Tensor& input) {
  require_nchw(input, "channel_sum");
  const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                W = input.dim(3);
  const int64_t HW = H * W;
  Tensor out = make_tensor({N, 1, H, W}, input.dtype(), false);
  AUDA_DISPATCH(input.dtype(), {
    auto x = input.data<scalar_t>();
    auto y = out.data<scalar_t>();
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t px = 0; px < HW; ++px) {
        double acc = 0.0;
        for (int64_t c = 0; c < C; ++c) acc += double(x[n * C * HW + c * HW + px]);
        y[n * HW + px] = scalar_t(acc);
      }
    }
  });
  record_op(out, {&input}, [&] {
    return [input, out, N, C, HW] {
      if (!out.has_grad()) return;
      AUDA_DISPATCH(input.dtype(), {
        auto gy = grad_of<scalar_t>(out);
        input.impl()->ensure_zero_grad();
        scalar_t* gx = input.impl()->grad_as<scalar_t>();
        for (int64_t n = 0; n < N; ++n) {
          for (int64_t c = 0; c < C; ++c) {
            for (int64_t px = 0; px < HW; ++px) {
              gx[n * C * HW + c * HW + px] += gy[n * HW + px];
            }
          }
        }
      });
    };
  });
  return out;
}

// ---- max pool ----------------------------------------------------------------

Tensor max_pool3x3(const Tensor& input) {
  require_nchw(input, "max_pool3x3");
  const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                W = input.dim(3);
  Tensor out = make_tensor(input.shape(), input.dtype(), false);
  auto argmax = std::make_shared<std::vector<int64_t>>(size_t(input.numel()));
  AUDA_DISPATCH(input.dtype(), {
    auto x = input.data<scalar_t>();
    auto y = out.data<scalar_t>();
    int64_t* am = argmax->data();
    pfor(N * C, [&](int64_t p0, int64_t p1) {
      for (int64_t pc = p0; pc < p1; ++pc) {
        const scalar_t* xp = x.data() + pc * H * W;
        scalar_t* yp = y.data() + pc * H * W;
        int64_t* amp = am + pc * H * W;
        for (int64_t r = 0; r < H; ++r) {
          for (int64_t c = 0; c < W; ++c) {
            scalar_t best{};
            int64_t best_idx = -1;
            for (int64_t dr = -1; dr <= 1; ++dr) {
              const int64_t rr = r + dr;
              if (rr < 0 || rr >= H) continue;
              for (int64_t dc = -1; dc <= 1; ++dc) {
                const int64_t cc = c + dc;
                if (cc < 0 || cc >= W) continue;
                const scalar_t v = xp[rr * W + cc];
                if (best_idx < 0 || v > best) {  // first index wins ties
                  best = v;
                  best_idx = rr * W + cc;
                }
              }
            }
            yp[r * W + c] = best;
            amp[r * W + c] = pc * H * W + best_idx;
          }
        }
      }
    });
  });
  record_op(out, {&input}, [&] {
    return [input, out, argmax] {
      if (!out.has_grad()) return;
      AUDA_DISPATCH(input.dtype(), {
        auto gy = grad_of<scalar_t>(out);
        input.impl()->ensure_zero_grad();
        scalar_t* gx = input.impl()->grad_as<scalar_t>();
        const int64_t* am = argmax->data();
        for (int64_t i = 0; i < out.numel(); ++i) gx[am[i]] += gy[i];
      });
    };
  });
  return out;
}

}  // namespace auda
