#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "acnet/tensor.hpp"

namespace acnet {

enum class PadType { kZero, kReflect };

namespace detail {

inline int div_floor(int a, int b) {
  int q = a / b;
  int r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

inline int div_ceil(int a, int b) { return -div_floor(-a, b); }

template <typename T>
void check_rank(const Tensor<T>& x, int rank, const char* op, const char* arg) {
  if (x.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": " + arg + " has shape " +
                                shape_str(x.shape()) + ", expected rank " +
                                std::to_string(rank));
  }
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Elementwise unary op. deriv(x_i, y_i) -> dy_i/dx_i.
template <typename T, typename F, typename D>
Tensor<T> map_unary(const Tensor<T>& x, F fwd, D deriv) {
  auto xn = x.node();
  Tensor<T> out = Tensor<T>::make_result(
      x.shape(), {xn}, [xn, deriv](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        const size_t n = self.data.size();
        for (size_t i = 0; i < n; ++i) {
          xn->grad[i] += self.grad[i] * deriv(xn->data[i], self.data[i]);
        }
      });
  const auto& xv = x.values();
  auto& y = out.values();
  for (size_t i = 0; i < y.size(); ++i) y[i] = fwd(xv[i]);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::map_unary(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.2)) {
  return detail::map_unary(
      x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? slope : T(0)); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return detail::map_unary(
      x, [](T v) { return std::tanh(v); },
      [](T, T y) { return T(1) - y * y; });
}

template <typename T>
T sigmoid_scalar(T v) {
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::map_unary(
      x, [](T v) { return sigmoid_scalar(v); },
      [](T, T y) { return y * (T(1) - y); });
}

// log(1 + e^x), evaluated without overflow.
template <typename T>
T softplus_scalar(T v) {
  return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v)));
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return detail::map_unary(
      x, [](T v) { return softplus_scalar(v); },
      [](T v, T) { return sigmoid_scalar(v); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return detail::map_unary(
      x, [](T v) { return std::exp(v); },
      [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return detail::map_unary(
      x, [](T v) { return std::log(v); },
      [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return detail::map_unary(
      x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return detail::map_unary(
      x, [](T v) { return -v; },
      [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T a) {
  return detail::map_unary(
      x, [a](T v) { return a * v; },
      [a](T, T) { return a; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T a) {
  return detail::map_unary(
      x, [a](T v) { return v + a; },
      [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  auto an = a.node();
  auto bn = b.node();
  Tensor<T> out = Tensor<T>::make_result(
      a.shape(), {an, bn}, [an, bn](TensorNode<T>& self) {
        for (auto& pn : {an, bn}) {
          if (!pn->needs_grad) continue;
          pn->ensure_grad();
          for (size_t i = 0; i < self.data.size(); ++i) pn->grad[i] += self.grad[i];
        }
      });
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& y = out.values();
  for (size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  auto an = a.node();
  auto bn = b.node();
  Tensor<T> out = Tensor<T>::make_result(
      a.shape(), {an, bn}, [an, bn](TensorNode<T>& self) {
        if (an->needs_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < self.data.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->needs_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < self.data.size(); ++i) bn->grad[i] -= self.grad[i];
        }
      });
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& y = out.values();
  for (size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  auto an = a.node();
  auto bn = b.node();
  Tensor<T> out = Tensor<T>::make_result(
      a.shape(), {an, bn}, [an, bn](TensorNode<T>& self) {
        if (an->needs_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < self.data.size(); ++i)
            an->grad[i] += self.grad[i] * bn->data[i];
        }
        if (bn->needs_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < self.data.size(); ++i)
            bn->grad[i] += self.grad[i] * an->data[i];
        }
      });
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& y = out.values();
  for (size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  auto xn = x.node();
  Tensor<T> out = Tensor<T>::make_result(
      {1}, {xn}, [xn](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        const T g = self.grad[0];
        for (auto& v : xn->grad) v += g;
      });
  T acc = T(0);
  for (T v : x.values()) acc += v;
  out.values()[0] = acc;
  return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  auto xn = x.node();
  const T inv_n = T(1) / static_cast<T>(x.numel());
  Tensor<T> out = Tensor<T>::make_result(
      {1}, {xn}, [xn, inv_n](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        const T g = self.grad[0] * inv_n;
        for (auto& v : xn->grad) v += g;
      });
  T acc = T(0);
  for (T v : x.values()) acc += v;
  out.values()[0] = acc * inv_n;
  return out;
}

template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x) {
  detail::check_rank(x, 2, "sum_rows", "input");
  const int rows = x.dim(0), cols = x.dim(1);
  auto xn = x.node();
  Tensor<T> out = Tensor<T>::make_result(
      {rows}, {xn}, [xn, rows, cols](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          const T g = self.grad[r];
          T* gr = xn->grad.data() + static_cast<size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) gr[c] += g;
        }
      });
  const T* xd = x.values().data();
  T* od = out.values().data();
  for (int r = 0; r < rows; ++r) {
    T acc = T(0);
    const T* xr = xd + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += xr[c];
    od[r] = acc;
  }
  return out;
}

// Per-row log(sum(exp(.))), max-shifted.
template <typename T>
Tensor<T> logsumexp_rows(const Tensor<T>& x) {
  detail::check_rank(x, 2, "logsumexp_rows", "input");
  const int rows = x.dim(0), cols = x.dim(1);
  auto xn = x.node();
  Tensor<T> out = Tensor<T>::make_result(
      {rows}, {xn}, [xn, rows, cols](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          const T g = self.grad[r];
          const T y = self.data[r];
          const T* xr = xn->data.data() + static_cast<size_t>(r) * cols;
          T* gr = xn->grad.data() + static_cast<size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) gr[c] += g * std::exp(xr[c] - y);
        }
      });
  const T* xd = x.values().data();
  T* od = out.values().data();
  for (int r = 0; r < rows; ++r) {
    const T* xr = xd + static_cast<size_t>(r) * cols;
    T m = xr[0];
    for (int c = 1; c < cols; ++c) m = std::max(m, xr[c]);
    T acc = T(0);
    for (int c = 0; c < cols; ++c) acc += std::exp(xr[c] - m);
    od[r] = m + std::log(acc);
  }
  return out;
}

// out[t] = x[rows[t], cols[t]]
template <typename T>
Tensor<T> gather2d(const Tensor<T>& x, std::vector<int> rows, std::vector<int> cols) {
  detail::check_rank(x, 2, "gather2d", "input");
  if (rows.size() != cols.size()) {
    throw std::invalid_argument("gather2d: row/col index lists differ in length");
  }
  const int R = x.dim(0), C = x.dim(1);
  for (size_t t = 0; t < rows.size(); ++t) {
    if (rows[t] < 0 || rows[t] >= R || cols[t] < 0 || cols[t] >= C) {
      throw std::out_of_range("gather2d: index (" + std::to_string(rows[t]) + ", " +
                              std::to_string(cols[t]) + ") outside " +
                              shape_str(x.shape()));
    }
  }
  auto xn = x.node();
  const int n = static_cast<int>(rows.size());
  Tensor<T> out = Tensor<T>::make_result(
      {n}, {xn}, [xn, rows, cols, C](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        for (size_t t = 0; t < rows.size(); ++t) {
          xn->grad[static_cast<size_t>(rows[t]) * C + cols[t]] += self.grad[t];
        }
      });
  const T* xd = x.values().data();
  T* od = out.values().data();
  for (int t = 0; t < n; ++t) od[t] = xd[static_cast<size_t>(rows[t]) * C + cols[t]];
  return out;
}

template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_rank(a, 2, "concat_rows", "first input");
  detail::check_rank(b, 2, "concat_rows", "second input");
  if (a.dim(1) != b.dim(1)) {
    throw std::invalid_argument("concat_rows: column counts differ, " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int ra = a.dim(0), rb = b.dim(0), cols = a.dim(1);
  auto an = a.node();
  auto bn = b.node();
  Tensor<T> out = Tensor<T>::make_result(
      {ra + rb, cols}, {an, bn}, [an, bn, ra, cols](TensorNode<T>& self) {
        const size_t na = an->data.size();
        if (an->needs_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < na; ++i) an->grad[i] += self.grad[i];
        }
        if (bn->needs_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < bn->data.size(); ++i) bn->grad[i] += self.grad[na + i];
        }
      });
  auto& y = out.values();
  std::copy(a.values().begin(), a.values().end(), y.begin());
  std::copy(b.values().begin(), b.values().end(), y.begin() + a.values().size());
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

// a [m, k] times b^T where b is [n, k]; result [m, n].
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_rank(a, 2, "matmul_nt", "left input");
  detail::check_rank(b, 2, "matmul_nt", "right input");
  if (a.dim(1) != b.dim(1)) {
    throw std::invalid_argument("matmul_nt: inner dimensions differ, " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int m = a.dim(0), n = b.dim(0), k = a.dim(1);
  auto an = a.node();
  auto bn = b.node();
  Tensor<T> out = Tensor<T>::make_result(
      {m, n}, {an, bn}, [an, bn, m, n, k](TensorNode<T>& self) {
        if (an->needs_grad) {
          an->ensure_grad();
          for (int i = 0; i < m; ++i) {
            T* da = an->grad.data() + static_cast<size_t>(i) * k;
            const T* gr = self.grad.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
              const T g = gr[j];
              const T* br = bn->data.data() + static_cast<size_t>(j) * k;
              for (int t = 0; t < k; ++t) da[t] += g * br[t];
            }
          }
        }
        if (bn->needs_grad) {
          bn->ensure_grad();
          for (int j = 0; j < n; ++j) {
            T* db = bn->grad.data() + static_cast<size_t>(j) * k;
            for (int i = 0; i < m; ++i) {
              const T g = self.grad[static_cast<size_t>(i) * n + j];
              const T* ar = an->data.data() + static_cast<size_t>(i) * k;
              for (int t = 0; t < k; ++t) db[t] += g * ar[t];
            }
          }
        }
      });
  const T* ad = a.values().data();
  const T* bd = b.values().data();
  T* od = out.values().data();
  for (int i = 0; i < m; ++i) {
    const T* ar = ad + static_cast<size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const T* br = bd + static_cast<size_t>(j) * k;
      T acc = T(0);
      for (int t = 0; t < k; ++t) acc += ar[t] * br[t];
      od[static_cast<size_t>(i) * n + j] = acc;
    }
  }
  return out;
}

// x [batch, in] -> [batch, out] with weight [out, in] and bias [out].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  detail::check_rank(x, 2, "linear", "input");
  detail::check_rank(weight, 2, "linear", "weight");
  detail::check_rank(bias, 1, "linear", "bias");
  if (x.dim(1) != weight.dim(1)) {
    throw std::invalid_argument("linear: input features " + std::to_string(x.dim(1)) +
                                " do not match weight columns " +
                                std::to_string(weight.dim(1)));
  }
  if (bias.dim(0) != weight.dim(0)) {
    throw std::invalid_argument("linear: bias length " + std::to_string(bias.dim(0)) +
                                " does not match weight rows " +
                                std::to_string(weight.dim(0)));
  }
  const int batch = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  auto xn = x.node();
  auto wn = weight.node();
  auto bn = bias.node();
  Tensor<T> out = Tensor<T>::make_result(
      {batch, out_dim}, {xn, wn, bn},
      [xn, wn, bn, batch, in, out_dim](TensorNode<T>& self) {
        if (xn->needs_grad) {
          xn->ensure_grad();
          for (int i = 0; i < batch; ++i) {
            T* dx = xn->grad.data() + static_cast<size_t>(i) * in;
            const T* gr = self.grad.data() + static_cast<size_t>(i) * out_dim;
            for (int o = 0; o < out_dim; ++o) {
              const T g = gr[o];
              const T* wr = wn->data.data() + static_cast<size_t>(o) * in;
              for (int t = 0; t < in; ++t) dx[t] += g * wr[t];
            }
          }
        }
        if (wn->needs_grad) {
          wn->ensure_grad();
          for (int o = 0; o < out_dim; ++o) {
            T* dw = wn->grad.data() + static_cast<size_t>(o) * in;
            for (int i = 0; i < batch; ++i) {
              const T g = self.grad[static_cast<size_t>(i) * out_dim + o];
              const T* xr = xn->data.data() + static_cast<size_t>(i) * in;
              for (int t = 0; t < in; ++t) dw[t] += g * xr[t];
            }
          }
        }
        if (bn->needs_grad) {
          bn->ensure_grad();
          for (int i = 0; i < batch; ++i) {
            const T* gr = self.grad.data() + static_cast<size_t>(i) * out_dim;
            for (int o = 0; o < out_dim; ++o) bn->grad[o] += gr[o];
          }
        }
      });
  const T* xd = x.values().data();
  const T* wd = weight.values().data();
  const T* bd = bias.values().data();
  T* od = out.values().data();
  for (int i = 0; i < batch; ++i) {
    const T* xr = xd + static_cast<size_t>(i) * in;
    T* orow = od + static_cast<size_t>(i) * out_dim;
    for (int o = 0; o < out_dim; ++o) {
      const T* wr = wd + static_cast<size_t>(o) * in;
      T acc = bd[o];
      for (int t = 0; t < in; ++t) acc += xr[t] * wr[t];
      orow[o] = acc;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spatial ops (NCHW)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> pad_reflect2d(const Tensor<T>& x, int pad) {
  detail::check_rank(x, 4, "pad_reflect2d", "input");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (pad >= H || pad >= W) {
    throw std::invalid_argument("pad_reflect2d: pad " + std::to_string(pad) +
                                " too large for spatial size " + std::to_string(H) +
                                "x" + std::to_string(W));
  }
  const int OH = H + 2 * pad, OW = W + 2 * pad;
  auto reflect = [](int i, int n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return i;
  };
  auto xn = x.node();
  Tensor<T> out = Tensor<T>::make_result(
      {N, C, OH, OW}, {xn}, [xn, N, C, H, W, pad, OH, OW, reflect](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        for (int nc = 0; nc < N * C; ++nc) {
          const T* gp = self.grad.data() + static_cast<size_t>(nc) * OH * OW;
          T* dx = xn->grad.data() + static_cast<size_t>(nc) * H * W;
          for (int oh = 0; oh < OH; ++oh) {
            const int ih = reflect(oh - pad, H);
            for (int ow = 0; ow < OW; ++ow) {
              dx[ih * W + reflect(ow - pad, W)] += gp[oh * OW + ow];
            }
          }
        }
      });
  const T* xd = x.values().data();
  T* od = out.values().data();
  for (int nc = 0; nc < N * C; ++nc) {
    const T* xp = xd + static_cast<size_t>(nc) * H * W;
    T* op = od + static_cast<size_t>(nc) * OH * OW;
    for (int oh = 0; oh < OH; ++oh) {
      const int ih = reflect(oh - pad, H);
      for (int ow = 0; ow < OW; ++ow) op[oh * OW + ow] = xp[ih * W + reflect(ow - pad, W)];
    }
  }
  return out;
}

namespace detail {

// Cross-correlation with implicit zero padding.
template <typename T>
Tensor<T> conv2d_zero(const Tensor<T>& input, const Tensor<T>& weight, int stride,
                      int pad) {
  check_rank(input, 4, "conv2d", "input");
  check_rank(weight, 4, "conv2d", "weight");
  const int N = input.dim(0), Ci = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int Co = weight.dim(0), K = weight.dim(2);
  if (weight.dim(1) != Ci) {
    throw std::invalid_argument(
        "conv2d: input channel axis (" + std::to_string(Ci) +
        ") does not match weight input-channel axis (" + std::to_string(weight.dim(1)) +
        ")");
  }
  if (weight.dim(2) != weight.dim(3)) {
    throw std::invalid_argument("conv2d: non-square kernel " + shape_str(weight.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  const int OH = (H + 2 * pad - K) / stride + 1;
  const int OW = (W + 2 * pad - K) / stride + 1;
  if (H + 2 * pad < K || W + 2 * pad < K || OH < 1 || OW < 1) {
    throw std::invalid_argument("conv2d: kernel " + std::to_string(K) +
                                " with pad " + std::to_string(pad) +
                                " exceeds input spatial size " + std::to_string(H) + "x" +
                                std::to_string(W));
  }
  auto xn = input.node();
  auto wn = weight.node();
  const int s = stride, p = pad;
  Tensor<T> out = Tensor<T>::make_result(
      {N, Co, OH, OW}, {xn, wn},
      [xn, wn, N, Ci, H, W, Co, K, OH, OW, s, p](TensorNode<T>& self) {
        const bool dx_on = xn->needs_grad;
        const bool dw_on = wn->needs_grad;
        if (dx_on) xn->ensure_grad();
        if (dw_on) wn->ensure_grad();
        for (int n = 0; n < N; ++n) {
          for (int co = 0; co < Co; ++co) {
            const T* gplane = self.grad.data() +
                              (static_cast<size_t>(n) * Co + co) * OH * OW;
            for (int ci = 0; ci < Ci; ++ci) {
              const size_t xbase = (static_cast<size_t>(n) * Ci + ci) * H * W;
              const size_t wbase = (static_cast<size_t>(co) * Ci + ci) * K * K;
              for (int kh = 0; kh < K; ++kh) {
                const int oh_lo = std::max(0, div_ceil(p - kh, s));
                const int oh_hi = std::min(OH, div_floor(H - 1 - kh + p, s) + 1);
                for (int kw = 0; kw < K; ++kw) {
                  const int ow_lo = std::max(0, div_ceil(p - kw, s));
                  const int ow_hi = std::min(OW, div_floor(W - 1 - kw + p, s) + 1);
                  const T wv = wn->data[wbase + kh * K + kw];
                  const int shift = kw - p;
                  T wacc = T(0);
                  for (int oh = oh_lo; oh < oh_hi; ++oh) {
                    const int ih = oh * s + kh - p;
                    const T* grow = gplane + static_cast<size_t>(oh) * OW;
                    const size_t xrow = xbase + static_cast<size_t>(ih) * W;
                    if (dx_on) {
                      T* dxrow = xn->grad.data() + xrow;
                      for (int ow = ow_lo; ow < ow_hi; ++ow)
                        dxrow[ow * s + shift] += grow[ow] * wv;
                    }
                    if (dw_on) {
                      const T* xr = xn->data.data() + xrow;
                      for (int ow = ow_lo; ow < ow_hi; ++ow)
                        wacc += grow[ow] * xr[ow * s + shift];
                    }
                  }
                  if (dw_on) wn->grad[wbase + kh * K + kw] += wacc;
                }
              }
            }
          }
        }
      });
  const T* xd = input.values().data();
  const T* wd = weight.values().data();
  T* od = out.values().data();
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Co; ++co) {
      T* oplane = od + (static_cast<size_t>(n) * Co + co) * OH * OW;
      for (int ci = 0; ci < Ci; ++ci) {
        const T* xplane = xd + (static_cast<size_t>(n) * Ci + ci) * H * W;
        const T* wk = wd + (static_cast<size_t>(co) * Ci + ci) * K * K;
        for (int kh = 0; kh < K; ++kh) {
          const int oh_lo = std::max(0, div_ceil(p - kh, s));
          const int oh_hi = std::min(OH, div_floor(H - 1 - kh + p, s) + 1);
          for (int kw = 0; kw < K; ++kw) {
            const int ow_lo = std::max(0, div_ceil(p - kw, s));
            const int ow_hi = std::min(OW, div_floor(W - 1 - kw + p, s) + 1);
            const T wv = wk[kh * K + kw];
            const int shift = kw - p;
            for (int oh = oh_lo; oh < oh_hi; ++oh) {
              const int ih = oh * s + kh - p;
              const T* xrow = xplane + static_cast<size_t>(ih) * W;
              T* orow = oplane + static_cast<size_t>(oh) * OW;
              if (s == 1) {
                for (int ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += wv * xrow[ow + shift];
              } else {
                for (int ow = ow_lo; ow < ow_hi; ++ow)
                  orow[ow] += wv * xrow[ow * s + shift];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace detail

// input [N, Ci, H, W], weight [Co, Ci, K, K].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, int stride,
                 PadType pad_type, int pad) {
  if (pad_type == PadType::kReflect && pad > 0) {
    return detail::conv2d_zero(pad_reflect2d(input, pad), weight, stride, 0);
  }
  return detail::conv2d_zero(input, weight, stride, pad);
}

// input [N, Ci, H, W], weight [Ci, Co, K, K]; gradient-of-convolution
// semantics, output spatial size (in-1)*stride - 2*pad + K + output_padding.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, int stride,
                           int pad, int output_padding) {
  detail::check_rank(input, 4, "conv_transpose2d", "input");
  detail::check_rank(weight, 4, "conv_transpose2d", "weight");
  const int N = input.dim(0), Ci = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int Co = weight.dim(1), K = weight.dim(2);
  if (weight.dim(0) != Ci) {
    throw std::invalid_argument(
        "conv_transpose2d: input channel axis (" + std::to_string(Ci) +
        ") does not match weight input-channel axis (" + std::to_string(weight.dim(0)) +
        ")");
  }
  if (weight.dim(2) != weight.dim(3)) {
    throw std::invalid_argument("conv_transpose2d: non-square kernel " +
                                shape_str(weight.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv_transpose2d: stride must be >= 1");
  if (output_padding < 0 || output_padding >= stride) {
    throw std::invalid_argument("conv_transpose2d: output_padding must be in [0, stride)");
  }
  const int OH = (H - 1) * stride - 2 * pad + K + output_padding;
  const int OW = (W - 1) * stride - 2 * pad + K + output_padding;
  if (OH < 1 || OW < 1) {
    throw std::invalid_argument("conv_transpose2d: empty output for input " +
                                shape_str(input.shape()));
  }
  auto xn = input.node();
  auto wn = weight.node();
  const int s = stride, p = pad;
  Tensor<T> out = Tensor<T>::make_result(
      {N, Co, OH, OW}, {xn, wn},
      [xn, wn, N, Ci, H, W, Co, K, OH, OW, s, p](TensorNode<T>& self) {
        const bool dx_on = xn->needs_grad;
        const bool dw_on = wn->needs_grad;
        if (dx_on) xn->ensure_grad();
        if (dw_on) wn->ensure_grad();
        // dIn is a plain strided correlation of dOut with the kernel; dW is
        // the matching reduction. Same loop skeleton as the forward pass.
        for (int n = 0; n < N; ++n) {
          for (int ci = 0; ci < Ci; ++ci) {
            const size_t xbase = (static_cast<size_t>(n) * Ci + ci) * H * W;
            for (int co = 0; co < Co; ++co) {
              const T* gplane = self.grad.data() +
                                (static_cast<size_t>(n) * Co + co) * OH * OW;
              const size_t wbase = (static_cast<size_t>(ci) * Co + co) * K * K;
              for (int kh = 0; kh < K; ++kh) {
                for (int kw = 0; kw < K; ++kw) {
                  const T wv = wn->data[wbase + kh * K + kw];
                  const int shift = kw - p;
                  T wacc = T(0);
                  for (int ih = 0; ih < H; ++ih) {
                    const int oh = ih * s + kh - p;
                    if (oh < 0 || oh >= OH) continue;
                    const int iw_lo = std::max(0, detail::div_ceil(p - kw, s));
                    const int iw_hi = std::min(W, detail::div_floor(OW - 1 - kw + p, s) + 1);
                    const T* grow = gplane + static_cast<size_t>(oh) * OW;
                    const size_t xrow = xbase + static_cast<size_t>(ih) * W;
                    if (dx_on) {
                      T* dxr = xn->grad.data() + xrow;
                      for (int iw = iw_lo; iw < iw_hi; ++iw)
                        dxr[iw] += grow[iw * s + shift] * wv;
                    }
                    if (dw_on) {
                      const T* xr = xn->data.data() + xrow;
                      for (int iw = iw_lo; iw < iw_hi; ++iw)
                        wacc += grow[iw * s + shift] * xr[iw];
                    }
                  }
                  if (dw_on) wn->grad[wbase + kh * K + kw] += wacc;
                }
              }
            }
          }
        }
      });
  const T* xd = input.values().data();
  const T* wd = weight.values().data();
  T* od = out.values().data();
  for (int n = 0; n < N; ++n) {
    for (int ci = 0; ci < Ci; ++ci) {
      const T* xplane = xd + (static_cast<size_t>(n) * Ci + ci) * H * W;
      for (int co = 0; co < Co; ++co) {
        T* oplane = od + (static_cast<size_t>(n) * Co + co) * OH * OW;
        const T* wk = wd + (static_cast<size_t>(ci) * Co + co) * K * K;
        for (int kh = 0; kh < K; ++kh) {
          for (int kw = 0; kw < K; ++kw) {
            const T wv = wk[kh * K + kw];
            const int shift = kw - p;
            for (int ih = 0; ih < H; ++ih) {
              const int oh = ih * s + kh - p;
              if (oh < 0 || oh >= OH) continue;
              const int iw_lo = std::max(0, detail::div_ceil(p - kw, s));
              const int iw_hi = std::min(W, detail::div_floor(OW - 1 - kw + p, s) + 1);
              const T* xrow = xplane + static_cast<size_t>(ih) * W;
              T* orow = oplane + static_cast<size_t>(oh) * OW;
              for (int iw = iw_lo; iw < iw_hi; ++iw)
                orow[iw * s + shift] += wv * xrow[iw];
            }
          }
        }
      }
    }
  }
  return out;
}

// Per-sample, per-channel standardization; no learned affine.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, T eps = T(1e-5)) {
  detail::check_rank(x, 4, "instance_norm", "input");
  const int N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  auto xn = x.node();
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(N) * C);
  Tensor<T> out = Tensor<T>::make_result(
      x.shape(), {xn}, [xn, inv_std, N, C, HW](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        const T inv_hw = T(1) / static_cast<T>(HW);
        for (int nc = 0; nc < N * C; ++nc) {
          const size_t base = static_cast<size_t>(nc) * HW;
          const T* gy = self.grad.data() + base;
          const T* y = self.data.data() + base;
          T* dx = xn->grad.data() + base;
          T g_mean = T(0), gy_mean = T(0);
          for (int i = 0; i < HW; ++i) {
            g_mean += gy[i];
            gy_mean += gy[i] * y[i];
          }
          g_mean *= inv_hw;
          gy_mean *= inv_hw;
          const T is = (*inv_std)[nc];
          for (int i = 0; i < HW; ++i) {
            dx[i] += is * (gy[i] - g_mean - y[i] * gy_mean);
          }
        }
      });
  const T* xd = x.values().data();
  T* od = out.values().data();
  const T inv_hw = T(1) / static_cast<T>(HW);
  for (int nc = 0; nc < N * C; ++nc) {
    const size_t base = static_cast<size_t>(nc) * HW;
    const T* xp = xd + base;
    T mean = T(0);
    for (int i = 0; i < HW; ++i) mean += xp[i];
    mean *= inv_hw;
    T var = T(0);
    for (int i = 0; i < HW; ++i) {
      const T d = xp[i] - mean;
      var += d * d;
    }
    var *= inv_hw;
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[nc] = is;
    T* op = od + base;
    for (int i = 0; i < HW; ++i) op[i] = (xp[i] - mean) * is;
  }
  return out;
}

// [N, C, H, W] -> [N, C]; gradient routes to the first argmax in row-major
// order.
template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& x) {
  detail::check_rank(x, 4, "global_max_pool", "input");
  const int N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  auto xn = x.node();
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(N) * C);
  Tensor<T> out = Tensor<T>::make_result(
      {N, C}, {xn}, [xn, argmax, N, C, HW](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        for (int nc = 0; nc < N * C; ++nc) {
          xn->grad[static_cast<size_t>(nc) * HW + (*argmax)[nc]] += self.grad[nc];
        }
      });
  const T* xd = x.values().data();
  T* od = out.values().data();
  for (int nc = 0; nc < N * C; ++nc) {
    const T* xp = xd + static_cast<size_t>(nc) * HW;
    int best = 0;
    for (int i = 1; i < HW; ++i) {
      if (xp[i] > xp[best]) best = i;
    }
    (*argmax)[nc] = best;
    od[nc] = xp[best];
  }
  return out;
}

// Unit-norm slices along the last axis. Rank-1 tensors are treated as a
// single slice. Rows with norm below eps fall back to division by eps.
template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x, T eps = T(1e-12)) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw std::invalid_argument("l2_normalize: expected rank 1 or 2, got shape " +
                                shape_str(x.shape()));
  }
  const int rows = x.rank() == 2 ? x.dim(0) : 1;
  const int cols = x.rank() == 2 ? x.dim(1) : x.dim(0);
  auto xn = x.node();
  // denom > 0 when the row norm was used; negated when the eps floor kicked
  // in (division by a constant, so the projection term must be skipped).
  auto denom = std::make_shared<std::vector<T>>(rows);
  Tensor<T> out = Tensor<T>::make_result(
      x.shape(), {xn}, [xn, denom, rows, cols](TensorNode<T>& self) {
        if (!xn->needs_grad) return;
        xn->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          const size_t base = static_cast<size_t>(r) * cols;
          const T* gy = self.grad.data() + base;
          const T* y = self.data.data() + base;
          T* dx = xn->grad.data() + base;
          const T d = (*denom)[r];
          if (d < T(0)) {
            for (int c = 0; c < cols; ++c) dx[c] += gy[c] / (-d);
            continue;
          }
          T dot = T(0);
          for (int c = 0; c < cols; ++c) dot += gy[c] * y[c];
          for (int c = 0; c < cols; ++c) dx[c] += (gy[c] - y[c] * dot) / d;
        }
      });
  const T* xd = x.values().data();
  T* od = out.values().data();
  for (int r = 0; r < rows; ++r) {
    const size_t base = static_cast<size_t>(r) * cols;
    T sq = T(0);
    for (int c = 0; c < cols; ++c) sq += xd[base + c] * xd[base + c];
    const T norm = std::sqrt(sq);
    const bool floored = norm < eps;
    const T d = floored ? eps : norm;
    (*denom)[r] = floored ? -d : d;
    for (int c = 0; c < cols; ++c) od[base + c] = xd[base + c] / d;
  }
  return out;
}

}  // namespace acnet
