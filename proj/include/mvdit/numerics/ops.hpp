// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable tensor ops. Everything operates on row-major 1-D or 2-D
// tensors; "rows" are tokens and "cols" are features throughout the model.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <vector>

#include "mvdit/numerics/tensor.hpp"

namespace mvdit {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;
template <class T>
using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <class T>
using ConstArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

namespace detail {

template <class T>
ConstMatrixMap<T> as_matrix(const Buffer<T>& v, std::int64_t rows, std::int64_t cols) {
  return ConstMatrixMap<T>(v.data(), rows, cols);
}
template <class T>
MatrixMap<T> as_matrix(Buffer<T>& v, std::int64_t rows, std::int64_t cols) {
  return MatrixMap<T>(v.data(), rows, cols);
}
template <class T>
ConstArrayMap<T> as_array(const Buffer<T>& v) {
  return ConstArrayMap<T>(v.data(), static_cast<Eigen::Index>(v.size()));
}
template <class T>
ArrayMap<T> as_array(Buffer<T>& v) {
  return ArrayMap<T>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <class T>
void require_matrix(const Tensor<T>& a, const char* op) {
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(a.shape()));
}

// A row vector may be given as [d] or [1, d].
template <class T>
std::int64_t row_vector_width(const Tensor<T>& v, const char* op) {
  if (v.rank() == 1) return v.dim(0);
  if (v.rank() == 2 && v.dim(0) == 1) return v.dim(1);
  throw ShapeError(std::string(op) + ": expected a row vector, got " + shape_str(v.shape()));
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  Buffer<T> out(a.values());
  detail::as_array(out) += detail::as_array(b.values());
  return detail::make_result<T>(a.shape(), std::move(out), {&a, &b}, [](detail::Node<T>& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (auto* g = detail::grad_of(self, i)) detail::as_array(*g) += detail::as_array(self.grad);
    }
  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  Buffer<T> out(a.values());
  detail::as_array(out) -= detail::as_array(b.values());
  return detail::make_result<T>(a.shape(), std::move(out), {&a, &b}, [](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) detail::as_array(*g) += detail::as_array(self.grad);
    if (auto* g = detail::grad_of(self, 1)) detail::as_array(*g) -= detail::as_array(self.grad);
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  Buffer<T> out(a.values());
  detail::as_array(out) *= detail::as_array(b.values());
  return detail::make_result<T>(a.shape(), std::move(out), {&a, &b}, [](detail::Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (auto* g = detail::grad_of(self, 0))
      detail::as_array(*g) += detail::as_array(self.grad) * detail::as_array(bv);
    if (auto* g = detail::grad_of(self, 1))
      detail::as_array(*g) += detail::as_array(self.grad) * detail::as_array(av);
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Buffer<T> out(a.values());
  detail::as_array(out) *= s;
  return detail::make_result<T>(a.shape(), std::move(out), {&a}, [s](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) detail::as_array(*g) += s * detail::as_array(self.grad);
  });
}

// a[n, d] + b broadcast over rows.
template <class T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_matrix(a, "add_row");
  const auto d = detail::row_vector_width(b, "add_row");
  if (d != a.cols()) throw ShapeError("add_row: width mismatch");
  const auto n = a.rows();
  Buffer<T> out(a.values());
  detail::as_matrix(out, n, d).rowwise() += detail::as_matrix(b.values(), 1, d).row(0);
  return detail::make_result<T>(a.shape(), std::move(out), {&a, &b}, [n, d](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) detail::as_array(*g) += detail::as_array(self.grad);
    if (auto* g = detail::grad_of(self, 1))
      detail::as_matrix(*g, 1, d).row(0) += detail::as_matrix(self.grad, n, d).colwise().sum();
  });
}

// a[n, d] * b broadcast over rows.
template <class T>
Tensor<T> mul_row(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_matrix(a, "mul_row");
  const auto d = detail::row_vector_width(b, "mul_row");
  if (d != a.cols()) throw ShapeError("mul_row: width mismatch");
  const auto n = a.rows();
  Buffer<T> out(a.values());
  detail::as_matrix(out, n, d).array().rowwise() *= detail::as_matrix(b.values(), 1, d).array().row(0);
  return detail::make_result<T>(a.shape(), std::move(out), {&a, &b}, [n, d](detail::Node<T>& self) {
    const auto G = detail::as_matrix(self.grad, n, d).array();
    if (auto* g = detail::grad_of(self, 0)) {
      const auto B = detail::as_matrix(self.parents[1]->value, 1, d).array().row(0);
      detail::as_matrix(*g, n, d).array() += G.rowwise() * B;
    }
    if (auto* g = detail::grad_of(self, 1)) {
      const auto A = detail::as_matrix(self.parents[0]->value, n, d).array();
      detail::as_matrix(*g, 1, d).array().row(0) += (G * A).colwise().sum();
    }
  });
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  const auto n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimension mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Buffer<T> out(static_cast<std::size_t>(n * m));
  detail::as_matrix(out, n, m).noalias() = detail::as_matrix(a.values(), n, k) * detail::as_matrix(b.values(), k, m);
  return detail::make_result<T>({n, m}, std::move(out), {&a, &b}, [n, k, m](detail::Node<T>& self) {
    const auto G = detail::as_matrix(self.grad, n, m);
    if (auto* g = detail::grad_of(self, 0))
      detail::as_matrix(*g, n, k).noalias() += G * detail::as_matrix(self.parents[1]->value, k, m).transpose();
    if (auto* g = detail::grad_of(self, 1))
      detail::as_matrix(*g, k, m).noalias() += detail::as_matrix(self.parents[0]->value, n, k).transpose() * G;
  });
}

// x[n, in] * w[in, out] + bias[out].
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  detail::require_matrix(x, "linear");
  detail::require_matrix(w, "linear");
  const auto n = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
  if (w.dim(0) != in) {
    throw ShapeError("linear: input width " + std::to_string(in) + " does not match weight " + shape_str(w.shape()));
  }
  if (detail::row_vector_width(bias, "linear") != out_dim) throw ShapeError("linear: bias width mismatch");
  Buffer<T> out(static_cast<std::size_t>(n * out_dim));
  auto Y = detail::as_matrix(out, n, out_dim);
  Y.noalias() = detail::as_matrix(x.values(), n, in) * detail::as_matrix(w.values(), in, out_dim);
  Y.rowwise() += detail::as_matrix(bias.values(), 1, out_dim).row(0);
  return detail::make_result<T>({n, out_dim}, std::move(out), {&x, &w, &bias},
                                [n, in, out_dim](detail::Node<T>& self) {
    const auto G = detail::as_matrix(self.grad, n, out_dim);
    if (auto* g = detail::grad_of(self, 0))
      detail::as_matrix(*g, n, in).noalias() += G * detail::as_matrix(self.parents[1]->value, in, out_dim).transpose();
    if (auto* g = detail::grad_of(self, 1))
      detail::as_matrix(*g, in, out_dim).noalias() += detail::as_matrix(self.parents[0]->value, n, in).transpose() * G;
    if (auto* g = detail::grad_of(self, 2)) detail::as_matrix(*g, 1, out_dim).row(0) += G.colwise().sum();
  });
}

// tanh-approximated GELU.
template <class T>
Tensor<T> gelu(const Tensor<T>& a) {
  static constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  static constexpr T k = T(0.044715);
  const auto X = detail::as_array(a.values());
  Buffer<T> out(a.values().size());
  detail::as_array(out) = T(0.5) * X * (T(1) + (c * (X + k * X.cube())).tanh());
  return detail::make_result<T>(a.shape(), std::move(out), {&a}, [](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      const auto X = detail::as_array(self.parents[0]->value);
      const Eigen::Array<T, Eigen::Dynamic, 1> th = (c * (X + k * X.cube())).tanh();
      const auto dy = T(0.5) * (T(1) + th) + T(0.5) * X * (T(1) - th.square()) * c * (T(1) + T(3) * k * X.square());
      detail::as_array(*g) += detail::as_array(self.grad) * dy;
    }
  });
}

template <class T>
Tensor<T> silu(const Tensor<T>& a) {
  const auto X = detail::as_array(a.values());
  Buffer<T> out(a.values().size());
  detail::as_array(out) = X / (T(1) + (-X).exp());
  return detail::make_result<T>(a.shape(), std::move(out), {&a}, [](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      const auto X = detail::as_array(self.parents[0]->value);
      const Eigen::Array<T, Eigen::Dynamic, 1> s = T(1) / (T(1) + (-X).exp());
      detail::as_array(*g) += detail::as_array(self.grad) * s * (T(1) + X * (T(1) - s));
    }
  });
}

// Row-wise normalization to zero mean and unit variance, no affine terms.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& a, T eps = T(1e-6)) {
  detail::require_matrix(a, "layer_norm");
  const auto n = a.rows(), d = a.cols();
  Buffer<T> out(a.values().size());
  Buffer<T> inv_std(static_cast<std::size_t>(n));
  const auto X = detail::as_matrix(a.values(), n, d);
  auto Y = detail::as_matrix(out, n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const T mean = X.row(r).mean();
    const auto centered = (X.row(r).array() - mean).eval();
    const T var = centered.square().mean();
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    Y.row(r) = (centered * is).matrix();
  }
  return detail::make_result<T>(a.shape(), out, {&a},
                                [n, d, inv_std = std::move(inv_std), y = out](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      const auto G = detail::as_matrix(self.grad, n, d);
      const auto Y = detail::as_matrix(y, n, d);
      auto Gx = detail::as_matrix(*g, n, d);
      for (Eigen::Index r = 0; r < n; ++r) {
        const T mg = G.row(r).mean();
        const T mgy = G.row(r).dot(Y.row(r)) / T(d);
        Gx.row(r).array() += inv_std[r] * (G.row(r).array() - mg - Y.row(r).array() * mgy);
      }
    }
  });
}

// x * (1 + scale) + shift with row-vector scale and shift (adaLN modulation).
template <class T>
Tensor<T> modulate(const Tensor<T>& x, const Tensor<T>& shift, const Tensor<T>& scale_vec) {
  detail::require_matrix(x, "modulate");
  const auto n = x.rows(), d = x.cols();
  if (detail::row_vector_width(shift, "modulate") != d || detail::row_vector_width(scale_vec, "modulate") != d) {
    throw ShapeError("modulate: width mismatch");
  }
  Buffer<T> out(x.values());
  auto Y = detail::as_matrix(out, n, d).array();
  const auto S = detail::as_matrix(scale_vec.values(), 1, d).array().row(0);
  const auto B = detail::as_matrix(shift.values(), 1, d).array().row(0);
  Y.rowwise() *= (S + T(1));
  Y.rowwise() += B;
  return detail::make_result<T>(x.shape(), std::move(out), {&x, &shift, &scale_vec}, [n, d](detail::Node<T>& self) {
    const auto G = detail::as_matrix(self.grad, n, d).array();
    if (auto* g = detail::grad_of(self, 0)) {
      const auto S = detail::as_matrix(self.parents[2]->value, 1, d).array().row(0);
      detail::as_matrix(*g, n, d).array() += G.rowwise() * (S + T(1));
    }
    if (auto* g = detail::grad_of(self, 1)) detail::as_matrix(*g, 1, d).array().row(0) += G.colwise().sum();
    if (auto* g = detail::grad_of(self, 2)) {
      const auto X = detail::as_matrix(self.parents[0]->value, n, d).array();
      detail::as_matrix(*g, 1, d).array().row(0) += (G * X).colwise().sum();
    }
  });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  validate_shape(shape);
  if (numel(shape) != a.numel()) throw ShapeError("reshape: element count mismatch");
  return detail::make_result<T>(std::move(shape), a.values(), {&a}, [](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) detail::as_array(*g) += detail::as_array(self.grad);
  });
}

template <class T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const auto d = parts.front().cols();
  std::int64_t n = 0;
  for (const auto& p : parts) {
    detail::require_matrix(p, "concat_rows");
    if (p.cols() != d) throw ShapeError("concat_rows: width mismatch");
    n += p.rows();
  }
  Buffer<T> out;
  out.reserve(static_cast<std::size_t>(n * d));
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  return detail::make_result_n<T>({n, d}, std::move(out), parts, [offsets](detail::Node<T>& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      if (auto* g = detail::grad_of(self, i)) {
        const auto len = g->size();
        for (std::size_t j = 0; j < len; ++j) (*g)[j] += self.grad[offsets[i] + j];
      }
    }
  });
}

// Rows [begin, end).
template <class T>
Tensor<T> slice_rows(const Tensor<T>& a, std::int64_t begin, std::int64_t end) {
  detail::require_matrix(a, "slice_rows");
  if (begin < 0 || end > a.rows() || begin >= end) throw ShapeError("slice_rows: bad range");
  const auto d = a.cols();
  Buffer<T> out(a.values().begin() + begin * d, a.values().begin() + end * d);
  return detail::make_result<T>({end - begin, d}, std::move(out), {&a}, [begin, d](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      for (std::size_t j = 0; j < self.grad.size(); ++j) (*g)[static_cast<std::size_t>(begin * d) + j] += self.grad[j];
    }
  });
}

// out[r] = a[index[r]]; repeated indices accumulate in backward.
template <class T>
Tensor<T> gather_rows(const Tensor<T>& a, std::vector<std::int64_t> index) {
  detail::require_matrix(a, "gather_rows");
  const auto d = a.cols();
  const auto n = static_cast<std::int64_t>(index.size());
  if (n == 0) throw ShapeError("gather_rows: empty index");
  Buffer<T> out(static_cast<std::size_t>(n * d));
  for (std::int64_t r = 0; r < n; ++r) {
    const auto src = index[r];
    if (src < 0 || src >= a.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy_n(a.values().begin() + src * d, d, out.begin() + r * d);
  }
  return detail::make_result<T>({n, d}, std::move(out), {&a}, [index = std::move(index), d](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      for (std::size_t r = 0; r < index.size(); ++r)
        for (std::int64_t c = 0; c < d; ++c) (*g)[index[r] * d + c] += self.grad[r * d + c];
    }
  });
}

// Flat element gather into `shape`: out.flat[i] = a.flat[index[i]].
template <class T>
Tensor<T> gather(const Tensor<T>& a, std::vector<std::int64_t> index, Shape shape) {
  validate_shape(shape);
  if (numel(shape) != static_cast<std::int64_t>(index.size())) throw ShapeError("gather: shape/index mismatch");
  Buffer<T> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.numel()) throw ShapeError("gather: index out of range");
    out[i] = a.values()[index[i]];
  }
  return detail::make_result<T>(std::move(shape), std::move(out), {&a}, [index = std::move(index)](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      for (std::size_t i = 0; i < index.size(); ++i) (*g)[index[i]] += self.grad[i];
    }
  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  const T s = detail::as_array(a.values()).sum();
  return detail::make_result<T>({1}, {s}, {&a}, [](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) detail::as_array(*g) += self.grad[0];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

// sum_i w_i (a_i - target_i)^2 with constant target and weights.
template <class T>
Tensor<T> weighted_squared_error(const Tensor<T>& a, Buffer<T> target, Buffer<T> weights) {
  if (static_cast<std::int64_t>(target.size()) != a.numel() || target.size() != weights.size()) {
    throw ShapeError("weighted_squared_error: size mismatch");
  }
  const auto diff = (detail::as_array(a.values()) - detail::as_array(target)).eval();
  const T s = (diff.square() * detail::as_array(weights)).sum();
  return detail::make_result<T>({1}, {s}, {&a},
                                [target = std::move(target), weights = std::move(weights)](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      const auto A = detail::as_array(self.parents[0]->value);
      detail::as_array(*g) += T(2) * self.grad[0] * detail::as_array(weights) * (A - detail::as_array(target));
    }
  });
}

}  // namespace mvdit
