// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Fused multi-head softmax attention and rotary position application.

#pragma once

#include <cmath>
#include <memory>
#include <type_traits>
#include <vector>

#include "mvdit/numerics/ops.hpp"

namespace mvdit {

// Per-token rotation angles, shared across heads. cos/sin are [rows, half]
// where half = head_dim / 2; pair j of each head rotates dims (2j, 2j+1).
template <class T>
struct RotaryTable {
  std::int64_t rows = 0;
  std::int64_t half = 0;
  Buffer<T> cos;
  Buffer<T> sin;
};

template <class T>
Tensor<T> apply_rotary(const Tensor<T>& x, std::shared_ptr<const RotaryTable<std::type_identity_t<T>>> table,
                       std::int64_t heads) {
  detail::require_matrix(x, "apply_rotary");
  const auto n = x.rows(), width = x.cols();
  if (heads <= 0 || width % heads != 0) throw ShapeError("apply_rotary: width not divisible by heads");
  const auto head_dim = width / heads;
  if (head_dim % 2 != 0) throw ShapeError("apply_rotary: head_dim must be even");
  if (table->rows != n || table->half != head_dim / 2) throw ShapeError("apply_rotary: table shape mismatch");
  const auto half = table->half;
  Buffer<T> out(x.values().size());
  const auto& in = x.values();
  for (std::int64_t r = 0; r < n; ++r) {
    const T* c = table->cos.data() + r * half;
    const T* s = table->sin.data() + r * half;
    for (std::int64_t h = 0; h < heads; ++h) {
      const auto base = r * width + h * head_dim;
      for (std::int64_t j = 0; j < half; ++j) {
        const T x0 = in[base + 2 * j], x1 = in[base + 2 * j + 1];
        out[base + 2 * j] = x0 * c[j] - x1 * s[j];
        out[base + 2 * j + 1] = x0 * s[j] + x1 * c[j];
      }
    }
  }
  return detail::make_result<T>(x.shape(), std::move(out), {&x},
                                [table, n, width, heads, head_dim, half](detail::Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      for (std::int64_t r = 0; r < n; ++r) {
        const T* c = table->cos.data() + r * half;
        const T* s = table->sin.data() + r * half;
        for (std::int64_t h = 0; h < heads; ++h) {
          const auto base = r * width + h * head_dim;
          for (std::int64_t j = 0; j < half; ++j) {
            const T g0 = self.grad[base + 2 * j], g1 = self.grad[base + 2 * j + 1];
            (*g)[base + 2 * j] += g0 * c[j] + g1 * s[j];
            (*g)[base + 2 * j + 1] += -g0 * s[j] + g1 * c[j];
          }
        }
      }
    }
  });
}

// Attention probabilities, [heads, queries, keys] row-major.
template <class T>
struct AttentionProbs {
  std::int64_t heads = 0;
  std::int64_t queries = 0;
  std::int64_t keys = 0;
  std::vector<T> values;

  T at(std::int64_t h, std::int64_t q, std::int64_t k) const { return values[(h * queries + q) * keys + k]; }
};

namespace detail {

template <class T>
using StridedMap = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;
template <class T>
using MutStridedMap = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;

template <class T>
void softmax_rows(Eigen::Ref<RowMatrix<T>> s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const T mx = s.row(r).maxCoeff();
    s.row(r).array() = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

}  // namespace detail

// softmax(q k^T / sqrt(head_dim)) v per head. q is [n, heads*head_dim], k and
// v are [m, heads*head_dim]. When `capture` is non-null the probabilities of
// every head are copied into it.
template <class T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::int64_t heads,
                    AttentionProbs<T>* capture = nullptr) {
  detail::require_matrix(q, "attention");
  detail::require_matrix(k, "attention");
  detail::require_matrix(v, "attention");
  const auto n = q.rows(), m = k.rows(), width = q.cols();
  if (k.cols() != width || v.cols() != width) throw ShapeError("attention: head-dim mismatch between q, k, v");
  if (v.rows() != m) throw ShapeError("attention: k and v row counts differ");
  if (heads <= 0 || width % heads != 0) throw ShapeError("attention: width not divisible by heads");
  const auto hd = width / heads;
  const T scale_factor = T(1) / std::sqrt(static_cast<T>(hd));
  const bool keep = grad_enabled() && (q.requires_grad() || k.requires_grad() || v.requires_grad());

  Buffer<T> out(static_cast<std::size_t>(n * width));
  Buffer<T> probs;
  if (keep) probs.resize(static_cast<std::size_t>(heads * n * m));
  if (capture) {
    capture->heads = heads;
    capture->queries = n;
    capture->keys = m;
    capture->values.resize(static_cast<std::size_t>(heads * n * m));
  }
  RowMatrix<T> p(n, m);
  const Eigen::OuterStride<> stride(width);
  for (std::int64_t h = 0; h < heads; ++h) {
    detail::StridedMap<T> Q(q.values().data() + h * hd, n, hd, stride);
    detail::StridedMap<T> K(k.values().data() + h * hd, m, hd, stride);
    detail::StridedMap<T> V(v.values().data() + h * hd, m, hd, stride);
    detail::MutStridedMap<T> O(out.data() + h * hd, n, hd, stride);
    p.noalias() = (Q * K.transpose()) * scale_factor;
    detail::softmax_rows<T>(p);
    O.noalias() = p * V;
    if (keep) std::copy(p.data(), p.data() + n * m, probs.begin() + h * n * m);
    if (capture) std::copy(p.data(), p.data() + n * m, capture->values.begin() + h * n * m);
  }
  return detail::make_result<T>({n, width}, std::move(out), {&q, &k, &v},
                                [probs = std::move(probs), n, m, width, heads, hd, scale_factor](detail::Node<T>& self) {
    const Eigen::OuterStride<> stride(width);
    auto& qv = self.parents[0]->value;
    auto& kv = self.parents[1]->value;
    auto& vv = self.parents[2]->value;
    auto* gq = detail::grad_of(self, 0);
    auto* gk = detail::grad_of(self, 1);
    auto* gv = detail::grad_of(self, 2);
    RowMatrix<T> dp(n, m);
    for (std::int64_t h = 0; h < heads; ++h) {
      ConstMatrixMap<T> P(probs.data() + h * n * m, n, m);
      detail::StridedMap<T> dO(self.grad.data() + h * hd, n, hd, stride);
      detail::StridedMap<T> Q(qv.data() + h * hd, n, hd, stride);
      detail::StridedMap<T> K(kv.data() + h * hd, m, hd, stride);
      detail::StridedMap<T> V(vv.data() + h * hd, m, hd, stride);
      if (gv) {
        detail::MutStridedMap<T> dV(gv->data() + h * hd, m, hd, stride);
        dV.noalias() += P.transpose() * dO;
      }
      if (!gq && !gk) continue;
      dp.noalias() = dO * V.transpose();
      const Eigen::Matrix<T, Eigen::Dynamic, 1> row_dot = (dp.array() * P.array()).rowwise().sum();
      dp.array() = P.array() * (dp.array().colwise() - row_dot.array());
      if (gq) {
        detail::MutStridedMap<T> dQ(gq->data() + h * hd, n, hd, stride);
        dQ.noalias() += (dp * K) * scale_factor;
      }
      if (gk) {
        detail::MutStridedMap<T> dK(gk->data() + h * hd, m, hd, stride);
        dK.noalias() += (dp.transpose() * Q) * scale_factor;
      }
    }
  });
}

}  // namespace mvdit
