// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "mvdit/numerics/tensor.hpp"

namespace mvdit {

// Central differences of a scalar function, one element at a time. `f` is
// evaluated with grad mode off.
template <class T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T eps) {
  if (!(eps > T(0))) throw std::invalid_argument("finite_diff_grad: eps must be positive");
  NoGradGuard guard;
  Buffer<T> probe(x.values());
  Buffer<T> grad(probe.size());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const T orig = probe[i];
    probe[i] = orig + eps;
    const T hi = f(Tensor<T>::from(x.shape(), probe));
    probe[i] = orig - eps;
    const T lo = f(Tensor<T>::from(x.shape(), probe));
    probe[i] = orig;
    grad[i] = (hi - lo) / (T(2) * eps);
  }
  return Tensor<T>::from(x.shape(), std::move(grad));
}

// Same, but perturbs a leaf parameter in place so `f` can close over a model.
template <class T>
Tensor<T> finite_diff_grad_inplace(const std::function<T()>& f, Tensor<T>& param, T eps) {
  NoGradGuard guard;
  auto& values = param.mutable_values();
  Buffer<T> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T orig = values[i];
    values[i] = orig + eps;
    const T hi = f();
    values[i] = orig - eps;
    const T lo = f();
    values[i] = orig;
    grad[i] = (hi - lo) / (T(2) * eps);
  }
  return Tensor<T>::from(param.shape(), std::move(grad));
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps entries whose
// true gradient is ~0 from dominating through rounding noise.
template <class T>
T max_relative_error(const Tensor<T>& a, const Tensor<T>& b, T floor = T(1e-6)) {
  if (a.shape() != b.shape()) throw ShapeError("max_relative_error: shape mismatch");
  T worst = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const T denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace mvdit
