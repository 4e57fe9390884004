// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Rectified-flow primitives: straight-path interpolation between noise (t=0)
// and data (t=1), the velocity regression loss and the shifted timestep map.

#pragma once

#include <cmath>
#include <stdexcept>

#include "mvdit/numerics/ops.hpp"
#include "mvdit/numerics/rng.hpp"

namespace mvdit::training {

inline constexpr std::int64_t kTrainTimesteps = 1000;

// t = s*u / (1 + (s-1)*u); fixes 0 and 1, pushes mass toward t=1 for s > 1.
inline double shift_timestep(double u, double shift) {
  if (!(shift >= 1.0)) throw std::invalid_argument("timestep shift must be >= 1");
  return shift * u / (1.0 + (shift - 1.0) * u);
}

// u on the grid {0, 1/999, ..., 1}, then shifted.
inline double sample_train_timestep(Rng& rng, double shift) {
  const auto i = rng.uniform_int(0, kTrainTimesteps - 1);
  return shift_timestep(static_cast<double>(i) / static_cast<double>(kTrainTimesteps - 1), shift);
}

template <class T>
Buffer<T> interpolate(const Buffer<T>& x0, const Buffer<T>& x1, double t) {
  if (x0.size() != x1.size()) throw ShapeError("interpolate: size mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("interpolate: t outside [0, 1]");
  Buffer<T> out(x0.size());
  const T a = static_cast<T>(t), b = static_cast<T>(1.0 - t);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x1[i] + b * x0[i];
  return out;
}

template <class T>
Buffer<T> velocity_target(const Buffer<T>& x0, const Buffer<T>& x1) {
  if (x0.size() != x1.size()) throw ShapeError("velocity_target: size mismatch");
  Buffer<T> out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x1[i] - x0[i];
  return out;
}

// Masked sum of squared velocity errors (not yet divided by the count).
template <class T>
Tensor<T> velocity_sq_error(const Tensor<T>& pred, const Buffer<T>& x0, const Buffer<T>& x1, Buffer<T> mask) {
  if (static_cast<std::size_t>(pred.numel()) != x0.size() || mask.size() != x0.size())
    throw ShapeError("fm_loss: prediction, data and mask sizes differ");
  return weighted_squared_error(pred, velocity_target(x0, x1), std::move(mask));
}

template <class T>
double mask_count(const Buffer<T>& mask) {
  double n = 0;
  for (auto m : mask) n += static_cast<double>(m);
  return n;
}

// Mean over masked elements of (pred - (x1 - x0))^2.
template <class T>
Tensor<T> fm_loss(const Tensor<T>& pred, const Buffer<T>& x0, const Buffer<T>& x1, const Buffer<T>& mask) {
  const double n = mask_count(mask);
  if (n <= 0) throw std::invalid_argument("fm_loss: empty mask");
  return scale(velocity_sq_error(pred, x0, x1, mask), static_cast<T>(1.0 / n));
}

}  // namespace mvdit::training
