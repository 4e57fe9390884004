// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mvdit/numerics/tensor.hpp"

namespace mvdit {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.001;
};

// First and second moments per parameter plus the shared step counter.
template <class T>
struct AdamWState {
  std::vector<Buffer<T>> first_moment;
  std::vector<Buffer<T>> second_moment;
  std::int64_t step = 0;
};

// Bias-corrected Adam update followed by decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
// The decay term uses the pre-update parameter value.
template <class T>
class AdamW {
 public:
  AdamW(std::vector<Tensor<T>> params, AdamWConfig config) : params_(std::move(params)), config_(config) {
    state_.first_moment.reserve(params_.size());
    state_.second_moment.reserve(params_.size());
    for (const auto& p : params_) {
      state_.first_moment.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
      state_.second_moment.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
    }
  }

  void step(const std::vector<Tensor<T>>& grads) {
    if (grads.size() != params_.size()) throw ShapeError("adamw: gradient count does not match parameters");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (grads[i].shape() != params_[i].shape()) {
        throw ShapeError("adamw: gradient shape " + shape_str(grads[i].shape()) + " does not match parameter " +
                         shape_str(params_[i].shape()));
      }
    }
    ++state_.step;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(state_.step));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(state_.step));
    const T lr = static_cast<T>(config_.lr);
    const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
    const T eps = static_cast<T>(config_.eps), wd = static_cast<T>(config_.weight_decay);
    const T inv_bc1 = static_cast<T>(1.0 / bc1), inv_bc2 = static_cast<T>(1.0 / bc2);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i].mutable_values();
      const auto& g = grads[i].values();
      auto& m = state_.first_moment[i];
      auto& v = state_.second_moment[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = b1 * m[j] + (T(1) - b1) * g[j];
        v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
        const T m_hat = m[j] * inv_bc1;
        const T v_hat = v[j] * inv_bc2;
        p[j] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + wd * p[j]);
      }
    }
  }

  const std::vector<Tensor<T>>& params() const { return params_; }
  const AdamWConfig& config() const { return config_; }
  AdamWState<T>& state() { return state_; }
  const AdamWState<T>& state() const { return state_; }

 private:
  std::vector<Tensor<T>> params_;
  AdamWConfig config_;
  AdamWState<T> state_;
};

}  // namespace mvdit
