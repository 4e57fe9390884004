// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvdit/numerics/ops.hpp"
#include "mvdit/numerics/rng.hpp"

namespace mvdit {

// Which half of the dual-branch model owns a parameter. Shared parameters
// (timestep/text/task embedders) belong to the pretrained-backbone side and
// are frozen together with the video branch during motion-only pretraining.
enum class Branch { Video, Motion, Shared };

inline const char* branch_name(Branch b) {
  switch (b) {
    case Branch::Video: return "video";
    case Branch::Motion: return "motion";
    case Branch::Shared: return "shared";
  }
  return "?";
}

template <class T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
  Branch branch;
};

// Ordered registry of every model parameter; names are unique.
template <class T>
class ParameterSet {
 public:
  explicit ParameterSet(std::uint64_t seed = 0) : rng_(seed) {}

  Tensor<T> normal(const std::string& name, Shape shape, double stddev, Branch branch) {
    auto n = static_cast<std::size_t>(numel(shape));
    return add(name, Tensor<T>::parameter(std::move(shape), rng_.normal_vector<T>(n, stddev)), branch);
  }

  Tensor<T> zeros(const std::string& name, Shape shape, Branch branch) {
    return add(name, Tensor<T>::zeros(std::move(shape), true), branch);
  }

  Tensor<T> add(const std::string& name, Tensor<T> tensor, Branch branch) {
    if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    entries_.push_back({name, tensor, branch});
    return tensor;
  }

  const NamedParameter<T>* find(const std::string& name) const {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
    return it == entries_.end() ? nullptr : &*it;
  }

  Tensor<T> at(const std::string& name) const {
    if (auto* p = find(name)) return p->tensor;
    throw std::out_of_range("unknown parameter: " + name);
  }

  const std::vector<NamedParameter<T>>& entries() const { return entries_; }

  std::vector<Tensor<T>> tensors() const {
    std::vector<Tensor<T>> out;
    for (const auto& e : entries_) out.push_back(e.tensor);
    return out;
  }

  std::vector<Tensor<T>> tensors(Branch branch) const {
    std::vector<Tensor<T>> out;
    for (const auto& e : entries_)
      if (e.branch == branch) out.push_back(e.tensor);
    return out;
  }

  std::int64_t count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
  }

 private:
  std::vector<NamedParameter<T>> entries_;
  Rng rng_;
};

template <class T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]

  static Linear make(ParameterSet<T>& ps, const std::string& name, std::int64_t in, std::int64_t out, Branch branch,
                     double gain = 1.0) {
    return {ps.normal(name + ".weight", {in, out}, gain / std::sqrt(static_cast<double>(in)), branch),
            ps.zeros(name + ".bias", {out}, branch)};
  }
  static Linear make_zero(ParameterSet<T>& ps, const std::string& name, std::int64_t in, std::int64_t out,
                          Branch branch) {
    return {ps.zeros(name + ".weight", {in, out}, branch), ps.zeros(name + ".bias", {out}, branch)};
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
};

// Two-layer GELU perceptron.
template <class T>
struct Mlp {
  Linear<T> fc1;
  Linear<T> fc2;

  static Mlp make(ParameterSet<T>& ps, const std::string& name, std::int64_t in, std::int64_t hidden, std::int64_t out,
                  Branch branch) {
    return {Linear<T>::make(ps, name + ".fc1", in, hidden, branch), Linear<T>::make(ps, name + ".fc2", hidden, out, branch)};
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return fc2(gelu(fc1(x))); }
};

}  // namespace mvdit
