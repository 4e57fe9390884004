// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-phase training: motion-only pretraining with the video branch frozen
// and absent, then multi-task training where each example samples a paradigm
// (joint, motion-to-video, video-to-motion), drops conditions, and noises
// only the modalities it generates.

#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mvdit/model/dual_dit.hpp"
#include "mvdit/numerics/adamw.hpp"
#include "mvdit/training/flow_matching.hpp"

namespace mvdit::training {

using model::DualDiT;
using model::ForwardInputs;
using model::LatentGeometry;

class TrainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Phase { MotionOnly = 1, MultiTask = 2 };

inline const char* phase_name(Phase p) { return p == Phase::MotionOnly ? "1" : "2"; }

struct TrainPlan {
  std::int64_t phase1_steps = 300;
  std::int64_t phase2_steps = 2000;
  std::int64_t batch_size = 1;
  std::array<double, kTaskModes> paradigm_probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
  double p_text = 0.1;
  double p_motion = 0.1;
  double p_video = 0.1;
  double shift = 8.0;
  double lambda_motion = 1.0;
  double lr = 1e-4;
  double weight_decay = 1e-3;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
  std::uint64_t seed = 0;

  void validate() const {
    if (phase1_steps < 0 || phase2_steps < 0) throw TrainError("step counts must be >= 0");
    if (batch_size <= 0) throw TrainError("batch_size must be positive");
    double total = 0;
    for (double p : paradigm_probs) {
      if (!(p >= 0.0 && p <= 1.0)) throw TrainError("paradigm probabilities must lie in [0, 1]");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw TrainError("paradigm probabilities must sum to 1");
    for (double p : {p_text, p_motion, p_video})
      if (!(p >= 0.0 && p <= 1.0)) throw TrainError("drop probabilities must lie in [0, 1]");
    if (!(shift >= 1.0)) throw TrainError("shift must be >= 1");
    if (!(lambda_motion >= 0.0) || !(lr > 0.0) || !(weight_decay >= 0.0) || !(grad_clip >= 0.0))
      throw TrainError("lambda_motion, weight_decay, grad_clip must be >= 0 and lr > 0");
  }
  bool operator==(const TrainPlan&) const = default;
};

// One training pair in flow space. video is empty for motion-only examples.
struct TrainExample {
  std::uint64_t id = 0;
  std::int64_t frames = 0;
  Buffer<float> motion;  // [frames, 235], normalized
  LatentGeometry grid;
  Buffer<float> video;   // [grid.tokens(), patch_dim], in [-1, 1]
  std::vector<std::int64_t> text;  // padded to the model's text length

  bool has_video() const { return !video.empty(); }
};

inline TrainExample motion_only(TrainExample e) {
  e.video.clear();
  return e;
}

// true = condition dropped.
struct ConditionDrop {
  bool text = false;
  bool video = false;
  bool motion = false;
  bool operator==(const ConditionDrop&) const = default;
};

inline TaskMode sample_paradigm(Rng& rng, const std::array<double, kTaskModes>& probs) {
  const double u = rng.uniform();
  double acc = 0;
  for (int i = 0; i < kTaskModes; ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<TaskMode>(i);
  }
  for (int i = kTaskModes - 1; i >= 0; --i)
    if (probs[i] > 0) return static_cast<TaskMode>(i);
  return TaskMode::Joint;
}

// Joint drops text only; motion-to-video drops text and motion
// independently; video-to-motion always drops text and may drop video.
inline ConditionDrop drop_conditions(Rng& rng, TaskMode mode, const TrainPlan& plan) {
  ConditionDrop d;
  switch (mode) {
    case TaskMode::Joint:
      d.text = rng.bernoulli(plan.p_text);
      break;
    case TaskMode::MotionToVideo:
      d.text = rng.bernoulli(plan.p_text);
      d.motion = rng.bernoulli(plan.p_motion);
      break;
    case TaskMode::VideoToMotion:
      d.text = true;
      d.video = rng.bernoulli(plan.p_video);
      break;
  }
  return d;
}

// Model inputs plus everything the loss needs for one example.
template <class T>
struct PreparedExample {
  std::optional<TaskMode> mode;  // nullopt in motion-only pretraining
  ConditionDrop drop;
  double t = 0;
  ForwardInputs<T> inputs;
  bool gen_video = false, gen_motion = false;
  Buffer<T> video_noise, video_data, motion_noise, motion_data;
};

template <class T>
Buffer<T> to_buffer(const Buffer<float>& src) {
  return Buffer<T>(src.begin(), src.end());
}

template <class T>
Buffer<T> noise_like(Rng& rng, std::size_t n) {
  Buffer<T> out(n);
  for (auto& v : out) v = static_cast<T>(rng.normal());
  return out;
}

// Random draws happen in a fixed order: (paradigm, drops,) timestep, video
// noise, motion noise.
template <class T>
PreparedExample<T> prepare_phase1(const TrainExample& ex, const TrainPlan& plan, Rng& rng) {
  if (ex.has_video()) throw TrainError("motion-only pretraining received video inputs");
  PreparedExample<T> p;
  p.drop.text = rng.bernoulli(plan.p_text);
  p.drop.video = true;
  p.t = sample_train_timestep(rng, plan.shift);
  p.gen_motion = true;
  p.motion_data = to_buffer<T>(ex.motion);
  p.motion_noise = noise_like<T>(rng, p.motion_data.size());
  p.inputs.grid = ex.grid;
  p.inputs.motion = Tensor<T>::from({ex.frames, motion::kFrameParams}, interpolate(p.motion_noise, p.motion_data, p.t));
  if (!p.drop.text) p.inputs.text = ex.text;
  p.inputs.t = p.t;
  return p;
}

template <class T>
PreparedExample<T> prepare_phase2(const TrainExample& ex, const TrainPlan& plan, Rng& rng,
                                  std::optional<TaskMode> forced = std::nullopt) {
  if (!ex.has_video()) throw TrainError("multi-task training needs paired video and motion");
  PreparedExample<T> p;
  // The paradigm draw is consumed even when forced, keeping later draws aligned.
  const TaskMode sampled = sample_paradigm(rng, plan.paradigm_probs);
  const TaskMode mode = forced ? *forced : sampled;
  p.mode = mode;
  p.drop = drop_conditions(rng, mode, plan);
  p.t = sample_train_timestep(rng, plan.shift);
  p.gen_video = generates_video(mode);
  p.gen_motion = generates_motion(mode);
  p.video_data = to_buffer<T>(ex.video);
  p.motion_data = to_buffer<T>(ex.motion);
  const Shape vshape{ex.grid.tokens(), static_cast<std::int64_t>(ex.video.size()) / ex.grid.tokens()};
  const Shape mshape{ex.frames, motion::kFrameParams};
  if (p.gen_video) {
    p.video_noise = noise_like<T>(rng, p.video_data.size());
    p.inputs.video = Tensor<T>::from(vshape, interpolate(p.video_noise, p.video_data, p.t));
  } else if (!p.drop.video) {
    p.inputs.video = Tensor<T>::from(vshape, p.video_data);
  }
  if (p.gen_motion) {
    p.motion_noise = noise_like<T>(rng, p.motion_data.size());
    p.inputs.motion = Tensor<T>::from(mshape, interpolate(p.motion_noise, p.motion_data, p.t));
  } else if (!p.drop.motion) {
    p.inputs.motion = Tensor<T>::from(mshape, p.motion_data);
  }
  p.inputs.grid = ex.grid;
  if (!p.drop.text) p.inputs.text = ex.text;
  p.inputs.t = p.t;
  p.inputs.task = mode;
  return p;
}

// (sum_video + lambda * sum_motion) / (masked element count) over the
// generated modalities.
template <class T>
Tensor<T> example_loss(const DualDiT<T>& model, const PreparedExample<T>& p, double lambda_motion) {
  auto out = model.forward(p.inputs);
  std::vector<Tensor<T>> parts;
  double count = 0;
  if (p.gen_video) {
    Buffer<T> mask(p.video_data.size(), T(1));
    parts.push_back(velocity_sq_error(*out.video, p.video_noise, p.video_data, mask));
    count += static_cast<double>(mask.size());
  }
  if (p.gen_motion) {
    Buffer<T> mask(p.motion_data.size(), static_cast<T>(lambda_motion));
    parts.push_back(velocity_sq_error(*out.motion, p.motion_noise, p.motion_data, mask));
    count += static_cast<double>(mask.size());
  }
  if (parts.empty()) throw TrainError("example generates no modality");
  auto total = parts.size() == 1 ? parts[0] : add(parts[0], parts[1]);
  return scale(total, static_cast<T>(1.0 / count));
}

template <class T>
double global_norm(const std::vector<Tensor<T>>& grads) {
  double acc = 0;
  for (const auto& g : grads)
    for (auto v : g.values()) acc += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(acc);
}

template <class T>
void clip_gradients(std::vector<Tensor<T>>& grads, double max_norm) {
  if (max_norm <= 0) return;
  const double n = global_norm(grads);
  if (n <= max_norm) return;
  const T s = static_cast<T>(max_norm / n);
  for (auto& g : grads) {
    Buffer<T> scaled(g.values());
    for (auto& v : scaled) v *= s;
    g = Tensor<T>::from(g.shape(), std::move(scaled));
  }
}

struct StepResult {
  double loss = 0;
  std::vector<TaskMode> paradigms;  // empty in motion-only pretraining
};

inline std::string paradigm_label(const StepResult& r) {
  if (r.paradigms.empty()) return "motion";
  std::string out;
  for (auto m : r.paradigms) {
    if (!out.empty()) out += '+';
    out += task_name(m);
  }
  return out;
}

// Per-example stream: depends on the step stream and the example id only,
// so the batch order does not change any example's draws.
inline std::uint64_t example_seed(std::uint64_t step_seed, std::uint64_t example_id) {
  return derive_seed(step_seed, example_id, 0x5eed);
}

// Parameters an optimizer may touch in each phase.
template <class T>
std::vector<Tensor<T>> trainable_parameters(DualDiT<T>& model, Phase phase) {
  return phase == Phase::MotionOnly ? model.params().tensors(Branch::Motion) : model.params().tensors();
}

template <class T>
StepResult run_step(DualDiT<T>& model, AdamW<T>& opt, Phase phase, const std::vector<const TrainExample*>& batch,
                    const TrainPlan& plan, std::uint64_t step_seed, std::optional<TaskMode> forced = std::nullopt) {
  if (batch.empty()) throw TrainError("empty batch");
  StepResult result;
  std::vector<Tensor<T>> losses;
  for (const auto* ex : batch) {
    Rng rng(example_seed(step_seed, ex->id));
    auto prepared = phase == Phase::MotionOnly ? prepare_phase1<T>(*ex, plan, rng) : prepare_phase2<T>(*ex, plan, rng, forced);
    if (prepared.mode) result.paradigms.push_back(*prepared.mode);
    losses.push_back(example_loss(model, prepared, plan.lambda_motion));
  }
  auto total = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) total = add(total, losses[i]);
  if (losses.size() > 1) total = scale(total, static_cast<T>(1.0 / static_cast<double>(losses.size())));
  result.loss = static_cast<double>(total.item());
  auto grads = gradients(total, opt.params());
  clip_gradients(grads, plan.grad_clip);
  opt.step(grads);
  return result;
}

template <class T>
StepResult phase1_step(DualDiT<T>& model, AdamW<T>& opt, const std::vector<const TrainExample*>& batch,
                       const TrainPlan& plan, std::uint64_t step_seed) {
  return run_step(model, opt, Phase::MotionOnly, batch, plan, step_seed);
}

template <class T>
StepResult phase2_step(DualDiT<T>& model, AdamW<T>& opt, const std::vector<const TrainExample*>& batch,
                       const TrainPlan& plan, std::uint64_t step_seed, std::optional<TaskMode> forced = std::nullopt) {
  return run_step(model, opt, Phase::MultiTask, batch, plan, step_seed, forced);
}

struct MetricsRow {
  std::int64_t step = 0;
  Phase phase = Phase::MotionOnly;
  std::string paradigm;
  double loss = 0;
  double wall_ms = 0;
};

// Drives one phase: seeded batch selection, steps, metrics rows.
template <class T>
class Trainer {
 public:
  Trainer(DualDiT<T>& model, const std::vector<TrainExample>& data, const TrainPlan& plan, Phase phase,
          std::string tag = "")
      : model_(model),
        data_(data),
        plan_(plan),
        phase_(phase),
        tag_(std::move(tag)),
        opt_(trainable_parameters(model, phase), AdamWConfig{.lr = plan.lr, .weight_decay = plan.weight_decay}) {
    plan_.validate();
    if (data_.empty()) throw TrainError("training set is empty");
  }

  Phase phase() const { return phase_; }
  std::int64_t step_index() const { return step_; }
  void set_step_index(std::int64_t s) { step_ = s; }
  AdamW<T>& optimizer() { return opt_; }
  const std::vector<MetricsRow>& metrics() const { return metrics_; }

  std::uint64_t step_seed(std::int64_t step) const {
    return derive_seed(plan_.seed, static_cast<std::uint64_t>(phase_), static_cast<std::uint64_t>(step));
  }

  std::vector<const TrainExample*> batch_for(std::int64_t step) const {
    Rng rng(derive_seed(step_seed(step), 0xba7c4));
    std::vector<const TrainExample*> batch;
    for (std::int64_t i = 0; i < plan_.batch_size; ++i)
      batch.push_back(&data_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(data_.size()) - 1))]);
    return batch;
  }

  MetricsRow step(std::optional<TaskMode> forced = std::nullopt) {
    const auto start = std::chrono::steady_clock::now();
    auto batch = batch_for(step_);
    auto r = run_step(model_, opt_, phase_, batch, plan_, step_seed(step_), forced);
    MetricsRow row;
    row.step = step_;
    row.phase = phase_;
    row.paradigm = tag_.empty() ? paradigm_label(r) : tag_ + ":" + paradigm_label(r);
    row.loss = r.loss;
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    metrics_.push_back(row);
    ++step_;
    return row;
  }

 private:
  DualDiT<T>& model_;
  const std::vector<TrainExample>& data_;
  TrainPlan plan_;
  Phase phase_;
  std::string tag_;
  AdamW<T> opt_;
  std::int64_t step_ = 0;
  std::vector<MetricsRow> metrics_;
};

}  // namespace mvdit::training
