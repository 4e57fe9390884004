// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Euler integration of the learned flow from noise (t=0) to data (t=1) with
// the three guidance rules: text guidance for joint generation, nested
// motion/text guidance for motion-to-video, and video guidance for
// video-to-motion.

#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "mvdit/model/dual_dit.hpp"
#include "mvdit/motion/motion_codec.hpp"
#include "mvdit/training/trainer.hpp"
#include "mvdit/video/patchifier.hpp"

namespace mvdit::sampling {

using model::ForwardInputs;
using model::ForwardOutputs;
using model::LatentGeometry;

class SampleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// t_i = shift(i / steps), strictly increasing from exactly 0 to exactly 1.
inline std::vector<double> make_schedule(std::int64_t steps, double shift) {
  if (steps < 1) throw SampleError("sampling needs at least one step");
  std::vector<double> t(static_cast<std::size_t>(steps + 1));
  for (std::int64_t i = 0; i <= steps; ++i)
    t[i] = training::shift_timestep(static_cast<double>(i) / static_cast<double>(steps), shift);
  t.front() = 0.0;
  t.back() = 1.0;
  return t;
}

template <class T>
void require_same_size(const Buffer<T>& a, const Buffer<T>& b, const char* op) {
  if (a.size() != b.size()) throw ShapeError(std::string(op) + ": prediction sizes differ");
}

template <class T>
Buffer<T> euler_step(const Buffer<T>& x, const Buffer<T>& v, double t0, double t1) {
  require_same_size(x, v, "euler_step");
  if (!(t1 > t0)) throw SampleError("euler_step needs t1 > t0");
  Buffer<T> out(x.size());
  const T dt = static_cast<T>(t1 - t0);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + dt * v[i];
  return out;
}

// u_null + w1 (u_cond - u_null)
template <class T>
Buffer<T> guide_joint(const Buffer<T>& u_cond, const Buffer<T>& u_null, double w1) {
  require_same_size(u_cond, u_null, "guide_joint");
  Buffer<T> out(u_cond.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = u_null[i] + static_cast<T>(w1) * (u_cond[i] - u_null[i]);
  return out;
}

// u_00 + w1 (u_my - u_m0) + w2 (u_m0 - u_00)
template <class T>
Buffer<T> guide_m2v(const Buffer<T>& u_00, const Buffer<T>& u_my, const Buffer<T>& u_m0, double w1, double w2) {
  require_same_size(u_00, u_my, "guide_m2v");
  require_same_size(u_00, u_m0, "guide_m2v");
  Buffer<T> out(u_00.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = u_00[i] + static_cast<T>(w1) * (u_my[i] - u_m0[i]) + static_cast<T>(w2) * (u_m0[i] - u_00[i]);
  return out;
}

// u_0m + w2 (u_xm - u_0m)
template <class T>
Buffer<T> guide_v2m(const Buffer<T>& u_0m, const Buffer<T>& u_xm, double w2) {
  require_same_size(u_0m, u_xm, "guide_v2m");
  Buffer<T> out(u_0m.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = u_0m[i] + static_cast<T>(w2) * (u_xm[i] - u_0m[i]);
  return out;
}

// Anything that predicts velocities. trained_phase() is 0 for a fresh
// model, 1 after motion-only pretraining, 2 after multi-task training.
template <class T>
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual ForwardOutputs<T> predict(const ForwardInputs<T>& in) const = 0;
  virtual int trained_phase() const = 0;
};

template <class T>
class ModelField : public VelocityField<T> {
 public:
  ModelField(const model::DualDiT<T>& m, int phase) : model_(m), phase_(phase) {}
  ForwardOutputs<T> predict(const ForwardInputs<T>& in) const override {
    NoGradGuard guard;
    return model_.forward(in);
  }
  int trained_phase() const override { return phase_; }

 private:
  const model::DualDiT<T>& model_;
  int phase_;
};

struct SampleSpec {
  TaskMode mode = TaskMode::Joint;
  std::int64_t steps = 50;
  double shift = 8.0;
  double w1 = 6.0;
  double w2 = 1.5;
  std::uint64_t seed = 0;
  LatentGeometry grid;        // video latent grid; motion has (grid.t - 1) * 4 + 1 frames
  std::optional<std::vector<std::int64_t>> text;
  std::optional<Buffer<float>> cond_motion;  // normalized [F, 235], motion-to-video
  std::optional<Buffer<float>> cond_video;   // patches [tokens, patch_dim], video-to-motion
  bool allow_untrained = false;

  std::int64_t frames() const { return (grid.t - 1) * video::kTemporalStride + 1; }
};

template <class T>
struct SampleResult {
  std::optional<Buffer<T>> video;   // patches in flow space
  std::optional<Buffer<T>> motion;  // normalized [F, 235]
  std::vector<int> calls_per_step;
};

inline void validate_spec(const SampleSpec& s, std::int64_t patch_dim, int trained_phase) {
  if (s.steps < 1) throw SampleError("steps must be >= 1");
  if (!(s.w1 >= 0.0) || !(s.w2 >= 0.0)) throw SampleError("guidance scales must be >= 0");
  if (!(s.shift >= 1.0)) throw SampleError("shift must be >= 1");
  if (s.grid.t <= 0 || s.grid.h <= 0 || s.grid.w <= 0) throw SampleError("invalid latent grid");
  const bool need_motion = s.mode == TaskMode::MotionToVideo, need_video = s.mode == TaskMode::VideoToMotion;
  if (need_motion != s.cond_motion.has_value())
    throw SampleError(need_motion ? "motion-to-video needs a motion condition" : "unexpected motion condition");
  if (need_video != s.cond_video.has_value())
    throw SampleError(need_video ? "video-to-motion needs a video condition" : "unexpected video condition");
  if (s.cond_motion && static_cast<std::int64_t>(s.cond_motion->size()) != s.frames() * motion::kFrameParams)
    throw SampleError("motion condition frame count does not match the video grid");
  if (s.cond_video && static_cast<std::int64_t>(s.cond_video->size()) != s.grid.tokens() * patch_dim)
    throw SampleError("video condition does not match the latent grid");
  if (s.mode != TaskMode::Joint && trained_phase < 2 && !s.allow_untrained)
    throw SampleError(std::string("conditional mode ") + task_name(s.mode) + " needs a multi-task trained model");
}

template <class T>
SampleResult<T> generate(const SampleSpec& spec, const VelocityField<T>& field, std::int64_t patch_dim) {
  validate_spec(spec, patch_dim, field.trained_phase());
  const Shape vshape{spec.grid.tokens(), patch_dim}, mshape{spec.frames(), motion::kFrameParams};
  Rng rng(derive_seed(spec.seed, 0x5a3b1e));
  const bool gen_video = generates_video(spec.mode), gen_motion = generates_motion(spec.mode);
  std::optional<Buffer<T>> xv, xm;
  if (gen_video) xv = training::noise_like<T>(rng, static_cast<std::size_t>(numel(vshape)));
  if (gen_motion) xm = training::noise_like<T>(rng, static_cast<std::size_t>(numel(mshape)));
  std::optional<Tensor<T>> cond_video, cond_motion;
  if (spec.cond_video) cond_video = Tensor<T>::from(vshape, training::to_buffer<T>(*spec.cond_video));
  if (spec.cond_motion) cond_motion = Tensor<T>::from(mshape, training::to_buffer<T>(*spec.cond_motion));

  const auto schedule = make_schedule(spec.steps, spec.shift);
  SampleResult<T> result;
  for (std::int64_t i = 0; i < spec.steps; ++i) {
    const double t0 = schedule[i], t1 = schedule[i + 1];
    int calls = 0;
    auto call = [&](bool with_video, bool with_motion, bool with_text) {
      ForwardInputs<T> in;
      in.grid = spec.grid;
      in.t = t0;
      in.task = spec.mode;
      if (with_video) in.video = xv ? Tensor<T>::from(vshape, *xv) : *cond_video;
      if (with_motion) in.motion = xm ? Tensor<T>::from(mshape, *xm) : *cond_motion;
      if (with_text) in.text = spec.text;
      ++calls;
      return field.predict(in);
    };
    switch (spec.mode) {
      case TaskMode::Joint: {
        auto c = call(true, true, true);
        auto n = call(true, true, false);
        auto vv = guide_joint(c.video->values(), n.video->values(), spec.w1);
        auto vm = guide_joint(c.motion->values(), n.motion->values(), spec.w1);
        xv = euler_step(*xv, vv, t0, t1);
        xm = euler_step(*xm, vm, t0, t1);
        break;
      }
      case TaskMode::MotionToVideo: {
        auto u00 = call(true, false, false);
        auto umy = call(true, true, true);
        auto um0 = call(true, true, false);
        xv = euler_step(*xv, guide_m2v(u00.video->values(), umy.video->values(), um0.video->values(), spec.w1, spec.w2),
                        t0, t1);
        break;
      }
      case TaskMode::VideoToMotion: {
        auto u0m = call(false, true, false);
        auto uxm = call(true, true, false);
        xm = euler_step(*xm, guide_v2m(u0m.motion->values(), uxm.motion->values(), spec.w2), t0, t1);
        break;
      }
    }
    result.calls_per_step.push_back(calls);
  }
  result.video = xv;
  result.motion = xm;
  return result;
}

// Condition payloads from clips: motion is normalized, video is patchified.
inline void set_motion_condition(SampleSpec& spec, const motion::MotionClip& clip, const motion::MotionStats& stats) {
  spec.cond_motion = motion::normalize<float>(clip, stats);
}

inline void set_video_condition(SampleSpec& spec, const video::VideoClip& clip, std::int64_t stride) {
  auto p = video::patchify(clip, stride);
  spec.grid = p.grid;
  spec.cond_video = std::move(p.values);
}

struct SampleOutputs {
  std::optional<video::VideoClip> video;
  std::optional<motion::MotionClip> motion;
  std::vector<int> calls_per_step;
};

template <class T>
SampleOutputs decode_outputs(const SampleResult<T>& r, const LatentGeometry& grid, std::int64_t stride,
                             const motion::MotionStats& stats, int fps) {
  SampleOutputs out;
  if (r.video) out.video = video::unpatchify(*r.video, grid, stride, fps);
  if (r.motion) out.motion = motion::denormalize(*r.motion, stats, fps);
  out.calls_per_step = r.calls_per_step;
  return out;
}

template <class T>
SampleOutputs generate_clips(const SampleSpec& spec, const model::DualDiT<T>& m, int trained_phase,
                             const motion::MotionStats& stats, int fps = 16) {
  const auto stride = m.config().stride;
  ModelField<T> field(m, trained_phase);
  return decode_outputs(generate(spec, field, video::patch_dim(stride)), spec.grid, stride, stats, fps);
}

}  // namespace mvdit::sampling
