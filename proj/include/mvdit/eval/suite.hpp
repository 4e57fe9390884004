// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation runs over held-out toy records: video-to-motion pose error,
// skeleton tracking of generated videos, and attention alignment probes.

#pragma once

#include <algorithm>

#include "mvdit/eval/metrics.hpp"
#include "mvdit/sampling/sampler.hpp"
#include "mvdit/toydata/dataset.hpp"
#include "mvdit/training/flow_matching.hpp"

namespace mvdit::eval {

struct SamplerSettings {
  std::int64_t steps = 50;
  double shift = 8.0;
  double w1 = 6.0;
  double w2 = 1.5;
  std::uint64_t seed = 0;
};

inline sampling::SampleSpec base_spec(TaskMode mode, const SamplerSettings& s, std::uint64_t seed) {
  sampling::SampleSpec spec;
  spec.mode = mode;
  spec.steps = s.steps;
  spec.shift = s.shift;
  spec.w1 = s.w1;
  spec.w2 = s.w2;
  spec.seed = seed;
  return spec;
}

inline std::uint64_t clip_sample_seed(std::uint64_t seed, std::size_t i) { return derive_seed(seed, i, 0x5e7); }

struct PoseScores {
  std::vector<double> mpjpe;
  std::vector<double> pa_mpjpe;
};

// Motion recovered from each record's rendered video.
template <class T>
PoseScores v2m_scores(const model::DualDiT<T>& m, int trained_phase, const std::vector<toydata::DatasetRecord>& records,
                      const motion::MotionStats& stats, const SamplerSettings& s) {
  PoseScores out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto spec = base_spec(TaskMode::VideoToMotion, s, clip_sample_seed(s.seed, i));
    sampling::set_video_condition(spec, r.video, m.config().stride);
    spec.allow_untrained = true;
    auto gen = sampling::generate_clips(spec, m, trained_phase, stats, r.motion.fps);
    out.mpjpe.push_back(mpjpe(*gen.motion, r.motion));
    out.pa_mpjpe.push_back(pa_mpjpe(*gen.motion, r.motion));
  }
  return out;
}

struct TrackingScores {
  std::vector<double> mean_px;  // per clip
  std::int64_t missing = 0;
  double mean() const {
    double s = 0;
    for (double v : mean_px) s += v;
    return mean_px.empty() ? 0.0 : s / static_cast<double>(mean_px.size());
  }
};

// Videos generated with each record's caption, conditioned on its motion
// (conditioned = true) or jointly from text alone, scored against the
// record's skeleton.
template <class T>
TrackingScores tracking_scores(const model::DualDiT<T>& m, int trained_phase,
                               const std::vector<toydata::DatasetRecord>& records, const motion::MotionStats& stats,
                               const SamplerSettings& s, bool conditioned) {
  TrackingScores out;
  const auto& cfg = m.config();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto spec = base_spec(conditioned ? TaskMode::MotionToVideo : TaskMode::Joint, s, clip_sample_seed(s.seed, i));
    spec.grid = video::latent_geometry(r.video.frames, r.video.height, r.video.width, cfg.stride);
    spec.text = toydata::pad_caption(r.caption, static_cast<std::size_t>(cfg.text_len));
    if (conditioned) sampling::set_motion_condition(spec, r.motion, stats);
    spec.allow_untrained = true;
    auto gen = sampling::generate_clips(spec, m, trained_phase, stats, r.video.fps);
    auto e = toydata::centroid_tracking_error(*gen.video, r.motion, toydata::style_for(r.seed));
    out.mean_px.push_back(e.mean_px);
    out.missing += e.missing;
  }
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw EvalError("median of an empty set");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw EvalError("mean of an empty set");
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Joint-mode forward pass on a partially noised clip, capturing the
// attention maps of every dual block.
template <class T>
std::vector<model::AttentionCapture<T>> capture_attention(const model::DualDiT<T>& m, const training::TrainExample& ex,
                                                          double t, std::uint64_t seed) {
  Rng rng(seed);
  const auto nv = training::noise_like<T>(rng, ex.video.size());
  const auto nm = training::noise_like<T>(rng, ex.motion.size());
  Buffer<T> v(ex.video.begin(), ex.video.end()), mo(ex.motion.begin(), ex.motion.end());
  model::ForwardInputs<T> in;
  in.grid = ex.grid;
  in.t = t;
  in.task = TaskMode::Joint;
  in.text = ex.text;
  in.video = Tensor<T>::from({ex.grid.tokens(), static_cast<std::int64_t>(ex.video.size()) / ex.grid.tokens()},
                             training::interpolate(nv, v, t));
  in.motion = Tensor<T>::from({ex.frames, motion::kFrameParams}, training::interpolate(nm, mo, t));
  std::vector<model::AttentionCapture<T>> caps;
  NoGradGuard guard;
  m.forward(in, &caps);
  std::erase_if(caps, [](const auto& c) { return c.motion_tokens == 0; });
  return caps;
}

inline constexpr double kProbeTime = 0.5;

// Alignment report averaged over probe clips.
template <class T>
AttnAlignmentReport attention_alignment(const model::DualDiT<T>& m, const std::vector<training::TrainExample>& probes,
                                        std::uint64_t seed, double t = kProbeTime) {
  std::vector<AttnAlignmentReport> reports;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto caps = capture_attention(m, probes[i], t, derive_seed(seed, i, 0xa77));
    reports.push_back(attn_diagonal_score(caps, token_times(probes[i].grid, probes[i].frames)));
  }
  return average_reports(reports);
}

}  // namespace mvdit::eval
