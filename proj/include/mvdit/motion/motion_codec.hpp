// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bidirectional projectors between per-frame motion parameters and
// transformer tokens. Three encoder MLPs lift the position (3), rotation (6)
// and shape (10) groups to the hidden width; three decoder MLPs map tokens
// back. Frames are never merged: a clip of F frames is F * 51 tokens.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mvdit/model/params.hpp"
#include "mvdit/motion/motion_types.hpp"

namespace mvdit::motion {

// Per-channel z-normalization statistics over the 235 frame parameters.
struct MotionStats {
  std::vector<float> mean = std::vector<float>(kFrameParams, 0.0f);
  std::vector<float> stddev = std::vector<float>(kFrameParams, 1.0f);

  static constexpr double kStdFloor = 1e-2;

  bool operator==(const MotionStats&) const = default;
};

// Accumulated in double in clip/frame order, so identical clip lists give
// bit-identical statistics.
inline MotionStats compute_stats(const std::vector<MotionClip>& clips) {
  std::vector<double> sum(kFrameParams, 0.0), sq(kFrameParams, 0.0);
  std::int64_t n = 0;
  for (const auto& clip : clips) {
    for (const auto& f : clip.frames) {
      auto flat = flatten(f);
      for (int c = 0; c < kFrameParams; ++c) {
        sum[c] += flat[c];
        sq[c] += static_cast<double>(flat[c]) * flat[c];
      }
      ++n;
    }
  }
  if (n == 0) throw MotionError("cannot compute motion statistics of an empty corpus");
  MotionStats s;
  for (int c = 0; c < kFrameParams; ++c) {
    const double m = sum[c] / static_cast<double>(n);
    const double var = std::max(0.0, sq[c] / static_cast<double>(n) - m * m);
    s.mean[c] = static_cast<float>(m);
    s.stddev[c] = static_cast<float>(std::max(std::sqrt(var), MotionStats::kStdFloor));
  }
  return s;
}

template <class T>
Buffer<T> normalize(const MotionClip& clip, const MotionStats& stats) {
  auto raw = clip_to_array(clip);
  Buffer<T> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = i % kFrameParams;
    out[i] = static_cast<T>((raw[i] - stats.mean[c]) / stats.stddev[c]);
  }
  return out;
}

template <class T>
MotionClip denormalize(const Buffer<T>& values, const MotionStats& stats, int fps) {
  std::vector<float> raw(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto c = i % kFrameParams;
    raw[i] = static_cast<float>(values[i]) * stats.stddev[c] + stats.mean[c];
  }
  return array_to_clip(raw, fps);
}

// Index maps between the flat [F, 235] parameter array and token rows.
struct MotionLayout {
  std::int64_t frames = 0;
  std::vector<std::int64_t> position_inputs;  // flat indices, [F*25, 3]
  std::vector<std::int64_t> rotation_inputs;  // [F*25, 6]
  std::vector<std::int64_t> shape_inputs;     // [F, 10]
  // token row t of the sequence <- row of concat(pos_tokens, rot_tokens, shape_tokens)
  std::vector<std::int64_t> token_order;
  // rows of the token sequence holding each group, in group order
  std::vector<std::int64_t> position_rows, rotation_rows, shape_rows;
  // flat parameter index p <- index into concat(flat pos out, flat rot out, flat shape out)
  std::vector<std::int64_t> assemble;

  explicit MotionLayout(std::int64_t f) : frames(f) {
    if (f <= 0) throw MotionError("motion layout needs at least one frame");
    const std::int64_t pos_rows = f * kPositionTokens, rot_rows = f * kRotationTokens;
    assemble.assign(static_cast<std::size_t>(f * kFrameParams), -1);
    const std::int64_t rot_base = pos_rows * 3, shape_base = rot_base + rot_rows * kRot6;
    for (std::int64_t fr = 0; fr < f; ++fr) {
      const std::int64_t p0 = fr * kFrameParams;
      for (int s = 0; s < kPositionTokens; ++s) {
        const std::int64_t row = fr * kPositionTokens + s;
        for (int a = 0; a < 3; ++a) {
          position_inputs.push_back(p0 + position_token_offset(s) + a);
          assemble[p0 + position_token_offset(s) + a] = row * 3 + a;
        }
      }
      for (int s = 0; s < kRotationTokens; ++s) {
        const std::int64_t row = fr * kRotationTokens + s;
        for (int a = 0; a < kRot6; ++a) {
          rotation_inputs.push_back(p0 + rotation_token_offset(s) + a);
          assemble[p0 + rotation_token_offset(s) + a] = rot_base + row * kRot6 + a;
        }
      }
      for (int a = 0; a < kShapeDims; ++a) {
        shape_inputs.push_back(p0 + kBetaOffset + a);
        assemble[p0 + kBetaOffset + a] = shape_base + fr * kShapeDims + a;
      }
      for (int j = 0; j < kTokensPerFrame; ++j) {
        const std::int64_t seq = fr * kTokensPerFrame + j;
        if (j < kPositionTokens) {
          token_order.push_back(fr * kPositionTokens + j);
          position_rows.push_back(seq);
        } else if (j < kPositionTokens + kRotationTokens) {
          token_order.push_back(pos_rows + fr * kRotationTokens + (j - kPositionTokens));
          rotation_rows.push_back(seq);
        } else {
          token_order.push_back(pos_rows + rot_rows + fr);
          shape_rows.push_back(seq);
        }
      }
    }
  }
};

inline std::int64_t motion_token_count(std::int64_t frames) { return frames * kTokensPerFrame; }

// Encoder and decoder MLPs (hidden width 4 * dim, GELU).
template <class T>
struct MotionProjectors {
  Mlp<T> encode_position, encode_rotation, encode_shape;
  Mlp<T> decode_position, decode_rotation, decode_shape;
  std::int64_t dim = 0;

  static MotionProjectors make(ParameterSet<T>& ps, std::int64_t dim, const std::string& prefix = "motion") {
    const auto h = 4 * dim;
    MotionProjectors p;
    p.dim = dim;
    p.encode_position = Mlp<T>::make(ps, prefix + ".enc_pos", 3, h, dim, Branch::Motion);
    p.encode_rotation = Mlp<T>::make(ps, prefix + ".enc_rot", kRot6, h, dim, Branch::Motion);
    p.encode_shape = Mlp<T>::make(ps, prefix + ".enc_shape", kShapeDims, h, dim, Branch::Motion);
    p.decode_position = Mlp<T>::make(ps, prefix + ".dec_pos", dim, h, 3, Branch::Motion);
    p.decode_rotation = Mlp<T>::make(ps, prefix + ".dec_rot", dim, h, kRot6, Branch::Motion);
    p.decode_shape = Mlp<T>::make(ps, prefix + ".dec_shape", dim, h, kShapeDims, Branch::Motion);
    return p;
  }
};

// params: [F, 235] (normalized) -> tokens [F*51, dim], frame-major.
template <class T>
Tensor<T> encode_motion(const Tensor<T>& params, const MotionProjectors<T>& proj) {
  if (params.rank() != 2 || params.cols() != kFrameParams) {
    throw MotionError("encode_motion expects [F, 235] parameters, got " + shape_str(params.shape()));
  }
  if (proj.encode_position.fc1.weight.dim(0) != 3 || proj.encode_position.fc2.weight.dim(1) != proj.dim) {
    throw MotionError("encode_motion: projector dimension mismatch");
  }
  const MotionLayout layout(params.rows());
  const auto f = layout.frames;
  auto pos = proj.encode_position(gather(params, layout.position_inputs, {f * kPositionTokens, 3}));
  auto rot = proj.encode_rotation(gather(params, layout.rotation_inputs, {f * kRotationTokens, kRot6}));
  auto shp = proj.encode_shape(gather(params, layout.shape_inputs, {f, kShapeDims}));
  return gather_rows(concat_rows<T>({pos, rot, shp}), layout.token_order);
}

// tokens [F*51, dim] -> params [F, 235].
template <class T>
Tensor<T> decode_motion(const Tensor<T>& tokens, const MotionProjectors<T>& proj) {
  if (tokens.rank() != 2 || tokens.rows() % kTokensPerFrame != 0) {
    throw MotionError("decode_motion: token count " + std::to_string(tokens.rows()) + " is not a multiple of 51");
  }
  if (tokens.cols() != proj.dim) throw MotionError("decode_motion: hidden width mismatch");
  const MotionLayout layout(tokens.rows() / kTokensPerFrame);
  const auto f = layout.frames;
  auto pos = proj.decode_position(gather_rows(tokens, layout.position_rows));
  auto rot = proj.decode_rotation(gather_rows(tokens, layout.rotation_rows));
  auto shp = proj.decode_shape(gather_rows(tokens, layout.shape_rows));
  auto flat = concat_rows<T>({reshape(pos, {f * kPositionTokens * 3, 1}), reshape(rot, {f * kRotationTokens * kRot6, 1}),
                              reshape(shp, {f * kShapeDims, 1})});
  return gather(flat, layout.assemble, {f, kFrameParams});
}

// Clip-level conveniences around the tensor paths.
template <class T>
Tensor<T> encode_motion(const MotionClip& clip, const MotionStats& stats, const MotionProjectors<T>& proj) {
  validate(clip);
  return encode_motion(Tensor<T>::from({clip.frame_count(), kFrameParams}, normalize<T>(clip, stats)), proj);
}

template <class T>
MotionClip decode_motion(const Tensor<T>& tokens, const MotionProjectors<T>& proj, const MotionStats& stats, int fps) {
  return denormalize(decode_motion(tokens, proj).values(), stats, fps);
}

}  // namespace mvdit::motion
