// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic video tokenizer with 4x temporal compression. Latent frame 0
// holds frame 0 replicated four times; latent frame k >= 1 stacks frames
// 4k-3 .. 4k. Each s x s spatial patch of a latent frame becomes one token
// vector of length 4 * s * s * 3, laid out [frame][row][col][channel].

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvdit/model/params.hpp"

namespace mvdit::video {

inline constexpr std::int64_t kTemporalStride = 4;
inline constexpr std::int64_t kChannels = 3;

class VideoError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct VideoClip {
  std::int64_t frames = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  int fps = 16;
  std::vector<std::uint8_t> rgb;  // [F, H, W, 3]

  std::uint8_t& at(std::int64_t f, std::int64_t y, std::int64_t x, int c) {
    return rgb[static_cast<std::size_t>(((f * height + y) * width + x) * kChannels + c)];
  }
  std::uint8_t at(std::int64_t f, std::int64_t y, std::int64_t x, int c) const {
    return rgb[static_cast<std::size_t>(((f * height + y) * width + x) * kChannels + c)];
  }
  bool operator==(const VideoClip&) const = default;
};

struct LatentGeometry {
  std::int64_t t = 0;  // latent frames
  std::int64_t h = 0;
  std::int64_t w = 0;

  std::int64_t tokens() const { return t * h * w; }
  bool operator==(const LatentGeometry&) const = default;
};

inline void validate_geometry(std::int64_t frames, std::int64_t height, std::int64_t width, std::int64_t stride) {
  if (stride <= 0) throw VideoError("spatial stride must be positive");
  if (frames <= 0 || (frames - 1) % kTemporalStride != 0)
    throw VideoError("frame count must be 1 mod 4, got " + std::to_string(frames));
  if (height <= 0 || width <= 0 || height % stride != 0 || width % stride != 0)
    throw VideoError("frame size " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by stride " + std::to_string(stride));
}

inline LatentGeometry latent_geometry(std::int64_t frames, std::int64_t height, std::int64_t width,
                                      std::int64_t stride) {
  validate_geometry(frames, height, width, stride);
  return {(frames - 1) / kTemporalStride + 1, height / stride, width / stride};
}

inline std::int64_t video_token_count(std::int64_t frames, std::int64_t height, std::int64_t width,
                                      std::int64_t stride) {
  return latent_geometry(frames, height, width, stride).tokens();
}

inline std::int64_t patch_dim(std::int64_t stride) { return kTemporalStride * stride * stride * kChannels; }

inline float byte_to_unit(std::uint8_t b) { return static_cast<float>(b) / 127.5f - 1.0f; }
inline std::uint8_t unit_to_byte(double x) {
  const double v = std::round((std::clamp(x, -1.0, 1.0) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

// Source frame of slot g (0..3) of latent frame k.
inline std::int64_t source_frame(std::int64_t k, std::int64_t g) { return k == 0 ? 0 : kTemporalStride * (k - 1) + 1 + g; }

struct Patches {
  LatentGeometry grid;
  std::int64_t stride = 0;
  std::int64_t dim = 0;
  Buffer<float> values;  // [tokens, dim], tokens ordered (t, h, w)
};

inline Patches patchify(const VideoClip& clip, std::int64_t stride) {
  if (static_cast<std::int64_t>(clip.rgb.size()) != clip.frames * clip.height * clip.width * kChannels)
    throw VideoError("video pixel buffer does not match its geometry");
  Patches p;
  p.grid = latent_geometry(clip.frames, clip.height, clip.width, stride);
  p.stride = stride;
  p.dim = patch_dim(stride);
  p.values.resize(static_cast<std::size_t>(p.grid.tokens() * p.dim));
  std::size_t o = 0;
  for (std::int64_t k = 0; k < p.grid.t; ++k)
    for (std::int64_t ph = 0; ph < p.grid.h; ++ph)
      for (std::int64_t pw = 0; pw < p.grid.w; ++pw)
        for (std::int64_t g = 0; g < kTemporalStride; ++g)
          for (std::int64_t y = 0; y < stride; ++y)
            for (std::int64_t x = 0; x < stride; ++x)
              for (int c = 0; c < kChannels; ++c)
                p.values[o++] = byte_to_unit(clip.at(source_frame(k, g), ph * stride + y, pw * stride + x, c));
  return p;
}

// Inverse of patchify. Frame 0 is the mean of its four replicas, which is
// exact for patchify output and a reasonable estimate for generated latents.
template <class Values>
VideoClip unpatchify(const Values& values, const LatentGeometry& grid, std::int64_t stride, int fps = 16) {
  const auto dim = patch_dim(stride);
  if (static_cast<std::int64_t>(values.size()) != grid.tokens() * dim)
    throw VideoError("patch buffer does not match latent geometry");
  VideoClip clip;
  clip.frames = (grid.t - 1) * kTemporalStride + 1;
  clip.height = grid.h * stride;
  clip.width = grid.w * stride;
  clip.fps = fps;
  clip.rgb.assign(static_cast<std::size_t>(clip.frames * clip.height * clip.width * kChannels), 0);
  auto value = [&](std::int64_t k, std::int64_t ph, std::int64_t pw, std::int64_t g, std::int64_t y, std::int64_t x,
                   int c) {
    const auto token = (k * grid.h + ph) * grid.w + pw;
    return static_cast<double>(values[static_cast<std::size_t>(token * dim + ((g * stride + y) * stride + x) * kChannels + c)]);
  };
  for (std::int64_t k = 0; k < grid.t; ++k)
    for (std::int64_t ph = 0; ph < grid.h; ++ph)
      for (std::int64_t pw = 0; pw < grid.w; ++pw)
        for (std::int64_t y = 0; y < stride; ++y)
          for (std::int64_t x = 0; x < stride; ++x)
            for (int c = 0; c < kChannels; ++c) {
              if (k == 0) {
                double acc = 0;
                for (std::int64_t g = 0; g < kTemporalStride; ++g) acc += value(0, ph, pw, g, y, x, c);
                clip.at(0, ph * stride + y, pw * stride + x, c) = unit_to_byte(acc / kTemporalStride);
              } else {
                for (std::int64_t g = 0; g < kTemporalStride; ++g)
                  clip.at(source_frame(k, g), ph * stride + y, pw * stride + x, c) =
                      unit_to_byte(value(k, ph, pw, g, y, x, c));
              }
            }
  return clip;
}

// Learned linear projection into and out of the hidden width.
template <class T>
Tensor<T> embed_patches(const Tensor<T>& patches, const Linear<T>& in) {
  if (patches.rank() != 2 || patches.cols() != in.weight.dim(0))
    throw ShapeError("embed_patches: patch width " + shape_str(patches.shape()) + " does not match projection");
  return in(patches);
}

template <class T>
Tensor<T> unembed(const Tensor<T>& grid, const Linear<T>& out) {
  if (grid.rank() != 2 || grid.cols() != out.weight.dim(0)) throw ShapeError("unembed: hidden width mismatch");
  return out(grid);
}

}  // namespace mvdit::video
