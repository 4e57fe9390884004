// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// 3D rotary position encoding over (time, height, width) with a
// motion-synchronized extension. Video tokens sit on the latent grid; motion
// token i of frame f sits at time f/4 on the diagonal just past the grid,
// (H_lat + i, W_lat + i), so the two modalities share a time axis but never
// a spatial coordinate.

#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvdit/motion/motion_types.hpp"
#include "mvdit/numerics/attention.hpp"

namespace mvdit::rope {

enum class Modality { Video, Motion };

class RopeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RopeConfig {
  std::int64_t head_dim = 16;
  double theta = 10000.0;
  // Motion tokens restart the spatial axes at the origin (i, i).
  bool collision_mode = false;
  // Motion frame f is placed at time f * motion_time_scale.
  double motion_time_scale = 0.25;

  std::int64_t time_dims() const { return head_dim / 2; }
  std::int64_t height_dims() const { return head_dim / 4; }
  std::int64_t width_dims() const { return head_dim / 4; }

  void validate() const {
    if (head_dim <= 0 || head_dim % 4 != 0) throw RopeError("head_dim must be a positive multiple of 4");
    if (time_dims() % 2 != 0 || height_dims() % 2 != 0)
      throw RopeError("rotary axis split of head_dim " + std::to_string(head_dim) + " has odd sub-dimensions");
    if (!(theta > 1.0) || !std::isfinite(theta)) throw RopeError("rotary base must be finite and > 1");
    if (!(motion_time_scale > 0.0) || !std::isfinite(motion_time_scale))
      throw RopeError("motion time scale must be positive");
  }
  bool operator==(const RopeConfig&) const = default;
};

// Canonical coordinates of one token. For motion tokens these are
// (f/4, H_lat + i, W_lat + i); apply-time options derive the rotation
// coordinates from them.
struct PositionIndex {
  double t = 0;
  double h = 0;
  double w = 0;
  Modality modality = Modality::Video;
  bool operator==(const PositionIndex&) const = default;
};

inline PositionIndex video_index(std::int64_t t, std::int64_t h, std::int64_t w) {
  return {static_cast<double>(t), static_cast<double>(h), static_cast<double>(w), Modality::Video};
}

inline PositionIndex motion_index(std::int64_t frame, std::int64_t slot, std::int64_t h_lat, std::int64_t w_lat) {
  if (frame < 0 || slot < 0 || slot >= motion::kTokensPerFrame) throw RopeError("motion index out of range");
  return {static_cast<double>(frame) / 4.0, static_cast<double>(h_lat + slot), static_cast<double>(w_lat + slot),
          Modality::Motion};
}

// Video tokens in (t, h, w) raster order.
inline std::vector<PositionIndex> video_positions(std::int64_t t_lat, std::int64_t h_lat, std::int64_t w_lat) {
  std::vector<PositionIndex> out;
  out.reserve(static_cast<std::size_t>(t_lat * h_lat * w_lat));
  for (std::int64_t t = 0; t < t_lat; ++t)
    for (std::int64_t h = 0; h < h_lat; ++h)
      for (std::int64_t w = 0; w < w_lat; ++w) out.push_back(video_index(t, h, w));
  return out;
}

// Motion tokens frame-major, 51 per frame.
inline std::vector<PositionIndex> motion_positions(std::int64_t frames, std::int64_t h_lat, std::int64_t w_lat) {
  std::vector<PositionIndex> out;
  out.reserve(static_cast<std::size_t>(frames * motion::kTokensPerFrame));
  for (std::int64_t f = 0; f < frames; ++f)
    for (std::int64_t i = 0; i < motion::kTokensPerFrame; ++i) out.push_back(motion_index(f, i, h_lat, w_lat));
  return out;
}

struct Coords {
  double t, h, w;
};

// Coordinates actually used for rotation, after checking the index against
// its modality's invariants.
inline Coords rotation_coords(const PositionIndex& idx, std::int64_t h_lat, std::int64_t w_lat, const RopeConfig& cfg) {
  if (!std::isfinite(idx.t) || !std::isfinite(idx.h) || !std::isfinite(idx.w) || idx.t < 0)
    throw RopeError("position index must be finite and non-negative");
  if (idx.modality == Modality::Video) {
    if (idx.h < 0 || idx.w < 0 || idx.h >= static_cast<double>(h_lat) || idx.w >= static_cast<double>(w_lat) ||
        idx.h != std::floor(idx.h) || idx.w != std::floor(idx.w) || idx.t != std::floor(idx.t))
      throw RopeError("video index outside the latent grid");
    return {idx.t, idx.h, idx.w};
  }
  const double slot = idx.h - static_cast<double>(h_lat);
  if (slot < 0 || slot != std::floor(slot) || slot >= motion::kTokensPerFrame ||
      idx.w - static_cast<double>(w_lat) != slot)
    throw RopeError("motion index is not on the diagonal past the latent grid");
  const double t = idx.t * 4.0 * cfg.motion_time_scale;
  if (cfg.collision_mode) return {t, slot, slot};
  return {t, idx.h, idx.w};
}

// Pairwise rotation of vec[0..dims) by angles pos * theta^(-2j/dims).
template <class T>
void rope_rotate_inplace(std::span<T> vec, double pos, std::int64_t dims, double theta) {
  if (dims % 2 != 0 || dims < 0) throw RopeError("rotary sub-dimension must be even");
  if (static_cast<std::int64_t>(vec.size()) < dims) throw RopeError("vector shorter than rotary sub-dimension");
  if (!std::isfinite(pos)) throw RopeError("rotary position must be finite");
  for (std::int64_t j = 0; j < dims / 2; ++j) {
    const double angle = pos * std::pow(theta, -2.0 * static_cast<double>(j) / static_cast<double>(dims));
    const double c = std::cos(angle), s = std::sin(angle);
    const double x0 = vec[2 * j], x1 = vec[2 * j + 1];
    vec[2 * j] = static_cast<T>(x0 * c - x1 * s);
    vec[2 * j + 1] = static_cast<T>(x0 * s + x1 * c);
  }
}

template <class T>
std::vector<T> rope_rotate(std::span<const T> vec, double pos, std::int64_t dims, double theta) {
  std::vector<T> out(vec.begin(), vec.end());
  rope_rotate_inplace(std::span<T>(out), pos, dims, theta);
  return out;
}

// Plain 3D rotary encoding on the [t | h | w] sub-vectors of one head.
template <class T>
std::vector<T> rope3d_rotate(std::span<const T> vec, const Coords& c, const RopeConfig& cfg) {
  cfg.validate();
  if (static_cast<std::int64_t>(vec.size()) != cfg.head_dim) throw RopeError("vector length must equal head_dim");
  std::vector<T> out(vec.begin(), vec.end());
  std::span<T> s(out);
  const auto dt = cfg.time_dims(), dh = cfg.height_dims(), dw = cfg.width_dims();
  rope_rotate_inplace(s.subspan(0, dt), c.t, dt, cfg.theta);
  rope_rotate_inplace(s.subspan(dt, dh), c.h, dh, cfg.theta);
  rope_rotate_inplace(s.subspan(dt + dh, dw), c.w, dw, cfg.theta);
  return out;
}

template <class T>
std::vector<T> apply_mvs_rope(std::span<const T> vec, const PositionIndex& idx, std::int64_t h_lat, std::int64_t w_lat,
                              const RopeConfig& cfg) {
  return rope3d_rotate(vec, rotation_coords(idx, h_lat, w_lat, cfg), cfg);
}

// cos/sin table for a whole token sequence, in the pair order of
// rope3d_rotate, for use with apply_rotary on [tokens, heads * head_dim].
template <class T>
std::shared_ptr<const RotaryTable<T>> build_rotary_table(const std::vector<PositionIndex>& positions,
                                                         std::int64_t h_lat, std::int64_t w_lat,
                                                         const RopeConfig& cfg) {
  cfg.validate();
  const auto half = cfg.head_dim / 2;
  std::vector<double> freqs;
  for (auto dims : {cfg.time_dims(), cfg.height_dims(), cfg.width_dims()})
    for (std::int64_t j = 0; j < dims / 2; ++j)
      freqs.push_back(std::pow(cfg.theta, -2.0 * static_cast<double>(j) / static_cast<double>(dims)));
  const auto t_pairs = cfg.time_dims() / 2, h_pairs = cfg.height_dims() / 2;
  auto table = std::make_shared<RotaryTable<T>>();
  table->rows = static_cast<std::int64_t>(positions.size());
  table->half = half;
  table->cos.resize(static_cast<std::size_t>(table->rows * half));
  table->sin.resize(table->cos.size());
  for (std::int64_t r = 0; r < table->rows; ++r) {
    const auto c = rotation_coords(positions[static_cast<std::size_t>(r)], h_lat, w_lat, cfg);
    for (std::int64_t j = 0; j < half; ++j) {
      const double pos = j < t_pairs ? c.t : (j < t_pairs + h_pairs ? c.h : c.w);
      const double angle = pos * freqs[static_cast<std::size_t>(j)];
      table->cos[r * half + j] = static_cast<T>(std::cos(angle));
      table->sin[r * half + j] = static_cast<T>(std::sin(angle));
    }
  }
  return table;
}

}  // namespace mvdit::rope
