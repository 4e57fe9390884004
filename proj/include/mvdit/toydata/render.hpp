// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Orthographic stick-figure renderer and the matching centroid detector.
// Bones are drawn as anti-aliased segments in five colour groups (torso,
// left/right arm, left/right leg) over a flat background.

#pragma once

#include <optional>

#include "mvdit/toydata/skeleton.hpp"
#include "mvdit/video/patchifier.hpp"

namespace mvdit::toydata {

using video::VideoClip;

inline constexpr int kGroups = 5;
enum class Group : int { Torso = 0, LeftArm = 1, RightArm = 2, LeftLeg = 3, RightLeg = 4 };

// Group of the bone ending at joint j (j >= 1).
inline int bone_group(int j) {
  using namespace joint;
  switch (j) {
    case kLeftHip: case kLeftKnee: case kLeftAnkle: case kLeftFoot: return static_cast<int>(Group::LeftLeg);
    case kRightHip: case kRightKnee: case kRightAnkle: case kRightFoot: return static_cast<int>(Group::RightLeg);
    case kLeftShoulder: case kLeftElbow: case kLeftWrist: case kLeftHand: return static_cast<int>(Group::LeftArm);
    case kRightShoulder: case kRightElbow: case kRightWrist: case kRightHand: return static_cast<int>(Group::RightArm);
    default: return static_cast<int>(Group::Torso);
  }
}

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr int kAttireColours = 8;
inline constexpr int kBackgrounds = 4;
inline constexpr std::array<Rgb, kAttireColours> kAttirePalette = {
    Rgb{245, 245, 245}, Rgb{220, 60, 220}, Rgb{40, 220, 220}, Rgb{255, 140, 0},
    Rgb{255, 150, 190}, Rgb{150, 90, 40},  Rgb{150, 150, 150}, Rgb{140, 60, 200}};
inline constexpr std::array<Rgb, kBackgrounds> kBackgroundPalette = {Rgb{10, 10, 10}, Rgb{10, 20, 60},
                                                                     Rgb{15, 50, 20}, Rgb{60, 15, 15}};
inline constexpr std::array<Rgb, 4> kLimbPalette = {Rgb{230, 60, 60}, Rgb{60, 200, 60}, Rgb{70, 110, 255},
                                                    Rgb{240, 220, 40}};

struct Style {
  int attire = 0;
  int background = 0;

  Rgb group_colour(int g) const { return g == 0 ? kAttirePalette.at(attire) : kLimbPalette.at(g - 1); }
  Rgb background_colour() const { return kBackgroundPalette.at(background); }
  bool operator==(const Style&) const = default;
};

inline Style style_for(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x571e));
  Style s;
  s.attire = static_cast<int>(rng.uniform_int(0, kAttireColours - 1));
  s.background = static_cast<int>(rng.uniform_int(0, kBackgrounds - 1));
  return s;
}

struct Vec2 {
  double x = 0, y = 0;
};

// World (x, y) to continuous pixel coordinates; pixel (i, j) covers [i, i+1).
inline Vec2 project_point(double x, double y, std::int64_t height, std::int64_t width) {
  return {(x + kWorldHalfWidth) / (2.0 * kWorldHalfWidth) * static_cast<double>(width),
          (kWorldHeight - y) / kWorldHeight * static_cast<double>(height)};
}

inline std::array<Vec2, kJoints> project_frame(const MotionFrame& f, std::int64_t height, std::int64_t width) {
  std::array<Vec2, kJoints> out;
  for (int j = 0; j < kJoints; ++j) out[j] = project_point(f.joints[j][0], f.joints[j][1], height, width);
  return out;
}

inline double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const double dx = b.x - a.x, dy = b.y - a.y, len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

inline double line_half_width(std::int64_t width) { return 0.75 * static_cast<double>(width) / 32.0; }

inline void validate_image(std::int64_t height, std::int64_t width, std::int64_t stride) {
  if (height < 8 || width < 8) throw ToyDataError("image must be at least 8x8");
  if (stride <= 0 || height % stride != 0 || width % stride != 0)
    throw ToyDataError("image size must be divisible by the patch stride");
}

// Draw order: torso, legs, then arms on top.
inline constexpr std::array<int, kGroups> kDrawOrder = {0, 3, 4, 1, 2};

inline VideoClip render_clip(const MotionClip& clip, const Style& style, std::int64_t height, std::int64_t width,
                             std::int64_t stride = 4) {
  validate_image(height, width, stride);
  if (clip.frames.empty()) throw ToyDataError("cannot render an empty clip");
  VideoClip out;
  out.frames = clip.frame_count();
  out.height = height;
  out.width = width;
  out.fps = clip.fps;
  out.rgb.resize(static_cast<std::size_t>(out.frames * height * width * 3));
  const double hw = line_half_width(width);
  const auto bg = style.background_colour();
  std::vector<double> canvas(static_cast<std::size_t>(height * width * 3));
  std::vector<double> cover(static_cast<std::size_t>(height * width));
  for (std::int64_t f = 0; f < out.frames; ++f) {
    const auto pts = project_frame(clip.frames[f], height, width);
    for (std::size_t i = 0; i < canvas.size(); ++i) canvas[i] = bg[i % 3];
    for (int g : kDrawOrder) {
      std::fill(cover.begin(), cover.end(), 0.0);
      for (int j = 1; j < kJoints; ++j) {
        if (bone_group(j) != g) continue;
        const Vec2 a = pts[kParents[j]], b = pts[j];
        const double reach = hw + 0.5;
        const auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::min(a.x, b.x) - reach)));
        const auto x1 = std::min<std::int64_t>(width - 1, static_cast<std::int64_t>(std::ceil(std::max(a.x, b.x) + reach)));
        const auto y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::min(a.y, b.y) - reach)));
        const auto y1 = std::min<std::int64_t>(height - 1, static_cast<std::int64_t>(std::ceil(std::max(a.y, b.y) + reach)));
        for (std::int64_t y = y0; y <= y1; ++y)
          for (std::int64_t x = x0; x <= x1; ++x) {
            const Vec2 p{static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5};
            auto& c = cover[static_cast<std::size_t>(y * width + x)];
            c = std::max(c, std::clamp(reach - segment_distance(p, a, b), 0.0, 1.0));
          }
      }
      const auto colour = style.group_colour(g);
      for (std::size_t i = 0; i < cover.size(); ++i) {
        if (cover[i] <= 0) continue;
        for (int c = 0; c < 3; ++c) canvas[i * 3 + c] += cover[i] * (colour[c] - canvas[i * 3 + c]);
      }
    }
    auto* dst = &out.rgb[static_cast<std::size_t>(f * height * width * 3)];
    for (std::size_t i = 0; i < canvas.size(); ++i)
      dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(canvas[i]), 0L, 255L));
  }
  return out;
}

using GroupPoints = std::array<std::optional<Vec2>, kGroups>;

// Length-weighted centre of each group's projected bones.
inline GroupPoints expected_centroids(const MotionFrame& frame, std::int64_t height, std::int64_t width) {
  const auto pts = project_frame(frame, height, width);
  std::array<double, kGroups> wsum{}, xs{}, ys{}, n{}, mx{}, my{};
  for (int j = 1; j < kJoints; ++j) {
    const int g = bone_group(j);
    const Vec2 a = pts[kParents[j]], b = pts[j];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    wsum[g] += len;
    xs[g] += len * 0.5 * (a.x + b.x);
    ys[g] += len * 0.5 * (a.y + b.y);
    n[g] += 1;
    mx[g] += 0.5 * (a.x + b.x);
    my[g] += 0.5 * (a.y + b.y);
  }
  GroupPoints out;
  for (int g = 0; g < kGroups; ++g)
    out[g] = wsum[g] > 1e-9 ? Vec2{xs[g] / wsum[g], ys[g] / wsum[g]} : Vec2{mx[g] / n[g], my[g] / n[g]};
  return out;
}

// Pixel centroid of each colour group in frame f. A pixel is attributed to
// the group whose background-to-colour line it lies closest to, weighted by
// its position along that line.
inline GroupPoints detect_centroids(const VideoClip& clip, std::int64_t f, const Style& style) {
  const auto bg = style.background_colour();
  std::array<Eigen::Vector3d, kGroups> dirs;
  for (int g = 0; g < kGroups; ++g) {
    const auto c = style.group_colour(g);
    dirs[g] = Eigen::Vector3d(c[0] - bg[0], c[1] - bg[1], c[2] - bg[2]);
  }
  std::array<double, kGroups> wsum{}, xs{}, ys{};
  for (std::int64_t y = 0; y < clip.height; ++y)
    for (std::int64_t x = 0; x < clip.width; ++x) {
      const Eigen::Vector3d p(clip.at(f, y, x, 0) - bg[0], clip.at(f, y, x, 1) - bg[1], clip.at(f, y, x, 2) - bg[2]);
      int best = -1;
      double best_res = 0, best_alpha = 0;
      for (int g = 0; g < kGroups; ++g) {
        const double alpha = std::clamp(p.dot(dirs[g]) / dirs[g].squaredNorm(), 0.0, 1.0);
        if (alpha < 0.15) continue;
        const double res = (p - alpha * dirs[g]).norm();
        if (best < 0 || res < best_res) best = g, best_res = res, best_alpha = alpha;
      }
      if (best < 0) continue;
      wsum[best] += best_alpha;
      xs[best] += best_alpha * (static_cast<double>(x) + 0.5);
      ys[best] += best_alpha * (static_cast<double>(y) + 0.5);
    }
  GroupPoints out;
  for (int g = 0; g < kGroups; ++g)
    if (wsum[g] > 0) out[g] = Vec2{xs[g] / wsum[g], ys[g] / wsum[g]};
  return out;
}

struct TrackingError {
  double mean_px = 0;
  double max_px = 0;
  std::int64_t missing = 0;  // groups not found, scored against the image centre
};

// Distance between the detected colour-group centroids of a video and the
// expected centroids of a motion clip, over all frames and groups.
inline TrackingError centroid_tracking_error(const VideoClip& video, const MotionClip& motion, const Style& style) {
  if (video.frames != motion.frame_count()) throw ToyDataError("video and motion frame counts differ");
  TrackingError e;
  const Vec2 centre{0.5 * static_cast<double>(video.width), 0.5 * static_cast<double>(video.height)};
  double total = 0;
  for (std::int64_t f = 0; f < video.frames; ++f) {
    const auto want = expected_centroids(motion.frames[f], video.height, video.width);
    const auto got = detect_centroids(video, f, style);
    for (int g = 0; g < kGroups; ++g) {
      Vec2 d = centre;
      if (got[g]) d = *got[g];
      else ++e.missing;
      const double err = std::hypot(d.x - want[g]->x, d.y - want[g]->y);
      total += err;
      e.max_px = std::max(e.max_px, err);
    }
  }
  e.mean_px = total / static_cast<double>(video.frames * kGroups);
  return e;
}

}  // namespace mvdit::toydata
