// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// SMPL-style per-frame motion parameters.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mvdit::motion {

inline constexpr int kJoints = 24;
inline constexpr int kShapeDims = 10;
inline constexpr int kRot6 = 6;

// Token layout of one frame: 25 position tokens {v, eta_1..eta_24}, then 25
// rotation tokens {gamma, theta_1..theta_24}, then the shape token beta.
inline constexpr int kPositionTokens = 1 + kJoints;
inline constexpr int kRotationTokens = 1 + kJoints;
inline constexpr int kShapeTokens = 1;
inline constexpr int kTokensPerFrame = kPositionTokens + kRotationTokens + kShapeTokens;
static_assert(kTokensPerFrame == 51);

// Flat per-frame parameter vector, in the fixed beta/theta/gamma/v/eta order.
inline constexpr int kBetaOffset = 0;
inline constexpr int kThetaOffset = kBetaOffset + kShapeDims;
inline constexpr int kGammaOffset = kThetaOffset + kJoints * kRot6;
inline constexpr int kRootOffset = kGammaOffset + kRot6;
inline constexpr int kJointPosOffset = kRootOffset + 3;
inline constexpr int kFrameParams = kJointPosOffset + kJoints * 3;
static_assert(kFrameParams == 235);

using Vec3 = std::array<float, 3>;
using Rot6 = std::array<float, kRot6>;

struct MotionFrame {
  std::array<float, kShapeDims> beta{};
  std::array<Rot6, kJoints> theta{};
  Rot6 gamma{};
  Vec3 root{};
  std::array<Vec3, kJoints> joints{};

  bool operator==(const MotionFrame&) const = default;
};

struct MotionClip {
  std::vector<MotionFrame> frames;
  int fps = 16;

  std::int64_t frame_count() const { return static_cast<std::int64_t>(frames.size()); }
  bool operator==(const MotionClip&) const = default;
};

class MotionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::array<float, kFrameParams> flatten(const MotionFrame& f) {
  std::array<float, kFrameParams> out{};
  auto* p = out.data();
  for (float v : f.beta) *p++ = v;
  for (const auto& r : f.theta)
    for (float v : r) *p++ = v;
  for (float v : f.gamma) *p++ = v;
  for (float v : f.root) *p++ = v;
  for (const auto& j : f.joints)
    for (float v : j) *p++ = v;
  return out;
}

inline MotionFrame unflatten(const float* p) {
  MotionFrame f;
  for (auto& v : f.beta) v = *p++;
  for (auto& r : f.theta)
    for (auto& v : r) v = *p++;
  for (auto& v : f.gamma) v = *p++;
  for (auto& v : f.root) v = *p++;
  for (auto& j : f.joints)
    for (auto& v : j) v = *p++;
  return f;
}

// [F * 235] row-major parameter array.
template <class Out = std::vector<float>>
Out clip_to_array(const MotionClip& clip) {
  Out out;
  out.reserve(clip.frames.size() * kFrameParams);
  for (const auto& f : clip.frames) {
    auto flat = flatten(f);
    out.insert(out.end(), flat.begin(), flat.end());
  }
  return out;
}

template <class In>
MotionClip array_to_clip(const In& values, int fps) {
  if (values.size() % kFrameParams != 0) throw MotionError("motion array length is not a multiple of 235");
  MotionClip clip;
  clip.fps = fps;
  for (std::size_t off = 0; off < values.size(); off += kFrameParams) {
    std::array<float, kFrameParams> buf;
    for (int i = 0; i < kFrameParams; ++i) buf[i] = static_cast<float>(values[off + i]);
    clip.frames.push_back(unflatten(buf.data()));
  }
  return clip;
}

// Checks the clip invariants: F >= 1, fps > 0, all finite, root joint equal to
// the root position.
inline void validate(const MotionClip& clip, float root_tolerance = 1e-5f) {
  if (clip.frames.empty()) throw MotionError("motion clip has no frames");
  if (clip.fps <= 0) throw MotionError("motion clip fps must be positive");
  for (const auto& f : clip.frames) {
    for (float v : flatten(f))
      if (!std::isfinite(v)) throw MotionError("motion clip contains non-finite values");
    for (int a = 0; a < 3; ++a) {
      if (std::abs(f.joints[0][a] - f.root[a]) > root_tolerance)
        throw MotionError("root joint does not coincide with root position");
    }
  }
}

// Parameter groups of one frame, one row per token.
struct FrameGroups {
  std::array<Vec3, kPositionTokens> positions{};
  std::array<Rot6, kRotationTokens> rotations{};
  std::array<float, kShapeDims> shape{};

  bool operator==(const FrameGroups&) const = default;
};

inline FrameGroups group_frame(const MotionFrame& f) {
  FrameGroups g;
  g.positions[0] = f.root;
  for (int j = 0; j < kJoints; ++j) g.positions[1 + j] = f.joints[j];
  g.rotations[0] = f.gamma;
  for (int j = 0; j < kJoints; ++j) g.rotations[1 + j] = f.theta[j];
  g.shape = f.beta;
  return g;
}

inline MotionFrame ungroup_frame(const FrameGroups& g) {
  MotionFrame f;
  f.root = g.positions[0];
  for (int j = 0; j < kJoints; ++j) f.joints[j] = g.positions[1 + j];
  f.gamma = g.rotations[0];
  for (int j = 0; j < kJoints; ++j) f.theta[j] = g.rotations[1 + j];
  f.beta = g.shape;
  return f;
}

// Offset into the flat frame vector of the first channel of each token slot.
inline int position_token_offset(int slot) { return slot == 0 ? kRootOffset : kJointPosOffset + 3 * (slot - 1); }
inline int rotation_token_offset(int slot) { return slot == 0 ? kGammaOffset : kThetaOffset + kRot6 * (slot - 1); }

}  // namespace mvdit::motion
