// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Procedural motions on a fixed 24-joint skeleton (y up, +x is the subject's
// left). Each clip is a deterministic function of (kind, seed): the seed picks
// the body shape, tempo, side, phase and the image quadrant the root is
// anchored in.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <numbers>
#include <string_view>

#include "mvdit/motion/rot6d.hpp"
#include "mvdit/numerics/rng.hpp"

namespace mvdit::toydata {

using motion::kJoints;
using motion::MotionClip;
using motion::MotionFrame;

class ToyDataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::array<int, kJoints> kParents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                                                      9,  9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};

namespace joint {
inline constexpr int kPelvis = 0, kLeftHip = 1, kRightHip = 2, kSpine1 = 3, kLeftKnee = 4, kRightKnee = 5;
inline constexpr int kSpine2 = 6, kLeftAnkle = 7, kRightAnkle = 8, kSpine3 = 9, kLeftFoot = 10, kRightFoot = 11;
inline constexpr int kNeck = 12, kLeftCollar = 13, kRightCollar = 14, kHead = 15, kLeftShoulder = 16;
inline constexpr int kRightShoulder = 17, kLeftElbow = 18, kRightElbow = 19, kLeftWrist = 20, kRightWrist = 21;
inline constexpr int kLeftHand = 22, kRightHand = 23;
}  // namespace joint

// Bone offsets from the parent joint in the rest (T) pose, metres.
inline const std::array<Eigen::Vector3d, kJoints>& rest_offsets() {
  static const std::array<Eigen::Vector3d, kJoints> offsets = {
      Eigen::Vector3d(0, 0, 0),        Eigen::Vector3d(0.09, -0.08, 0),  Eigen::Vector3d(-0.09, -0.08, 0),
      Eigen::Vector3d(0, 0.11, 0),     Eigen::Vector3d(0, -0.40, 0),     Eigen::Vector3d(0, -0.40, 0),
      Eigen::Vector3d(0, 0.13, 0),     Eigen::Vector3d(0, -0.40, 0),     Eigen::Vector3d(0, -0.40, 0),
      Eigen::Vector3d(0, 0.06, 0),     Eigen::Vector3d(0, -0.05, 0.12),  Eigen::Vector3d(0, -0.05, 0.12),
      Eigen::Vector3d(0, 0.21, 0),     Eigen::Vector3d(0.07, 0.12, 0),   Eigen::Vector3d(-0.07, 0.12, 0),
      Eigen::Vector3d(0, 0.22, 0),     Eigen::Vector3d(0.10, 0, 0),      Eigen::Vector3d(-0.10, 0, 0),
      Eigen::Vector3d(0.26, 0, 0),     Eigen::Vector3d(-0.26, 0, 0),     Eigen::Vector3d(0.25, 0, 0),
      Eigen::Vector3d(-0.25, 0, 0),    Eigen::Vector3d(0.08, 0, 0),      Eigen::Vector3d(-0.08, 0, 0)};
  return offsets;
}

inline bool is_leg_joint(int j) { return j == 1 || j == 2 || j == 4 || j == 5 || j == 7 || j == 8 || j == 10 || j == 11; }
inline bool is_arm_joint(int j) { return j >= joint::kLeftShoulder; }

enum class MotionKind : std::uint8_t { Wave = 0, Walk = 1, Squat = 2, Spin = 3, Jump = 4, Idle = 5 };
inline constexpr int kMotionKinds = 6;
inline constexpr std::array<MotionKind, kMotionKinds> kAllKinds = {MotionKind::Wave, MotionKind::Walk,
                                                                   MotionKind::Squat, MotionKind::Spin,
                                                                   MotionKind::Jump, MotionKind::Idle};

inline std::string_view kind_name(MotionKind k) {
  static constexpr std::array<std::string_view, kMotionKinds> names = {"wave", "walk", "squat", "spin", "jump", "idle"};
  return names.at(static_cast<std::size_t>(k));
}

inline MotionKind kind_from_index(std::int64_t i) {
  if (i < 0 || i >= kMotionKinds) throw ToyDataError("unknown motion kind " + std::to_string(i));
  return static_cast<MotionKind>(i);
}

// World window rendered to the image: x in [-2, 2], y in [0, 4].
inline constexpr double kWorldHalfWidth = 2.0;
inline constexpr double kWorldHeight = 4.0;
inline constexpr double kPelvisHeight = 1.1;
inline constexpr double kUpperLift = 1.6;

// Everything about a clip that is drawn from its seed.
struct ClipParams {
  std::array<float, motion::kShapeDims> beta{};
  int quadrant = 0;    // bit 0: right half, bit 1: upper half
  bool quick = false;  // tempo
  int side = 1;        // +1 left / -1 right (hand, walking or turning direction)
  double freq = 1.0;   // Hz
  double phase = 0.0;
  double amplitude = 0.0;

  Eigen::Vector3d anchor() const {
    return {(quadrant & 1) ? 1.0 : -1.0, kPelvisHeight + ((quadrant & 2) ? kUpperLift : 0.0), 0.0};
  }
};

inline ClipParams clip_params(MotionKind kind, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x6b1d, static_cast<std::uint64_t>(kind)));
  ClipParams p;
  for (auto& b : p.beta) b = static_cast<float>(std::clamp(rng.normal(), -2.0, 2.0));
  p.quadrant = static_cast<int>(rng.uniform_int(0, 3));
  p.quick = rng.bernoulli(0.5);
  p.side = rng.bernoulli(0.5) ? 1 : -1;
  p.freq = p.quick ? rng.uniform(1.4, 1.9) : rng.uniform(0.7, 1.0);
  p.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  p.amplitude = rng.uniform(0.0, 1.0);
  return p;
}

struct Pose {
  Eigen::Matrix3d orient = Eigen::Matrix3d::Identity();
  Eigen::Vector3d root = Eigen::Vector3d::Zero();
  std::array<Eigen::Matrix3d, kJoints> local;
  Pose() { local.fill(Eigen::Matrix3d::Identity()); }
};

inline Eigen::Matrix3d rot_x(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()).toRotationMatrix(); }
inline Eigen::Matrix3d rot_y(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix(); }
inline Eigen::Matrix3d rot_z(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix(); }

// Bone offsets scaled by the shape vector: overall size, arm and leg length.
inline std::array<Eigen::Vector3d, kJoints> shaped_offsets(const std::array<float, motion::kShapeDims>& beta) {
  auto out = rest_offsets();
  const double size = 1.0 + 0.04 * beta[0], arm = 1.0 + 0.03 * beta[1], leg = 1.0 + 0.03 * beta[2];
  for (int j = 1; j < kJoints; ++j) {
    double s = size;
    if (is_arm_joint(j)) s *= arm;
    if (is_leg_joint(j) && j > joint::kRightHip) s *= leg;
    out[j] *= s;
  }
  return out;
}

inline std::array<Eigen::Vector3d, kJoints> forward_kinematics(const Pose& pose,
                                                               const std::array<Eigen::Vector3d, kJoints>& offsets) {
  std::array<Eigen::Matrix3d, kJoints> global;
  std::array<Eigen::Vector3d, kJoints> pos;
  global[0] = pose.orient * pose.local[0];
  pos[0] = pose.root;
  for (int j = 1; j < kJoints; ++j) {
    const int p = kParents[j];
    pos[j] = pos[p] + global[p] * offsets[j];
    global[j] = global[p] * pose.local[j];
  }
  return pos;
}

inline MotionFrame to_frame(const Pose& pose, const std::array<Eigen::Vector3d, kJoints>& offsets,
                            const std::array<float, motion::kShapeDims>& beta) {
  MotionFrame f;
  f.beta = beta;
  for (int j = 0; j < kJoints; ++j) f.theta[j] = motion::matrix_to_rot6f(pose.local[j]);
  f.gamma = motion::matrix_to_rot6f(pose.orient);
  const auto pos = forward_kinematics(pose, offsets);
  for (int c = 0; c < 3; ++c) f.root[c] = static_cast<float>(pose.root[c]);
  for (int j = 0; j < kJoints; ++j)
    for (int c = 0; c < 3; ++c) f.joints[j][c] = static_cast<float>(pos[j][c]);
  return f;
}

inline constexpr double kArmDown = 75.0 * std::numbers::pi / 180.0;

inline void arms_down(Pose& pose) {
  pose.local[joint::kLeftShoulder] = rot_z(-kArmDown);
  pose.local[joint::kRightShoulder] = rot_z(kArmDown);
}

// Pose at time tau (seconds) within a clip of the given duration.
inline Pose pose_at(MotionKind kind, const ClipParams& p, const std::array<Eigen::Vector3d, kJoints>& offsets,
                    double tau, double duration) {
  using namespace joint;
  constexpr double pi = std::numbers::pi;
  Pose pose;
  pose.root = p.anchor();
  const double w = 2.0 * pi * p.freq, ph = w * tau + p.phase;
  const double rise = 0.5 * (1.0 - std::cos(ph));  // smooth 0..1
  arms_down(pose);
  switch (kind) {
    case MotionKind::Idle:
      break;
    case MotionKind::Wave: {
      const int shoulder = p.side > 0 ? kLeftShoulder : kRightShoulder;
      const int elbow = p.side > 0 ? kLeftElbow : kRightElbow;
      const double s = static_cast<double>(p.side);
      pose.local[shoulder] = rot_z(s * ((100.0 + 20.0 * std::sin(ph)) * pi / 180.0));
      pose.local[elbow] = rot_z(s * (0.35 + (0.5 + 0.4 * p.amplitude) * rise));
      break;
    }
    case MotionKind::Walk: {
      const double speed = 0.3 + 0.15 * p.amplitude;
      pose.root.x() += p.side * speed * (tau - 0.5 * duration);
      pose.root.y() += 0.02 * 0.5 * (1.0 - std::cos(2.0 * ph));
      const double swing = (0.35 + 0.15 * p.amplitude) * std::sin(ph);
      pose.local[kLeftHip] = rot_z(swing);
      pose.local[kRightHip] = rot_z(-swing);
      pose.local[kLeftKnee] = rot_z(-0.4 * rise);
      pose.local[kRightKnee] = rot_z(0.4 * (1.0 - rise));
      pose.local[kLeftShoulder] = rot_z(-kArmDown - 0.5 * swing);
      pose.local[kRightShoulder] = rot_z(kArmDown - 0.5 * swing);
      break;
    }
    case MotionKind::Squat: {
      const double a = (0.6 + 0.5 * p.amplitude) * rise;
      pose.local[kLeftHip] = pose.local[kRightHip] = rot_x(-a);
      pose.local[kLeftKnee] = pose.local[kRightKnee] = rot_x(2.0 * a);
      pose.local[kLeftAnkle] = pose.local[kRightAnkle] = rot_x(-a);
      const double thigh = offsets[kLeftKnee].norm(), shin = offsets[kLeftAnkle].norm();
      pose.root.y() -= (thigh + shin) * (1.0 - std::cos(a));
      pose.local[kLeftShoulder] = rot_x(-1.2 * a) * rot_z(-kArmDown);
      pose.local[kRightShoulder] = rot_x(-1.2 * a) * rot_z(kArmDown);
      break;
    }
    case MotionKind::Spin: {
      // Turn about the vertical axis, bounded so no limb group is hidden
      // behind another in the frontal view.
      const double reach = p.quick ? 0.7 : 0.5;
      pose.orient = rot_y(p.side * reach * std::sin(2.0 * pi * tau / std::max(duration, 1e-9) + p.phase));
      pose.local[kLeftShoulder] = rot_z(-0.3);
      pose.local[kRightShoulder] = rot_z(0.3);
      break;
    }
    case MotionKind::Jump: {
      const double height = 0.15 + 0.15 * p.amplitude;
      pose.root.y() += height * rise;
      pose.local[kLeftShoulder] = rot_z(-kArmDown + 2.0 * rise);
      pose.local[kRightShoulder] = rot_z(kArmDown - 2.0 * rise);
      pose.local[kLeftKnee] = pose.local[kRightKnee] = rot_x(0.5 * (1.0 - rise));
      break;
    }
  }
  return pose;
}

inline void validate_frames(std::int64_t frames) {
  if (frames < 1 || frames % 4 != 1) throw ToyDataError("frame count must be 1 mod 4, got " + std::to_string(frames));
}

inline MotionClip gen_motion_clip(MotionKind kind, std::uint64_t seed, std::int64_t frames, int fps = 16) {
  validate_frames(frames);
  if (fps <= 0) throw ToyDataError("fps must be positive");
  const auto params = clip_params(kind, seed);
  const auto offsets = shaped_offsets(params.beta);
  const double duration = static_cast<double>(frames - 1) / fps;
  MotionClip clip;
  clip.fps = fps;
  clip.frames.reserve(static_cast<std::size_t>(frames));
  for (std::int64_t f = 0; f < frames; ++f)
    clip.frames.push_back(to_frame(pose_at(kind, params, offsets, static_cast<double>(f) / fps, duration), offsets,
                                   params.beta));
  return clip;
}

}  // namespace mvdit::toydata
