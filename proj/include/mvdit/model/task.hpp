// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mvdit {

enum class TaskMode { Joint = 0, MotionToVideo = 1, VideoToMotion = 2 };

inline constexpr int kTaskModes = 3;

inline const char* task_name(TaskMode m) {
  switch (m) {
    case TaskMode::Joint: return "joint";
    case TaskMode::MotionToVideo: return "m2v";
    case TaskMode::VideoToMotion: return "v2m";
  }
  return "?";
}

inline TaskMode parse_task(const std::string& s) {
  if (s == "joint") return TaskMode::Joint;
  if (s == "m2v") return TaskMode::MotionToVideo;
  if (s == "v2m") return TaskMode::VideoToMotion;
  throw std::invalid_argument("unknown task mode '" + s + "' (expected joint, m2v or v2m)");
}

inline bool generates_video(TaskMode m) { return m != TaskMode::VideoToMotion; }
inline bool generates_motion(TaskMode m) { return m != TaskMode::MotionToVideo; }

}  // namespace mvdit
