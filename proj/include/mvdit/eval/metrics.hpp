// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pose error (root-aligned and similarity-aligned), temporal alignment of
// video-to-motion attention, and a jerk-based smoothness measure.

#pragma once

#include <Eigen/Geometry>

#include <fstream>
#include <map>
#include <ostream>
#include <string>

#include "mvdit/model/dual_dit.hpp"
#include "mvdit/motion/motion_types.hpp"

namespace mvdit::eval {

using motion::kJoints;
using motion::MotionClip;

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_comparable(const MotionClip& pred, const MotionClip& gt) {
  if (pred.frame_count() != gt.frame_count()) throw EvalError("predicted and reference clips differ in frame count");
  if (gt.frames.empty()) throw EvalError("cannot score an empty clip");
}

inline Eigen::Matrix<double, 3, kJoints> joint_matrix(const motion::MotionFrame& f) {
  Eigen::Matrix<double, 3, kJoints> m;
  for (int j = 0; j < kJoints; ++j)
    for (int c = 0; c < 3; ++c) m(c, j) = f.joints[j][c];
  return m;
}

// Mean per-joint position error in millimetres after subtracting the root
// joint in every frame.
inline double mpjpe(const MotionClip& pred, const MotionClip& gt) {
  require_comparable(pred, gt);
  double total = 0;
  for (std::size_t f = 0; f < gt.frames.size(); ++f) {
    auto p = joint_matrix(pred.frames[f]);
    auto g = joint_matrix(gt.frames[f]);
    p.colwise() -= p.col(0).eval();
    g.colwise() -= g.col(0).eval();
    total += (p - g).colwise().norm().sum();
  }
  return 1000.0 * total / static_cast<double>(gt.frames.size() * kJoints);
}

// As mpjpe, after the per-frame similarity transform (rotation, scale,
// translation) that best maps the prediction onto the reference.
inline double pa_mpjpe(const MotionClip& pred, const MotionClip& gt) {
  require_comparable(pred, gt);
  double total = 0;
  for (std::size_t f = 0; f < gt.frames.size(); ++f) {
    const auto p = joint_matrix(pred.frames[f]);
    const auto g = joint_matrix(gt.frames[f]);
    Eigen::Matrix<double, 3, kJoints> aligned;
    const Eigen::Vector3d pc = p.rowwise().mean();
    if ((p.colwise() - pc).squaredNorm() < 1e-18) {
      aligned = p.colwise() + (g.rowwise().mean() - pc);
    } else {
      const Eigen::Matrix4d t = Eigen::umeyama(p, g, true);
      aligned = (t.topLeftCorner<3, 3>() * p).colwise() + t.topRightCorner<3, 1>();
    }
    total += (aligned - g).colwise().norm().sum();
  }
  return 1000.0 * total / static_cast<double>(gt.frames.size() * kJoints);
}

struct JerkSummary {
  double mean = 0;  // m/s^3
  double max = 0;
};

// Third finite difference of every joint trajectory, scaled by fps^3.
inline JerkSummary jerk(const MotionClip& clip) {
  if (clip.frame_count() < 4) throw EvalError("jerk needs at least 4 frames");
  const double fps3 = std::pow(static_cast<double>(clip.fps), 3.0);
  JerkSummary s;
  std::int64_t n = 0;
  for (std::size_t f = 3; f < clip.frames.size(); ++f) {
    const Eigen::Matrix<double, 3, kJoints> d = joint_matrix(clip.frames[f]) - 3.0 * joint_matrix(clip.frames[f - 1]) +
                   3.0 * joint_matrix(clip.frames[f - 2]) - joint_matrix(clip.frames[f - 3]);
    for (int j = 0; j < kJoints; ++j) {
      const double v = d.col(j).norm() * fps3;
      s.mean += v;
      s.max = std::max(s.max, v);
      ++n;
    }
  }
  s.mean /= static_cast<double>(n);
  return s;
}

struct LayerAlignment {
  std::int64_t block = 0;
  double mean_offset = 0;    // latent frames
  double diagonal_mass = 0;  // fraction of mass with offset <= 1
};

struct AttnAlignmentReport {
  double mean_offset = 0;
  double diagonal_mass = 0;
  std::vector<LayerAlignment> layers;
};

// Time coordinate of each token in latent-frame units: video tokens carry
// their latent frame, motion tokens frame / 4.
struct TokenTimes {
  std::vector<double> video;
  std::vector<double> motion;
};

inline TokenTimes token_times(const model::LatentGeometry& grid, std::int64_t frames) {
  TokenTimes t;
  for (std::int64_t k = 0; k < grid.t; ++k)
    for (std::int64_t i = 0; i < grid.h * grid.w; ++i) t.video.push_back(static_cast<double>(k));
  for (std::int64_t f = 0; f < frames; ++f)
    for (int i = 0; i < motion::kTokensPerFrame; ++i) t.motion.push_back(static_cast<double>(f) / 4.0);
  return t;
}

// Expected |t_video - t_motion| when every video query's attention is
// restricted to motion keys and renormalized; averaged over queries and heads.
template <class T>
AttnAlignmentReport attn_diagonal_score(const std::vector<model::AttentionCapture<T>>& captures, const TokenTimes& times) {
  AttnAlignmentReport r;
  for (const auto& cap : captures) {
    if (cap.motion_tokens == 0 || cap.video_tokens == 0) throw EvalError("attention map has no video-to-motion block");
    if (static_cast<std::size_t>(cap.video_tokens) != times.video.size() ||
        static_cast<std::size_t>(cap.motion_tokens) != times.motion.size())
      throw EvalError("token times do not match the attention map");
    const auto& p = cap.probs;
    if (p.keys != cap.video_tokens + cap.motion_tokens) throw EvalError("attention map key count mismatch");
    double offset = 0, mass = 0;
    for (std::int64_t h = 0; h < p.heads; ++h)
      for (std::int64_t q = 0; q < cap.video_tokens; ++q) {
        double z = 0, o = 0, m = 0;
        for (std::int64_t k = 0; k < cap.motion_tokens; ++k) {
          const double w = static_cast<double>(p.at(h, q, cap.video_tokens + k));
          const double d = std::abs(times.video[q] - times.motion[k]);
          z += w;
          o += w * d;
          if (d <= 1.0) m += w;
        }
        if (z > 0) {
          offset += o / z;
          mass += m / z;
        }
      }
    const double n = static_cast<double>(p.heads * cap.video_tokens);
    r.layers.push_back({cap.block, offset / n, mass / n});
  }
  if (r.layers.empty()) throw EvalError("no attention maps captured");
  for (const auto& l : r.layers) {
    r.mean_offset += l.mean_offset;
    r.diagonal_mass += l.diagonal_mass;
  }
  r.mean_offset /= static_cast<double>(r.layers.size());
  r.diagonal_mass /= static_cast<double>(r.layers.size());
  return r;
}

// Average of per-probe reports, layer by layer.
inline AttnAlignmentReport average_reports(const std::vector<AttnAlignmentReport>& reports) {
  if (reports.empty()) throw EvalError("no reports to average");
  AttnAlignmentReport out = reports.front();
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].layers.size() != out.layers.size()) throw EvalError("reports cover different layers");
    out.mean_offset += reports[i].mean_offset;
    out.diagonal_mass += reports[i].diagonal_mass;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
      out.layers[l].mean_offset += reports[i].layers[l].mean_offset;
      out.layers[l].diagonal_mass += reports[i].layers[l].diagonal_mass;
    }
  }
  const double n = static_cast<double>(reports.size());
  out.mean_offset /= n;
  out.diagonal_mass /= n;
  for (auto& l : out.layers) {
    l.mean_offset /= n;
    l.diagonal_mass /= n;
  }
  return out;
}

// Flat key=value lines, keys sorted.
using Metrics = std::map<std::string, double>;

inline void write_key_values(std::ostream& os, const Metrics& m) {
  const auto flags = os.flags();
  const auto prec = os.precision(10);
  for (const auto& [k, v] : m) os << k << '=' << v << '\n';
  os.precision(prec);
  os.flags(flags);
}

inline Metrics alignment_metrics(const AttnAlignmentReport& r, const std::string& prefix = "attn") {
  Metrics m{{prefix + ".mean_offset", r.mean_offset}, {prefix + ".diagonal_mass", r.diagonal_mass}};
  for (const auto& l : r.layers) {
    m[prefix + ".block" + std::to_string(l.block) + ".mean_offset"] = l.mean_offset;
    m[prefix + ".block" + std::to_string(l.block) + ".diagonal_mass"] = l.diagonal_mass;
  }
  return m;
}

// Appends a row, writing the header first when the file is new or empty.
inline void append_csv(const std::string& path, const std::vector<std::string>& header,
                       const std::vector<std::string>& row) {
  if (header.size() != row.size()) throw EvalError("CSV row width does not match the header");
  bool fresh = true;
  {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    fresh = !in || in.tellg() == 0;
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  if (fresh) line(header);
  line(row);
}

}  // namespace mvdit::eval
