// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dual-stream diffusion transformer over video patch tokens and motion
// tokens. Each dual block runs one self-attention over the concatenated
// sequence with per-stream projections, then per-stream text cross-attention
// and per-stream feed-forward layers. Self-attention and feed-forward
// sub-layers are modulated and gated by adaLN from the timestep embedding.

#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvdit/model/params.hpp"
#include "mvdit/model/task.hpp"
#include "mvdit/motion/motion_codec.hpp"
#include "mvdit/numerics/attention.hpp"
#include "mvdit/rope/mvs_rope.hpp"
#include "mvdit/video/patchifier.hpp"

namespace mvdit::model {

using rope::RopeConfig;
using video::LatentGeometry;

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
  std::int64_t dim = 64;
  std::int64_t heads = 4;
  std::int64_t layers = 4;
  std::int64_t dual_layers = 4;  // the last dual_layers blocks are dual; the rest are video-only
  std::int64_t mlp_ratio = 4;
  std::int64_t text_vocab = 64;
  std::int64_t text_len = 16;
  std::int64_t stride = 4;
  double rope_theta = 10000.0;
  bool collision_mode = false;
  double motion_time_scale = 0.25;
  bool share_modality_weights = false;
  // The video head predicts the clean patches x1 and reports the velocity
  // (x1_hat - x_t) / (1 - t). Patches are wider than dim, so a direct
  // velocity head cannot carry the noise it has to cancel.
  bool video_clean_prediction = true;

  std::int64_t head_dim() const { return heads > 0 ? dim / heads : 0; }

  RopeConfig rope() const {
    return RopeConfig{.head_dim = head_dim(), .theta = rope_theta, .collision_mode = collision_mode,
                      .motion_time_scale = motion_time_scale};
  }

  void validate() const {
    if (dim <= 0 || heads <= 0 || dim % heads != 0) throw ModelError("dim must be a positive multiple of heads");
    if (head_dim() % 4 != 0) throw ModelError("head_dim must be divisible by 4");
    if (layers <= 0 || dual_layers < 0 || dual_layers > layers) throw ModelError("need 0 <= dual_layers <= layers");
    if (mlp_ratio <= 0 || text_vocab <= 0 || text_len <= 0 || stride <= 0)
      throw ModelError("mlp_ratio, text_vocab, text_len and stride must be positive");
    try {
      rope().validate();
    } catch (const rope::RopeError& e) {
      throw ModelError(e.what());
    }
  }
  bool operator==(const ModelConfig&) const = default;
};

// Lower bound on 1 - t when turning a clean prediction into a velocity.
inline constexpr double kMinVelocityGap = 0.05;

// Sinusoidal embedding of t * 1000 (cos half, then sin half).
template <class T>
Tensor<T> timestep_features(double t, std::int64_t dim) {
  const auto half = dim / 2;
  Buffer<T> out(static_cast<std::size_t>(dim), T(0));
  for (std::int64_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out[i] = static_cast<T>(std::cos(t * 1000.0 * freq));
    out[half + i] = static_cast<T>(std::sin(t * 1000.0 * freq));
  }
  return Tensor<T>::from({1, dim}, std::move(out));
}

// Projections of one modality stream inside a block.
template <class T>
struct StreamWeights {
  Linear<T> ada;  // silu(c) -> 6 * dim
  Linear<T> q, k, v, attn_out;
  Linear<T> cross_q, cross_k, cross_v, cross_out;
  Mlp<T> ffn;

  static StreamWeights make(ParameterSet<T>& ps, const std::string& name, const ModelConfig& cfg, Branch b) {
    const auto d = cfg.dim;
    StreamWeights w;
    w.ada = Linear<T>::make_zero(ps, name + ".ada", d, 6 * d, b);
    w.q = Linear<T>::make(ps, name + ".q", d, d, b);
    w.k = Linear<T>::make(ps, name + ".k", d, d, b);
    w.v = Linear<T>::make(ps, name + ".v", d, d, b);
    w.attn_out = Linear<T>::make(ps, name + ".attn_out", d, d, b);
    w.cross_q = Linear<T>::make(ps, name + ".cross_q", d, d, b);
    w.cross_k = Linear<T>::make(ps, name + ".cross_k", d, d, b);
    w.cross_v = Linear<T>::make(ps, name + ".cross_v", d, d, b);
    w.cross_out = Linear<T>::make(ps, name + ".cross_out", d, d, b);
    w.ffn = Mlp<T>::make(ps, name + ".ffn", d, cfg.mlp_ratio * d, d, b);
    return w;
  }
};

template <class T>
struct Block {
  StreamWeights<T> video;
  std::optional<StreamWeights<T>> motion;  // absent for video-only blocks

  bool dual() const { return motion.has_value(); }
};

template <class T>
struct Modulation {
  Tensor<T> shift1, scale1, gate1, shift2, scale2, gate2;
};

template <class T>
Modulation<T> modulation(const Linear<T>& ada, const Tensor<T>& silu_c, std::int64_t dim) {
  auto m = reshape(ada(silu_c), {6, dim});
  return {slice_rows(m, 0, 1), slice_rows(m, 1, 2), slice_rows(m, 2, 3),
          slice_rows(m, 3, 4), slice_rows(m, 4, 5), slice_rows(m, 5, 6)};
}

// Attention probabilities of one block's self-attention over the unified
// sequence (video rows first, then motion rows).
template <class T>
struct AttentionCapture {
  std::int64_t block = 0;
  std::int64_t video_tokens = 0;
  std::int64_t motion_tokens = 0;
  AttentionProbs<T> probs;
};

template <class T>
struct ForwardInputs {
  std::optional<Tensor<T>> video;   // [N_v, patch_dim] in flow space
  std::optional<Tensor<T>> motion;  // [F, 235] normalized
  LatentGeometry grid;              // always needed: motion positions sit past the grid
  std::optional<std::vector<std::int64_t>> text;  // text_len ids, or nullopt for the null text
  double t = 0.0;
  std::optional<TaskMode> task;  // nullopt: no task hint (motion-only pretraining)
};

template <class T>
struct ForwardOutputs {
  std::optional<Tensor<T>> video;
  std::optional<Tensor<T>> motion;
};

// Rotary tables for the sequences one forward pass needs, built on demand.
template <class T>
class RopeTables {
 public:
  RopeTables(const RopeConfig& cfg, const LatentGeometry& grid, std::int64_t motion_frames)
      : cfg_(cfg), grid_(grid), frames_(motion_frames) {}

  std::shared_ptr<const RotaryTable<T>> get(bool video, bool motion) const {
    auto& slot = tables_[(video ? 1 : 0) + (motion ? 2 : 0)];
    if (!slot) {
      std::vector<rope::PositionIndex> pos;
      if (video) pos = rope::video_positions(grid_.t, grid_.h, grid_.w);
      if (motion) {
        auto m = rope::motion_positions(frames_, grid_.h, grid_.w);
        pos.insert(pos.end(), m.begin(), m.end());
      }
      slot = rope::build_rotary_table<T>(pos, grid_.h, grid_.w, cfg_);
    }
    return slot;
  }

 private:
  RopeConfig cfg_;
  LatentGeometry grid_;
  std::int64_t frames_;
  mutable std::array<std::shared_ptr<const RotaryTable<T>>, 4> tables_;
};

template <class T>
class DualDiT {
 public:
  explicit DualDiT(const ModelConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg), params_(seed) {
    cfg_.validate();
    const auto d = cfg_.dim;
    auto& ps = params_;
    time_fc1_ = Linear<T>::make(ps, "time.fc1", d, d, Branch::Shared);
    time_fc2_ = Linear<T>::make(ps, "time.fc2", d, d, Branch::Shared);
    text_table_ = ps.normal("text.table", {cfg_.text_vocab, d}, 1.0, Branch::Shared);
    text_pos_ = ps.normal("text.pos", {cfg_.text_len, d}, 0.02, Branch::Shared);
    null_text_ = ps.normal("text.null", {cfg_.text_len, d}, 1.0, Branch::Shared);
    task_table_ = ps.normal("task.table", {kTaskModes, d}, 1.0, Branch::Shared);
    task_mlp_ = Mlp<T>::make(ps, "task.mlp", d, d, d, Branch::Shared);
    patch_in_ = Linear<T>::make(ps, "video.patch_in", video::patch_dim(cfg_.stride), d, Branch::Video);
    motion_proj_ = motion::MotionProjectors<T>::make(ps, d, "motion");
    for (std::int64_t i = 0; i < cfg_.layers; ++i) {
      const auto name = "blocks." + std::to_string(i);
      Block<T> b;
      b.video = StreamWeights<T>::make(ps, name + ".video", cfg_, Branch::Video);
      if (i >= cfg_.layers - cfg_.dual_layers) {
        b.motion = cfg_.share_modality_weights ? b.video
                                               : StreamWeights<T>::make(ps, name + ".motion", cfg_, Branch::Motion);
      }
      blocks_.push_back(std::move(b));
    }
    video_final_ada_ = Linear<T>::make_zero(ps, "video.final_ada", d, 2 * d, Branch::Video);
    video_final_ = Linear<T>::make_zero(ps, "video.final", d, video::patch_dim(cfg_.stride), Branch::Video);
    motion_final_ada_ = Linear<T>::make_zero(ps, "motion.final_ada", d, 2 * d, Branch::Motion);
  }

  DualDiT(const DualDiT&) = delete;
  DualDiT& operator=(const DualDiT&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  const std::vector<Block<T>>& blocks() const { return blocks_; }

  Tensor<T> time_embedding(double t) const {
    return time_fc2_(silu(time_fc1_(timestep_features<T>(t, cfg_.dim))));
  }

  Tensor<T> text_context(const std::optional<std::vector<std::int64_t>>& ids) const {
    if (!ids) return null_text_;
    if (static_cast<std::int64_t>(ids->size()) != cfg_.text_len)
      throw ModelError("text must have exactly " + std::to_string(cfg_.text_len) + " ids (pad first)");
    for (auto id : *ids)
      if (id < 0 || id >= cfg_.text_vocab) throw ModelError("text id " + std::to_string(id) + " out of vocabulary");
    return add(gather_rows(text_table_, *ids), text_pos_);
  }

  // Broadcast-add the task hint to every token.
  Tensor<T> inject_task_hint(const Tensor<T>& tokens, TaskMode task) const {
    return add_row(tokens, task_hint(task));
  }

  Tensor<T> task_hint(TaskMode task) const {
    return task_mlp_(gather_rows(task_table_, {static_cast<std::int64_t>(task)}));
  }

  // One block over whichever streams are present. Video-only blocks leave
  // the motion stream untouched.
  void block_forward(std::size_t index, std::optional<Tensor<T>>& xv, std::optional<Tensor<T>>& xm,
                     const Tensor<T>& silu_c, const Tensor<T>& text, const RopeTables<T>& tables,
                     std::vector<AttentionCapture<T>>* capture = nullptr) const {
    const auto& blk = blocks_.at(index);
    const auto d = cfg_.dim;
    const bool use_motion = blk.dual() && xm.has_value();
    if (!xv && !use_motion) return;

    std::vector<const StreamWeights<T>*> w;
    std::vector<Tensor<T>*> x;
    if (xv) {
      w.push_back(&blk.video);
      x.push_back(&*xv);
    }
    if (use_motion) {
      w.push_back(&*blk.motion);
      x.push_back(&*xm);
    }

    std::vector<Modulation<T>> mod;
    std::vector<Tensor<T>> qs, ks, vs;
    std::vector<std::int64_t> rows;
    for (std::size_t s = 0; s < w.size(); ++s) {
      mod.push_back(modulation(w[s]->ada, silu_c, d));
      auto h = modulate(layer_norm(*x[s]), mod[s].shift1, mod[s].scale1);
      qs.push_back(w[s]->q(h));
      ks.push_back(w[s]->k(h));
      vs.push_back(w[s]->v(h));
      rows.push_back(x[s]->rows());
    }
    auto table = tables.get(xv.has_value(), use_motion);
    auto q = apply_rotary(qs.size() == 1 ? qs[0] : concat_rows(qs), table, cfg_.heads);
    auto k = apply_rotary(ks.size() == 1 ? ks[0] : concat_rows(ks), table, cfg_.heads);
    auto v = vs.size() == 1 ? vs[0] : concat_rows(vs);
    AttentionCapture<T>* cap = nullptr;
    if (capture) {
      capture->push_back({static_cast<std::int64_t>(index), xv ? xv->rows() : 0, use_motion ? xm->rows() : 0, {}});
      cap = &capture->back();
    }
    auto attn = attention(q, k, v, cfg_.heads, cap ? &cap->probs : nullptr);

    std::int64_t begin = 0;
    for (std::size_t s = 0; s < w.size(); ++s) {
      auto part = w.size() == 1 ? attn : slice_rows(attn, begin, begin + rows[s]);
      begin += rows[s];
      auto& xs = *x[s];
      xs = add(xs, mul_row(w[s]->attn_out(part), mod[s].gate1));
      auto cq = w[s]->cross_q(layer_norm(xs));
      xs = add(xs, w[s]->cross_out(attention(cq, w[s]->cross_k(text), w[s]->cross_v(text), cfg_.heads)));
      auto h2 = modulate(layer_norm(xs), mod[s].shift2, mod[s].scale2);
      xs = add(xs, mul_row(w[s]->ffn(h2), mod[s].gate2));
    }
  }

  ForwardOutputs<T> forward(const ForwardInputs<T>& in, std::vector<AttentionCapture<T>>* capture = nullptr) const {
    if (!in.video && !in.motion) throw ModelError("model_forward needs at least one modality");
    if (in.video) {
      if (in.video->rank() != 2 || in.video->rows() != in.grid.tokens() ||
          in.video->cols() != video::patch_dim(cfg_.stride))
        throw ModelError("video input " + shape_str(in.video->shape()) + " does not match the latent grid");
    }
    auto c = time_embedding(in.t);
    auto silu_c = silu(c);
    auto text = text_context(in.text);

    std::optional<Tensor<T>> xv, xm;
    if (in.video) xv = video::embed_patches(*in.video, patch_in_);
    if (in.motion) xm = motion::encode_motion(*in.motion, motion_proj_);
    if (in.task) {
      auto hint = task_hint(*in.task);
      if (xv) xv = add_row(*xv, hint);
      if (xm) xm = add_row(*xm, hint);
    }
    if (in.motion && (in.motion->rank() != 2 || in.motion->rows() <= 0))
      throw ModelError("motion input must be [F, 235]");
    const RopeTables<T> tables(cfg_.rope(), in.grid, in.motion ? in.motion->rows() : 0);
    for (std::size_t i = 0; i < blocks_.size(); ++i) block_forward(i, xv, xm, silu_c, text, tables, capture);

    ForwardOutputs<T> out;
    if (xv) {
      auto m = reshape(video_final_ada_(silu_c), {2, cfg_.dim});
      out.video = video::unembed(modulate(layer_norm(*xv), slice_rows(m, 0, 1), slice_rows(m, 1, 2)), video_final_);
      if (cfg_.video_clean_prediction)
        out.video = scale(sub(*out.video, *in.video), static_cast<T>(1.0 / std::max(1.0 - in.t, kMinVelocityGap)));
    }
    if (xm) {
      auto m = reshape(motion_final_ada_(silu_c), {2, cfg_.dim});
      out.motion = motion::decode_motion(modulate(layer_norm(*xm), slice_rows(m, 0, 1), slice_rows(m, 1, 2)),
                                         motion_proj_);
    }
    return out;
  }

  // Copy the video-stream weights of every dual block into its motion stream
  // (initialization of a motion branch that skips motion-only pretraining).
  void copy_video_stream_to_motion() {
    if (cfg_.share_modality_weights) return;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (!blocks_[i].dual()) continue;
      const auto prefix = "blocks." + std::to_string(i);
      for (const auto& e : params_.entries()) {
        if (e.name.rfind(prefix + ".video.", 0) != 0) continue;
        auto dst_name = prefix + ".motion." + e.name.substr(prefix.size() + 7);
        auto dst = params_.at(dst_name);
        dst.mutable_values() = e.tensor.values();
      }
    }
  }

 private:
  ModelConfig cfg_;
  ParameterSet<T> params_;
  Linear<T> time_fc1_, time_fc2_;
  Tensor<T> text_table_, text_pos_, null_text_, task_table_;
  Mlp<T> task_mlp_;
  Linear<T> patch_in_;
  motion::MotionProjectors<T> motion_proj_;
  std::vector<Block<T>> blocks_;
  Linear<T> video_final_ada_, video_final_, motion_final_ada_;
};

}  // namespace mvdit::model
