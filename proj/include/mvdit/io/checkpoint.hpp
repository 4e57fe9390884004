// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container:
//   "EMCK" | u32 version | u64 metadata bytes | metadata (UTF-8 JSON) | f32 payload
// The metadata holds the model config, training progress and a table of
// named tensors (name, shape, offset in floats). Optimizer moments and the
// motion normalization statistics live in the same payload.

#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "json.hpp"
#include "mvdit/model/dual_dit.hpp"
#include "mvdit/motion/motion_codec.hpp"
#include "mvdit/training/trainer.hpp"

namespace mvdit::io {

using model::DualDiT;
using model::ModelConfig;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'E', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"dim", c.dim},
          {"heads", c.heads},
          {"layers", c.layers},
          {"dual_layers", c.dual_layers},
          {"mlp_ratio", c.mlp_ratio},
          {"text_vocab", c.text_vocab},
          {"text_len", c.text_len},
          {"stride", c.stride},
          {"rope_theta", c.rope_theta},
          {"collision_mode", c.collision_mode},
          {"motion_time_scale", c.motion_time_scale},
          {"share_modality_weights", c.share_modality_weights},
          {"video_clean_prediction", c.video_clean_prediction}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.dim = j.at("dim");
  c.heads = j.at("heads");
  c.layers = j.at("layers");
  c.dual_layers = j.at("dual_layers");
  c.mlp_ratio = j.at("mlp_ratio");
  c.text_vocab = j.at("text_vocab");
  c.text_len = j.at("text_len");
  c.stride = j.at("stride");
  c.rope_theta = j.at("rope_theta");
  c.collision_mode = j.at("collision_mode");
  c.motion_time_scale = j.at("motion_time_scale");
  c.share_modality_weights = j.at("share_modality_weights");
  c.video_clean_prediction = j.at("video_clean_prediction");
  return c;
}

// Training progress recorded with the weights.
struct CheckpointInfo {
  int completed_phase = 0;  // 0 untrained, 1 after motion pretraining, 2 after multi-task training
  int active_phase = 0;     // phase the optimizer state belongs to, 0 if none
  std::int64_t step = 0;    // steps taken in the active phase
  motion::MotionStats stats;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const CheckpointInfo&) const = default;
};

template <class T>
struct OptimizerSnapshot {
  std::vector<std::string> names;
  AdamWState<T> state;
};

template <class T>
struct LoadedCheckpoint {
  std::unique_ptr<DualDiT<T>> model;
  CheckpointInfo info;
  std::optional<OptimizerSnapshot<T>> optimizer;
};

// Parameter names in the order the optimizer of a phase sees them.
template <class T>
std::vector<std::string> trainable_names(const DualDiT<T>& m, training::Phase phase) {
  std::vector<std::string> out;
  for (const auto& e : m.params().entries())
    if (phase == training::Phase::MultiTask || e.branch == Branch::Motion) out.push_back(e.name);
  return out;
}

// Copies every parameter value between models with the same tensor table.
// Configs may differ in fields that own no weights (e.g. positional mode).
template <class T>
void copy_parameters(const DualDiT<T>& src, DualDiT<T>& dst) {
  const auto& a = src.params().entries();
  const auto& b = dst.params().entries();
  if (a.size() != b.size()) throw CheckpointError("models have different parameter tables");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].tensor.shape() != b[i].tensor.shape())
      throw CheckpointError("parameter mismatch at " + a[i].name);
    auto t = b[i].tensor;
    t.mutable_values() = a[i].tensor.values();
  }
}

namespace detail {

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <class Range>
std::uint64_t put_floats(std::string& payload, const Range& values) {
  const auto offset = payload.size() / 4;
  for (auto v : values) put_le(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return offset;
}

template <class U>
U get_le(const std::string& bytes, std::size_t pos) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  return static_cast<U>(v);
}

}  // namespace detail

template <class T>
std::string encode_checkpoint(const DualDiT<T>& m, const CheckpointInfo& info, const AdamW<T>* opt = nullptr) {
  std::string payload;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& e : m.params().entries()) {
    const auto off = detail::put_floats(payload, e.tensor.values());
    tensors.push_back({{"name", e.name}, {"shape", e.tensor.shape()}, {"offset", off}});
  }
  nlohmann::json meta = {{"config", config_to_json(m.config())},
                         {"completed_phase", info.completed_phase},
                         {"active_phase", info.active_phase},
                         {"step", info.step},
                         {"tensors", tensors},
                         {"extra", info.extra}};
  meta["stats"] = {{"mean", detail::put_floats(payload, info.stats.mean)},
                   {"stddev", detail::put_floats(payload, info.stats.stddev)}};
  if (opt) {
    if (info.active_phase != 1 && info.active_phase != 2) throw CheckpointError("optimizer state needs an active phase");
    const auto names = trainable_names(m, static_cast<training::Phase>(info.active_phase));
    const auto& st = opt->state();
    if (names.size() != st.first_moment.size()) throw CheckpointError("optimizer does not match the active phase");
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto m1 = detail::put_floats(payload, st.first_moment[i]);
      const auto m2 = detail::put_floats(payload, st.second_moment[i]);
      entries.push_back({{"name", names[i]}, {"count", st.first_moment[i].size()}, {"m", m1}, {"v", m2}});
    }
    meta["optimizer"] = {{"step", st.step}, {"entries", entries}};
  } else {
    meta["optimizer"] = nullptr;
  }
  const auto text = meta.dump();
  std::string out(kCheckpointMagic, 4);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, text.size());
  out += text;
  out += payload;
  return out;
}

template <class T>
LoadedCheckpoint<T> decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = detail::get_le<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto meta_len = detail::get_le<std::uint64_t>(bytes, 8);
  if (meta_len > bytes.size() - 16) throw CheckpointError("truncated checkpoint metadata");
  const std::size_t base = 16 + static_cast<std::size_t>(meta_len);
  if ((bytes.size() - base) % 4 != 0) throw CheckpointError("checkpoint payload is not a whole number of floats");
  const std::size_t payload_floats = (bytes.size() - base) / 4;

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.substr(16, static_cast<std::size_t>(meta_len)));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint metadata: ") + e.what());
  }
  auto read = [&](std::uint64_t offset, std::size_t count, auto* dst) {
    if (offset + count > payload_floats) throw CheckpointError("tensor extends past the checkpoint payload");
    for (std::size_t i = 0; i < count; ++i)
      dst[i] = static_cast<std::remove_pointer_t<decltype(dst)>>(
          std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes, base + 4 * (offset + i))));
  };

  LoadedCheckpoint<T> out;
  try {
    const auto cfg = config_from_json(meta.at("config"));
    cfg.validate();
    out.model = std::make_unique<DualDiT<T>>(cfg, 0);
    out.info.completed_phase = meta.at("completed_phase");
    out.info.active_phase = meta.at("active_phase");
    out.info.step = meta.at("step");
    out.info.extra = meta.at("extra");
    const auto& entries = out.model->params().entries();
    const auto& table = meta.at("tensors");
    if (table.size() != entries.size()) throw CheckpointError("checkpoint tensor count does not match the model");
    std::vector<bool> seen(entries.size(), false);
    for (const auto& t : table) {
      const std::string name = t.at("name");
      auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.name == name; });
      if (it == entries.end()) throw CheckpointError("unknown tensor in checkpoint: " + name);
      const auto idx = static_cast<std::size_t>(it - entries.begin());
      if (seen[idx]) throw CheckpointError("tensor named twice in checkpoint: " + name);
      seen[idx] = true;
      if (t.at("shape").get<Shape>() != it->tensor.shape()) throw CheckpointError("shape mismatch for " + name);
      auto tensor = it->tensor;
      auto& vals = tensor.mutable_values();
      read(t.at("offset").get<std::uint64_t>(), vals.size(), vals.data());
    }
    out.info.stats.mean.resize(motion::kFrameParams);
    out.info.stats.stddev.resize(motion::kFrameParams);
    read(meta.at("stats").at("mean").get<std::uint64_t>(), motion::kFrameParams, out.info.stats.mean.data());
    read(meta.at("stats").at("stddev").get<std::uint64_t>(), motion::kFrameParams, out.info.stats.stddev.data());
    if (!meta.at("optimizer").is_null()) {
      OptimizerSnapshot<T> snap;
      const auto& o = meta.at("optimizer");
      snap.state.step = o.at("step");
      for (const auto& e : o.at("entries")) {
        snap.names.push_back(e.at("name"));
        const std::size_t n = e.at("count");
        Buffer<T> m1(n), m2(n);
        read(e.at("m").get<std::uint64_t>(), n, m1.data());
        read(e.at("v").get<std::uint64_t>(), n, m2.data());
        snap.state.first_moment.push_back(std::move(m1));
        snap.state.second_moment.push_back(std::move(m2));
      }
      out.optimizer = std::move(snap);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint metadata: ") + e.what());
  } catch (const model::ModelError& e) {
    throw CheckpointError(std::string("checkpoint holds an invalid config: ") + e.what());
  }
  return out;
}

// Copies saved moments into an optimizer built for the same phase.
template <class T>
void restore_optimizer(AdamW<T>& opt, const DualDiT<T>& m, training::Phase phase, const OptimizerSnapshot<T>& snap) {
  if (snap.names != trainable_names(m, phase)) throw CheckpointError("saved optimizer state belongs to another phase");
  auto& st = opt.state();
  if (st.first_moment.size() != snap.state.first_moment.size()) throw CheckpointError("optimizer size mismatch");
  for (std::size_t i = 0; i < st.first_moment.size(); ++i)
    if (st.first_moment[i].size() != snap.state.first_moment[i].size())
      throw CheckpointError("optimizer moment size mismatch for " + snap.names[i]);
  st = snap.state;
}

inline void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

template <class T>
void save_checkpoint(const std::string& path, const DualDiT<T>& m, const CheckpointInfo& info,
                     const AdamW<T>* opt = nullptr) {
  write_bytes(path, encode_checkpoint(m, info, opt));
}

template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  return decode_checkpoint<T>(read_bytes(path));
}

}  // namespace mvdit::io
