// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value run configuration. Lines are "key = value"; '#' starts a
// comment. Unknown or repeated keys are errors, and the whole config is
// validated before anything is allocated.

#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "mvdit/model/dual_dit.hpp"
#include "mvdit/sampling/sampler.hpp"
#include "mvdit/toydata/caption.hpp"
#include "mvdit/training/trainer.hpp"

namespace mvdit::io {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SampleSettings {
  std::int64_t steps = 50;
  double shift = 8.0;
  double w1 = 6.0;
  double w2 = 1.5;
  bool operator==(const SampleSettings&) const = default;
};

struct DataSettings {
  std::int64_t count = 500;
  std::int64_t frames = 17;
  std::int64_t height = 32;
  std::int64_t width = 32;
  std::int64_t fps = 16;
  bool operator==(const DataSettings&) const = default;
};

struct RunConfig {
  model::ModelConfig model;
  training::TrainPlan train;
  SampleSettings sample;
  DataSettings data;
  std::int64_t checkpoint_every = 500;
  std::uint64_t seed = 0;
  std::string dataset = "data/toy.hmvd";
  std::string checkpoint = "runs/model.emck";
  std::string metrics_dir = "runs";

  bool operator==(const RunConfig&) const = default;
  void validate() const;
};

namespace detail {

template <class V>
V parse_number(const std::string& key, const std::string& text) {
  V v{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad value for " + key + ": '" + text + "' (expected true or false)");
}

template <class V>
std::string format_number(V v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class V>
Field numeric(std::function<V&(RunConfig&)> ref, const std::string& key) {
  return {[ref, key](RunConfig& c, const std::string& s) { ref(c) = parse_number<V>(key, s); },
          [ref](const RunConfig& c) { return format_number(ref(const_cast<RunConfig&>(c))); }};
}

inline Field boolean(std::function<bool&(RunConfig&)> ref, const std::string& key) {
  return {[ref, key](RunConfig& c, const std::string& s) { ref(c) = parse_bool(key, s); },
          [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

inline Field text(std::function<std::string&(RunConfig&)> ref) {
  return {[ref](RunConfig& c, const std::string& s) { ref(c) = s; },
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); }};
}

inline const std::map<std::string, Field>& schema() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
#define MVDIT_NUM(key, type, member) f[key] = numeric<type>([](RunConfig& c) -> type& { return c.member; }, key)
#define MVDIT_BOOL(key, member) f[key] = boolean([](RunConfig& c) -> bool& { return c.member; }, key)
    MVDIT_NUM("model.dim", std::int64_t, model.dim);
    MVDIT_NUM("model.heads", std::int64_t, model.heads);
    MVDIT_NUM("model.layers", std::int64_t, model.layers);
    MVDIT_NUM("model.dual_layers", std::int64_t, model.dual_layers);
    MVDIT_NUM("model.mlp_ratio", std::int64_t, model.mlp_ratio);
    MVDIT_NUM("model.text_vocab", std::int64_t, model.text_vocab);
    MVDIT_NUM("model.text_len", std::int64_t, model.text_len);
    MVDIT_NUM("model.stride", std::int64_t, model.stride);
    MVDIT_NUM("model.rope_theta", double, model.rope_theta);
    MVDIT_BOOL("model.collision_mode", model.collision_mode);
    MVDIT_NUM("model.motion_time_scale", double, model.motion_time_scale);
    MVDIT_BOOL("model.share_modality_weights", model.share_modality_weights);
    MVDIT_BOOL("model.video_clean_prediction", model.video_clean_prediction);
    MVDIT_NUM("train.phase1_steps", std::int64_t, train.phase1_steps);
    MVDIT_NUM("train.phase2_steps", std::int64_t, train.phase2_steps);
    MVDIT_NUM("train.batch_size", std::int64_t, train.batch_size);
    MVDIT_NUM("train.p_joint", double, train.paradigm_probs[0]);
    MVDIT_NUM("train.p_m2v", double, train.paradigm_probs[1]);
    MVDIT_NUM("train.p_v2m", double, train.paradigm_probs[2]);
    MVDIT_NUM("train.p_text_drop", double, train.p_text);
    MVDIT_NUM("train.p_motion_drop", double, train.p_motion);
    MVDIT_NUM("train.p_video_drop", double, train.p_video);
    MVDIT_NUM("train.shift", double, train.shift);
    MVDIT_NUM("train.lambda_motion", double, train.lambda_motion);
    MVDIT_NUM("train.lr", double, train.lr);
    MVDIT_NUM("train.weight_decay", double, train.weight_decay);
    MVDIT_NUM("train.grad_clip", double, train.grad_clip);
    MVDIT_NUM("train.checkpoint_every", std::int64_t, checkpoint_every);
    MVDIT_NUM("sample.steps", std::int64_t, sample.steps);
    MVDIT_NUM("sample.shift", double, sample.shift);
    MVDIT_NUM("sample.text_scale", double, sample.w1);
    MVDIT_NUM("sample.cond_scale", double, sample.w2);
    MVDIT_NUM("data.count", std::int64_t, data.count);
    MVDIT_NUM("data.frames", std::int64_t, data.frames);
    MVDIT_NUM("data.height", std::int64_t, data.height);
    MVDIT_NUM("data.width", std::int64_t, data.width);
    MVDIT_NUM("data.fps", std::int64_t, data.fps);
    MVDIT_NUM("seed", std::uint64_t, seed);
#undef MVDIT_NUM
#undef MVDIT_BOOL
    f["paths.dataset"] = text([](RunConfig& c) -> std::string& { return c.dataset; });
    f["paths.checkpoint"] = text([](RunConfig& c) -> std::string& { return c.checkpoint; });
    f["paths.metrics_dir"] = text([](RunConfig& c) -> std::string& { return c.metrics_dir; });
    return f;
  }();
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  const auto& s = detail::schema();
  auto it = s.find(key);
  if (it == s.end()) throw ConfigError("unknown config key: " + key);
  it->second.set(c, value);
}

inline RunConfig parse_config(const std::string& text, const RunConfig& base = {}) {
  RunConfig c = base;
  std::istringstream in(text);
  std::string line;
  std::map<std::string, int> seen;
  for (int n = 1; std::getline(in, line); ++n) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    const auto key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (seen.count(key)) throw ConfigError("line " + std::to_string(n) + ": duplicate key " + key);
    seen[key] = n;
    try {
      set_config_value(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path, const RunConfig& base = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), base);
}

// Every key, sorted, one per line; parse_config(to_text(c)) == c.
inline std::string config_to_text(const RunConfig& c) {
  std::string out;
  for (const auto& [key, field] : detail::schema()) out += key + " = " + field.get(c) + "\n";
  return out;
}

inline void RunConfig::validate() const {
  try {
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (data.frames < 1 || data.frames % 4 != 1) throw ConfigError("data.frames must be 1 mod 4");
  if (data.height < 8 || data.width < 8) throw ConfigError("data.height and data.width must be >= 8");
  if (data.height % model.stride != 0 || data.width % model.stride != 0)
    throw ConfigError("data.height and data.width must be divisible by model.stride");
  if (data.fps <= 0) throw ConfigError("data.fps must be positive");
  if (data.count <= 0) throw ConfigError("data.count must be positive");
  if (model.text_vocab < toydata::vocab::kSize)
    throw ConfigError("model.text_vocab must cover the caption vocabulary (" + std::to_string(toydata::vocab::kSize) + ")");
  if (model.text_len < static_cast<std::int64_t>(toydata::kMaxCaption))
    throw ConfigError("model.text_len must fit the longest caption (" + std::to_string(toydata::kMaxCaption) + ")");
  if (sample.steps < 1) throw ConfigError("sample.steps must be >= 1");
  if (!(sample.shift >= 1.0)) throw ConfigError("sample.shift must be >= 1");
  if (!(sample.w1 >= 0.0) || !(sample.w2 >= 0.0)) throw ConfigError("guidance scales must be >= 0");
  if (checkpoint_every <= 0) throw ConfigError("train.checkpoint_every must be positive");
}

}  // namespace mvdit::io
