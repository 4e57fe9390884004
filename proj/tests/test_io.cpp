// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "mvdit/io/checkpoint.hpp"
#include "mvdit/io/run_config.hpp"

using namespace mvdit;
using namespace mvdit::io;

namespace {

model::ModelConfig small_config() {
  model::ModelConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.dual_layers = 1;
  cfg.mlp_ratio = 2;
  cfg.text_vocab = 10;
  cfg.text_len = 4;
  cfg.stride = 2;
  return cfg;
}

std::vector<training::TrainExample> synthetic_examples(std::size_t n, std::uint64_t seed) {
  std::vector<training::TrainExample> out;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    training::TrainExample e;
    e.id = i;
    e.frames = 5;
    e.grid = {2, 2, 2};
    auto m = rng.normal_vector<float>(5 * motion::kFrameParams, 0.5);
    e.motion.assign(m.begin(), m.end());
    auto v = rng.normal_vector<float>(8 * video::patch_dim(2), 0.3);
    e.video.assign(v.begin(), v.end());
    e.text = {static_cast<std::int64_t>(1 + i % 9), 2, 0, 0};
    out.push_back(std::move(e));
  }
  return out;
}

CheckpointInfo sample_info() {
  CheckpointInfo info;
  info.completed_phase = 1;
  info.active_phase = 2;
  info.step = 7;
  info.stats.mean.assign(motion::kFrameParams, 0.25f);
  info.stats.stddev.assign(motion::kFrameParams, 2.0f);
  info.extra = {{"note", "x"}};
  return info;
}

std::vector<training::TrainExample> for_phase(std::vector<training::TrainExample> data, training::Phase phase) {
  if (phase == training::Phase::MotionOnly)
    for (auto& e : data) e = training::motion_only(std::move(e));
  return data;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mvdit_io_" + name)).string();
}

}  // namespace

TEST_CASE("checkpoint round trip is byte-identical", "[io][checkpoint]") {
  DualDiT<float> net(small_config(), 11);
  training::TrainPlan plan;
  auto data = synthetic_examples(3, 2);
  training::Trainer<float> trainer(net, data, plan, training::Phase::MultiTask);
  trainer.step();
  const auto info = sample_info();
  const auto bytes = encode_checkpoint(net, info, &trainer.optimizer());

  const auto path = temp_path("roundtrip.emck");
  save_checkpoint(path, net, info, &trainer.optimizer());
  auto loaded = load_checkpoint<float>(path);
  CHECK(loaded.info == info);
  CHECK(loaded.model->config() == net.config());
  REQUIRE(loaded.optimizer.has_value());
  CHECK(loaded.optimizer->state.step == trainer.optimizer().state().step);
  AdamW<float> restored(training::trainable_parameters(*loaded.model, training::Phase::MultiTask), {});
  restore_optimizer(restored, *loaded.model, training::Phase::MultiTask, *loaded.optimizer);
  CHECK(encode_checkpoint(*loaded.model, loaded.info, &restored) == bytes);
  CHECK(read_bytes(path) == bytes);

  const auto& a = net.params().entries();
  const auto& b = loaded.model->params().entries();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].tensor.values() == b[i].tensor.values());

  // Without optimizer state.
  auto plain = decode_checkpoint<float>(encode_checkpoint(net, info));
  CHECK_FALSE(plain.optimizer.has_value());
  std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected", "[io][checkpoint]") {
  DualDiT<float> net(small_config(), 1);
  const auto bytes = encode_checkpoint(net, sample_info());
  auto bad = bytes;
  bad[1] = 'X';
  CHECK_THROWS_AS(decode_checkpoint<float>(bad), CheckpointError);
  bad = bytes;
  bad[4] = 2;
  CHECK_THROWS_AS(decode_checkpoint<float>(bad), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint<float>(bytes.substr(0, bytes.size() - 4)), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint<float>(bytes.substr(0, bytes.size() - 1)), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint<float>(bytes.substr(0, 10)), CheckpointError);
  bad = bytes;
  bad[20] = '#';  // inside the JSON header
  CHECK_THROWS_AS(decode_checkpoint<float>(bad), CheckpointError);
  CHECK_THROWS(load_checkpoint<float>(temp_path("does_not_exist.emck")));

  // Optimizer state from phase 1 cannot seed a phase-2 optimizer.
  training::TrainPlan plan;
  auto data = for_phase(synthetic_examples(2, 3), training::Phase::MotionOnly);
  training::Trainer<float> p1(net, data, plan, training::Phase::MotionOnly);
  auto info = sample_info();
  info.active_phase = 1;
  auto loaded = decode_checkpoint<float>(encode_checkpoint(net, info, &p1.optimizer()));
  AdamW<float> opt2(training::trainable_parameters(*loaded.model, training::Phase::MultiTask), {});
  CHECK_THROWS_AS(restore_optimizer(opt2, *loaded.model, training::Phase::MultiTask, *loaded.optimizer),
                  CheckpointError);
}

TEST_CASE("resuming from a checkpoint reproduces the loss sequence", "[io][checkpoint]") {
  training::TrainPlan plan;
  plan.lr = 1e-3;
  plan.seed = 21;
  for (auto phase : {training::Phase::MotionOnly, training::Phase::MultiTask}) {
    const auto data = for_phase(synthetic_examples(6, 4), phase);
    INFO("phase " << training::phase_name(phase));
    DualDiT<float> straight(small_config(), 5);
    training::Trainer<float> a(straight, data, plan, phase);
    std::vector<double> reference;
    for (int i = 0; i < 50; ++i) reference.push_back(a.step().loss);

    DualDiT<float> first(small_config(), 5);
    training::Trainer<float> b(first, data, plan, phase);
    for (int i = 0; i < 20; ++i) REQUIRE(b.step().loss == reference[i]);
    CheckpointInfo info;
    info.active_phase = static_cast<int>(phase);
    info.step = b.step_index();
    info.stats.mean.assign(motion::kFrameParams, 0.0f);
    info.stats.stddev.assign(motion::kFrameParams, 1.0f);
    const auto bytes = encode_checkpoint(first, info, &b.optimizer());

    auto loaded = decode_checkpoint<float>(bytes);
    training::Trainer<float> c(*loaded.model, data, plan, phase);
    restore_optimizer(c.optimizer(), *loaded.model, phase, *loaded.optimizer);
    c.set_step_index(loaded.info.step);
    for (int i = 20; i < 50; ++i) CHECK(c.step().loss == reference[i]);
  }
}

TEST_CASE("phase-1 checkpoints keep the video branch at its initial values", "[io][checkpoint]") {
  DualDiT<float> init(small_config(), 9), net(small_config(), 9);
  training::TrainPlan plan;
  plan.lr = 1e-2;
  auto data = for_phase(synthetic_examples(3, 1), training::Phase::MotionOnly);
  training::Trainer<float> t(net, data, plan, training::Phase::MotionOnly);
  for (int i = 0; i < 5; ++i) t.step();
  auto loaded = decode_checkpoint<float>(encode_checkpoint(net, sample_info()));
  const auto& a = init.params().entries();
  const auto& b = loaded.model->params().entries();
  std::size_t changed_motion = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool same = a[i].tensor.values() == b[i].tensor.values();
    if (b[i].branch == Branch::Motion) changed_motion += !same;
    else CHECK(same);
  }
  CHECK(changed_motion > 0);
}

TEST_CASE("run config parsing", "[io][config]") {
  RunConfig defaults;
  const auto text = config_to_text(defaults);
  CHECK(parse_config(text) == defaults);
  CHECK(text.find("model.dim = 64\n") != std::string::npos);
  // Keys are written sorted.
  std::vector<std::string> keys;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) keys.push_back(line.substr(0, line.find(' ')));
  CHECK(std::is_sorted(keys.begin(), keys.end()));

  auto c = parse_config("# comment\nmodel.dim = 32\n  train.lr=0.003  # trailing\nseed = 9\n\nmodel.collision_mode = true\n"
                        "paths.dataset = /tmp/a b.hmvd\n");
  CHECK(c.model.dim == 32);
  CHECK(c.train.lr == 0.003);
  CHECK(c.seed == 9);
  CHECK(c.model.collision_mode);
  CHECK(c.dataset == "/tmp/a b.hmvd");
  CHECK(parse_config(config_to_text(c)) == c);

  auto message = [](const std::string& s) {
    try {
      parse_config(s);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("seed = 1\nmodel.depth = 3\n").find("line 2") != std::string::npos);
  CHECK(message("seed = 1\nmodel.depth = 3\n").find("unknown") != std::string::npos);
  CHECK(message("seed = 1\n\nseed = 2\n").find("line 3: duplicate") != std::string::npos);
  CHECK(message("model.dim = 3x\n").find("line 1") != std::string::npos);
  CHECK(message("just text\n").find("line 1") != std::string::npos);
  CHECK(message("model.collision_mode = maybe\n") != "no error");
  CHECK(message("data.frames = 16\n").find("1 mod 4") != std::string::npos);
  CHECK(message("data.height = 30\n").find("divisible") != std::string::npos);
  CHECK(message("model.text_vocab = 20\n") != "no error");
  CHECK(message("model.text_len = 8\n") != "no error");
  CHECK(message("train.p_joint = 0.5\n") != "no error");
  CHECK(message("model.dim = 30\n") != "no error");
  CHECK(message("train.p_joint = 0.5\ntrain.p_m2v = 0.25\ntrain.p_v2m = 0.25\n") == "no error");
  CHECK_THROWS_AS(load_config(temp_path("missing.cfg")), ConfigError);
}

TEST_CASE("shipped toy config loads and validates", "[io][config]") {
  const auto cfg = io::load_config(MVDIT_SOURCE_DIR "/configs/toy.cfg");
  CHECK(cfg.train.batch_size == 2);
  CHECK(cfg.train.shift == 1.0);
  CHECK(cfg.sample.shift == 8.0);
  CHECK(cfg.data.frames == 17);
}
