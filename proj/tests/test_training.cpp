// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstring>

#include "mvdit/training/trainer.hpp"

using namespace mvdit;
using namespace mvdit::training;
using Catch::Approx;

namespace {

model::ModelConfig small_config() {
  model::ModelConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.dual_layers = 2;
  cfg.mlp_ratio = 2;
  cfg.text_vocab = 10;
  cfg.text_len = 4;
  cfg.stride = 2;
  return cfg;
}

std::vector<TrainExample> synthetic_examples(std::size_t n, std::uint64_t seed) {
  std::vector<TrainExample> out;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    TrainExample e;
    e.id = 100 + i;
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

std::uint64_t checksum(const std::vector<Tensor<float>>& ts) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& t : ts)
    for (auto v : t.values()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      h = (h ^ bits) * 1099511628211ull;
    }
  return h;
}

std::vector<Buffer<float>> snapshot(const std::vector<Tensor<float>>& ts) {
  std::vector<Buffer<float>> out;
  for (const auto& t : ts) out.push_back(t.values());
  return out;
}

}  // namespace

TEST_CASE("interpolate", "[training][flow]") {
  Rng rng(1);
  auto a = rng.normal_vector<double>(20), b = rng.normal_vector<double>(20);
  Buffer<double> x0(a.begin(), a.end()), x1(b.begin(), b.end());
  CHECK(interpolate(x0, x1, 0.0) == x0);
  CHECK(interpolate(x0, x1, 1.0) == x1);
  CHECK(interpolate(Buffer<double>{0.0}, Buffer<double>{2.0}, 0.5)[0] == 1.0);
  for (double t : {0.1, 0.37, 0.8}) {
    auto p = interpolate(x0, x1, t), q = interpolate(x1, x0, 1.0 - t);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == Approx(q[i]).margin(1e-15));
  }
  CHECK_THROWS_AS(interpolate(x0, Buffer<double>(3), 0.5), ShapeError);
  CHECK_THROWS(interpolate(x0, x1, 1.5));
}

TEST_CASE("fm_loss", "[training][flow]") {
  Rng rng(2);
  auto a = rng.normal_vector<double>(12), b = rng.normal_vector<double>(12);
  Buffer<double> x0(a.begin(), a.end()), x1(b.begin(), b.end()), all(12, 1.0);
  SECTION("exact velocity gives zero loss") {
    auto pred = Tensor<double>::from({3, 4}, velocity_target(x0, x1));
    CHECK(fm_loss(pred, x0, x1, all).item() == 0.0);
  }
  SECTION("zero prediction against unit velocity gives one") {
    Buffer<double> z(12, 0.0), ones(12, 1.0);
    CHECK(fm_loss(Tensor<double>::zeros({3, 4}), z, ones, all).item() == Approx(1.0));
  }
  SECTION("partial mask equals an explicit masked mean") {
    auto p = rng.normal_vector<double>(12);
    Buffer<double> mask(12, 0.0);
    for (int i = 0; i < 12; i += 3) mask[i] = 1.0;
    double acc = 0;
    int n = 0;
    for (int i = 0; i < 12; ++i)
      if (mask[i] != 0) {
        const double d = p[i] - (x1[i] - x0[i]);
        acc += d * d;
        ++n;
      }
    CHECK(fm_loss(Tensor<double>::from({12}, p), x0, x1, mask).item() == Approx(acc / n).epsilon(1e-14));
  }
  SECTION("empty mask is an error") {
    CHECK_THROWS(fm_loss(Tensor<double>::zeros({3, 4}), x0, x1, Buffer<double>(12, 0.0)));
  }
}

TEST_CASE("shifted timestep sampling", "[training][flow]") {
  for (int i = 0; i < kTrainTimesteps; ++i) {
    const double u = i / 999.0;
    CHECK(shift_timestep(u, 1.0) == Approx(u).margin(1e-15));
  }
  CHECK(shift_timestep(0.0, 8.0) == 0.0);
  CHECK(shift_timestep(1.0, 8.0) == 1.0);
  CHECK(shift_timestep(0.5, 8.0) == Approx(4.0 / 4.5).epsilon(1e-15));
  Rng rng(3);
  double mean = 0;
  for (int i = 0; i < 2000; ++i) {
    const double t = sample_train_timestep(rng, 8.0);
    CHECK((t >= 0.0 && t <= 1.0));
    mean += t / 2000;
  }
  CHECK(mean > 0.7);  // shift pushes mass toward the data end
  CHECK_THROWS(shift_timestep(0.5, 0.5));
}

TEST_CASE("paradigm sampling and condition dropping", "[training][paradigm]") {
  TrainPlan plan;
  SECTION("video-to-motion always drops text") {
    Rng rng(4);
    int dropped = 0;
    for (int i = 0; i < 10000; ++i) dropped += drop_conditions(rng, TaskMode::VideoToMotion, plan).text;
    CHECK(dropped == 10000);
  }
  SECTION("p_text = 0 never drops text in joint mode") {
    plan.p_text = 0.0;
    Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
      auto d = drop_conditions(rng, TaskMode::Joint, plan);
      CHECK_FALSE(d.text);
      CHECK_FALSE(d.video);
      CHECK_FALSE(d.motion);
    }
  }
  SECTION("empirical drop rates match 0.1") {
    Rng rng(6);
    int text = 0, motion = 0, video = 0;
    for (int i = 0; i < 10000; ++i) {
      auto a = drop_conditions(rng, TaskMode::MotionToVideo, plan);
      text += a.text;
      motion += a.motion;
      CHECK_FALSE(a.video);
      auto b = drop_conditions(rng, TaskMode::VideoToMotion, plan);
      video += b.video;
      CHECK_FALSE(b.motion);
    }
    CHECK(std::abs(text / 10000.0 - 0.1) <= 0.02);
    CHECK(std::abs(motion / 10000.0 - 0.1) <= 0.02);
    CHECK(std::abs(video / 10000.0 - 0.1) <= 0.02);
  }
  SECTION("paradigms follow their probabilities") {
    Rng rng(7);
    std::array<int, 3> counts{};
    for (int i = 0; i < 9000; ++i) ++counts[static_cast<int>(sample_paradigm(rng, plan.paradigm_probs))];
    for (int c : counts) CHECK(std::abs(c / 9000.0 - 1.0 / 3) <= 0.02);
    Rng r2(8);
    for (int i = 0; i < 100; ++i) CHECK(sample_paradigm(r2, {0.0, 1.0, 0.0}) == TaskMode::MotionToVideo);
  }
}

TEST_CASE("train plan validation", "[training]") {
  CHECK_NOTHROW(TrainPlan{}.validate());
  TrainPlan p;
  p.paradigm_probs = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(p.validate(), TrainError);
  p = TrainPlan{};
  p.p_text = 1.5;
  CHECK_THROWS_AS(p.validate(), TrainError);
  p = TrainPlan{};
  p.shift = 0.5;
  CHECK_THROWS_AS(p.validate(), TrainError);
}

TEST_CASE("phase-2 example preparation", "[training][phase2]") {
  auto data = synthetic_examples(1, 9);
  TrainPlan plan;
  plan.p_text = plan.p_motion = plan.p_video = 0.0;
  SECTION("joint covers both modalities") {
    Rng rng(1);
    auto p = prepare_phase2<float>(data[0], plan, rng, TaskMode::Joint);
    CHECK(p.gen_video);
    CHECK(p.gen_motion);
    model::DualDiT<float> m(small_config(), 1);
    // Loss normalizer equals video + motion element counts.
    Buffer<float> vm(p.video_data.size(), 1.0f), mm(p.motion_data.size(), 1.0f);
    NoGradGuard g;
    auto out = m.forward(p.inputs);
    const double manual = (velocity_sq_error(*out.video, p.video_noise, p.video_data, vm).item() +
                           velocity_sq_error(*out.motion, p.motion_noise, p.motion_data, mm).item()) /
                          static_cast<double>(vm.size() + mm.size());
    CHECK(example_loss(m, p, 1.0).item() == Approx(manual).epsilon(1e-5));
  }
  SECTION("conditioning modality is passed clean") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      Rng rng(s);
      auto m2v = prepare_phase2<float>(data[0], plan, rng, TaskMode::MotionToVideo);
      REQUIRE(m2v.inputs.motion);
      CHECK(m2v.inputs.motion->values() == data[0].motion);
      CHECK_FALSE(m2v.gen_motion);
      Rng rng2(s);
      auto v2m = prepare_phase2<float>(data[0], plan, rng2, TaskMode::VideoToMotion);
      REQUIRE(v2m.inputs.video);
      CHECK(v2m.inputs.video->values() == data[0].video);
      CHECK_FALSE(v2m.inputs.text);
    }
  }
  SECTION("dropped conditions are absent") {
    plan.p_motion = 1.0;
    plan.p_video = 1.0;
    Rng rng(3);
    auto m2v = prepare_phase2<float>(data[0], plan, rng, TaskMode::MotionToVideo);
    CHECK_FALSE(m2v.inputs.motion);
    auto v2m = prepare_phase2<float>(data[0], plan, rng, TaskMode::VideoToMotion);
    CHECK_FALSE(v2m.inputs.video);
  }
  SECTION("unpaired examples are rejected") {
    Rng rng(4);
    CHECK_THROWS_AS(prepare_phase2<float>(motion_only(data[0]), plan, rng), TrainError);
    CHECK_THROWS_AS(prepare_phase1<float>(data[0], plan, rng), TrainError);
  }
}

TEST_CASE("phase 1 leaves the video branch and shared embedders untouched", "[training][phase1]") {
  model::DualDiT<float> m(small_config(), 2);
  auto data = synthetic_examples(4, 10);
  std::vector<TrainExample> motion_data;
  for (const auto& e : data) motion_data.push_back(motion_only(e));
  const auto video_before = snapshot(m.params().tensors(Branch::Video));
  const auto shared_before = checksum(m.params().tensors(Branch::Shared));
  const auto motion_before = checksum(m.params().tensors(Branch::Motion));
  TrainPlan plan;
  plan.batch_size = 2;
  Trainer<float> trainer(m, motion_data, plan, Phase::MotionOnly);
  for (int i = 0; i < 10; ++i) {
    auto row = trainer.step();
    CHECK(std::isfinite(row.loss));
    CHECK(row.loss > 0);
    CHECK(row.paradigm == "motion");
  }
  CHECK(snapshot(m.params().tensors(Branch::Video)) == video_before);
  CHECK(checksum(m.params().tensors(Branch::Shared)) == shared_before);
  CHECK(checksum(m.params().tensors(Branch::Motion)) != motion_before);
}

TEST_CASE("phase 1 loss on a repeated clip decreases", "[training][phase1]") {
  model::DualDiT<float> m(small_config(), 3);
  auto data = synthetic_examples(1, 11);
  std::vector<TrainExample> one{motion_only(data[0])};
  TrainPlan plan;
  plan.lr = 5e-4;
  plan.p_text = 0.0;
  plan.weight_decay = 0.0;
  plan.shift = 1.0;
  Trainer<float> trainer(m, one, plan, Phase::MotionOnly);
  // Fixed evaluation draws so the curve reflects learning, not sampling noise.
  Rng eval_rng(99);
  std::vector<PreparedExample<float>> probes;
  for (int i = 0; i < 8; ++i) probes.push_back(prepare_phase1<float>(one[0], plan, eval_rng));
  std::vector<double> curve;
  for (int i = 0; i < 200; ++i) {
    trainer.step();
    NoGradGuard g;
    double acc = 0;
    for (const auto& p : probes) acc += example_loss(m, p, 1.0).item() / probes.size();
    curve.push_back(acc);
  }
  std::vector<double> windows;
  for (int w = 0; w < 20; ++w)
    windows.push_back(std::accumulate(curve.begin() + w * 10, curve.begin() + w * 10 + 10, 0.0) / 10);
  for (int w = 1; w < 20; ++w) {
    INFO("window " << w << ": " << windows[w - 1] << " -> " << windows[w]);
    CHECK(windows[w] < windows[w - 1]);
  }
}

TEST_CASE("phase 2 seeded equivalences", "[training][phase2]") {
  auto data = synthetic_examples(4, 12);
  TrainPlan plan;
  plan.batch_size = 3;
  SECTION("paradigm probabilities (1,0,0) equal forced joint mode") {
    TrainPlan joint_only = plan;
    joint_only.paradigm_probs = {1.0, 0.0, 0.0};
    model::DualDiT<float> a(small_config(), 4), b(small_config(), 4);
    Trainer<float> ta(a, data, joint_only, Phase::MultiTask), tb(b, data, plan, Phase::MultiTask);
    for (int i = 0; i < 3; ++i) {
      auto ra = ta.step(), rb = tb.step(TaskMode::Joint);
      CHECK(ra.loss == rb.loss);
      CHECK(ra.paradigm == rb.paradigm);
    }
  }
  SECTION("batch order does not change the loss") {
    model::DualDiT<float> a(small_config(), 5), b(small_config(), 5);
    AdamW<float> oa(a.params().tensors(), {}), ob(b.params().tensors(), {});
    std::vector<const TrainExample*> fwd{&data[0], &data[1], &data[2]}, rev{&data[2], &data[0], &data[1]};
    auto ra = phase2_step(a, oa, fwd, plan, 77), rb = phase2_step(b, ob, rev, plan, 77);
    CHECK(ra.loss == Approx(rb.loss).epsilon(1e-6));
  }
  SECTION("same seed gives identical loss sequences") {
    model::DualDiT<float> a(small_config(), 6), b(small_config(), 6);
    Trainer<float> ta(a, data, plan, Phase::MultiTask), tb(b, data, plan, Phase::MultiTask);
    for (int i = 0; i < 4; ++i) {
      auto ra = ta.step(), rb = tb.step();
      CHECK(ra.loss == rb.loss);
      CHECK(ra.paradigm == rb.paradigm);
    }
  }
}

TEST_CASE("gradient clipping bounds the global norm", "[training]") {
  std::vector<Tensor<double>> g{Tensor<double>::from({2}, std::vector<double>{3, 4}),
                                Tensor<double>::from({1}, std::vector<double>{12})};
  clip_gradients(g, 6.5);
  CHECK(global_norm(g) == Approx(6.5));
  CHECK(g[0][0] / g[0][1] == Approx(0.75));
  clip_gradients(g, 100.0);
  CHECK(global_norm(g) == Approx(6.5));
}
