// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "mvdit/numerics/rng.hpp"
#include "mvdit/rope/mvs_rope.hpp"

using namespace mvdit;
using namespace mvdit::rope;
using Catch::Approx;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// Independent rotation: build each 2x2 block as an explicit matrix.
std::vector<double> reference_rotate(const std::vector<double>& v, std::size_t begin, std::size_t dims, double pos,
                                     double theta) {
  auto out = v;
  for (std::size_t j = 0; j < dims / 2; ++j) {
    const double freq = 1.0 / std::pow(theta, static_cast<double>(2 * j) / static_cast<double>(dims));
    const double m[2][2] = {{std::cos(pos * freq), -std::sin(pos * freq)}, {std::sin(pos * freq), std::cos(pos * freq)}};
    const double a = v[begin + 2 * j], b = v[begin + 2 * j + 1];
    out[begin + 2 * j] = m[0][0] * a + m[0][1] * b;
    out[begin + 2 * j + 1] = m[1][0] * a + m[1][1] * b;
  }
  return out;
}

std::vector<double> reference_3d(const std::vector<double>& v, double t, double h, double w, const RopeConfig& cfg) {
  auto out = reference_rotate(v, 0, cfg.head_dim / 2, t, cfg.theta);
  out = reference_rotate(out, cfg.head_dim / 2, cfg.head_dim / 4, h, cfg.theta);
  return reference_rotate(out, 3 * cfg.head_dim / 4, cfg.head_dim / 4, w, cfg.theta);
}

}  // namespace

TEST_CASE("rope_rotate basics", "[rope]") {
  Rng rng(1);
  auto q = rng.normal_vector<double>(16);
  SECTION("position zero is the identity") { CHECK(rope_rotate<double>(q, 0.0, 16, 10000.0) == q); }
  SECTION("rotation preserves the norm") {
    for (double pos : {0.25, 1.0, 7.5, 123.0}) CHECK(norm(rope_rotate<double>(q, pos, 16, 10000.0)) == Approx(norm(q)).margin(1e-5));
  }
  SECTION("matches explicit 2x2 rotation matrices") {
    auto got = rope_rotate<double>(q, 3.7, 16, 10000.0);
    auto want = reference_rotate(q, 0, 16, 3.7, 10000.0);
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(got[i] == Approx(want[i]).margin(1e-12));
  }
  SECTION("odd dims are rejected") { CHECK_THROWS_AS(rope_rotate<double>(q, 1.0, 5, 10000.0), RopeError); }
  SECTION("non-finite position is rejected") {
    CHECK_THROWS_AS(rope_rotate<double>(q, std::nan(""), 16, 10000.0), RopeError);
  }
}

TEST_CASE("rotary logits depend only on the position difference", "[rope][property]") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto q = rng.normal_vector<double>(8), k = rng.normal_vector<double>(8);
    const double p = rng.uniform(-20, 20), pp = rng.uniform(-20, 20);
    const double lhs = dot(rope_rotate<double>(q, p, 8, 10000.0), rope_rotate<double>(k, pp, 8, 10000.0));
    const double rhs = dot(rope_rotate<double>(q, p - pp, 8, 10000.0), k);
    CHECK(lhs == Approx(rhs).margin(1e-5));
  }
}

TEST_CASE("rope config validation", "[rope]") {
  CHECK_NOTHROW(RopeConfig{}.validate());
  CHECK_THROWS_AS(RopeConfig{.head_dim = 12}.validate(), RopeError);  // 3-dim spatial splits
  CHECK_THROWS_AS(RopeConfig{.head_dim = 6}.validate(), RopeError);
  CHECK_THROWS_AS(RopeConfig{.theta = 1.0}.validate(), RopeError);
  RopeConfig cfg{.head_dim = 32};
  CHECK(cfg.time_dims() + cfg.height_dims() + cfg.width_dims() == 32);
}

TEST_CASE("video tokens get plain 3D RoPE", "[rope]") {
  RopeConfig cfg;
  Rng rng(3);
  auto v = rng.normal_vector<double>(16);
  CHECK(apply_mvs_rope<double>(v, video_index(0, 0, 0), 4, 4, cfg) == v);
  for (auto idx : {video_index(2, 1, 3), video_index(5, 3, 0)}) {
    auto got = apply_mvs_rope<double>(v, idx, 4, 4, cfg);
    auto want = reference_3d(v, idx.t, idx.h, idx.w, cfg);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(got[i] == Approx(want[i]).margin(1e-12));
    // Collision mode does not touch video tokens.
    CHECK(apply_mvs_rope<double>(v, idx, 4, 4, RopeConfig{.collision_mode = true}) == got);
  }
}

TEST_CASE("motion frame 4 shares the temporal rotation of latent 1", "[rope]") {
  RopeConfig cfg;
  Rng rng(4);
  auto v = rng.normal_vector<double>(16);
  auto m = apply_mvs_rope<double>(v, motion_index(4, 0, 8, 8), 8, 8, cfg);
  auto vid = apply_mvs_rope<double>(v, video_index(1, 0, 0), 8, 8, cfg);
  for (std::int64_t i = 0; i < cfg.time_dims(); ++i) CHECK(m[i] == vid[i]);
}

TEST_CASE("motion slot 0 spatial angles equal plain RoPE at the grid corner", "[rope]") {
  RopeConfig cfg;
  Rng rng(5);
  auto v = rng.normal_vector<double>(16);
  auto m = apply_mvs_rope<double>(v, motion_index(6, 0, 8, 8), 8, 8, cfg);
  auto plain = rope3d_rotate<double>(v, Coords{1.5, 8, 8}, cfg);
  CHECK(m == plain);
  auto collided = apply_mvs_rope<double>(v, motion_index(6, 3, 8, 8), 8, 8, RopeConfig{.collision_mode = true});
  auto expected = reference_3d(v, 1.5, 3, 3, cfg);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(collided[i] == Approx(expected[i]).margin(1e-12));
  auto unscaled = apply_mvs_rope<double>(v, motion_index(6, 0, 8, 8), 8, 8, RopeConfig{.motion_time_scale = 1.0});
  auto expected_unscaled = reference_3d(v, 6, 8, 8, cfg);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(unscaled[i] == Approx(expected_unscaled[i]).margin(1e-12));
}

TEST_CASE("index/modality mismatches are rejected", "[rope]") {
  RopeConfig cfg;
  std::vector<double> v(16, 1.0);
  CHECK_THROWS_AS(apply_mvs_rope<double>(v, video_index(0, 4, 0), 4, 4, cfg), RopeError);
  CHECK_THROWS_AS(apply_mvs_rope<double>(v, PositionIndex{0, 1, 1, Modality::Motion}, 4, 4, cfg), RopeError);
  CHECK_THROWS_AS(apply_mvs_rope<double>(v, PositionIndex{0, 5, 6, Modality::Motion}, 4, 4, cfg), RopeError);
  CHECK_THROWS_AS(apply_mvs_rope<double>(v, PositionIndex{0.5, 1, 1, Modality::Video}, 4, 4, cfg), RopeError);
  CHECK_THROWS_AS(motion_index(0, 51, 4, 4), RopeError);
  CHECK_THROWS_AS(apply_mvs_rope<double>(std::vector<double>(8, 1.0), video_index(0, 0, 0), 4, 4, cfg), RopeError);
}

TEST_CASE("video and motion spatial coordinates are disjoint", "[rope][property]") {
  const std::int64_t h = 3, w = 5;
  std::set<std::pair<double, double>> video_hw;
  for (const auto& p : video_positions(2, h, w)) video_hw.insert({p.h, p.w});
  for (const auto& p : motion_positions(3, h, w)) CHECK_FALSE(video_hw.contains({p.h, p.w}));
}

TEST_CASE("motion times hit every latent time for frames divisible by 4", "[rope][property]") {
  const std::int64_t frames = 17, t_lat = 5;
  std::set<double> video_t;
  for (const auto& p : video_positions(t_lat, 2, 2)) video_t.insert(p.t);
  for (const auto& p : motion_positions(frames, 2, 2)) {
    const double f = p.t * 4.0;
    if (std::fmod(f, 4.0) == 0.0) CHECK(video_t.contains(p.t));
  }
}

TEST_CASE("rotary table reproduces per-token rotation on every head", "[rope]") {
  RopeConfig cfg;
  const std::int64_t heads = 3, hl = 2, wl = 2;
  auto positions = video_positions(2, hl, wl);
  auto mp = motion_positions(2, hl, wl);
  positions.insert(positions.end(), mp.begin(), mp.end());
  for (bool collide : {false, true}) {
    RopeConfig c = cfg;
    c.collision_mode = collide;
    auto table = build_rotary_table<double>(positions, hl, wl, c);
    const auto n = static_cast<std::int64_t>(positions.size());
    Rng rng(6);
    auto x = Tensor<double>::from({n, heads * 16}, rng.normal_vector<double>(n * heads * 16));
    auto y = apply_rotary(x, table, heads);
    for (std::int64_t r = 0; r < n; ++r)
      for (std::int64_t hd = 0; hd < heads; ++hd) {
        std::vector<double> v(x.values().data() + r * heads * 16 + hd * 16, x.values().data() + r * heads * 16 + hd * 16 + 16);
        auto want = apply_mvs_rope<double>(v, positions[r], hl, wl, c);
        for (int i = 0; i < 16; ++i) CHECK(y[r * heads * 16 + hd * 16 + i] == Approx(want[i]).margin(1e-12));
      }
  }
}
