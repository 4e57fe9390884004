// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <set>

#include "mvdit/toydata/dataset.hpp"

using namespace mvdit;
using namespace mvdit::toydata;

namespace {

double joint_displacement(const MotionClip& clip, int j) {
  double best = 0;
  const auto& ref = clip.frames.front().joints[j];
  for (const auto& f : clip.frames) {
    const double d = std::hypot(f.joints[j][0] - ref[0], f.joints[j][1] - ref[1], f.joints[j][2] - ref[2]);
    best = std::max(best, d);
  }
  return best;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mvdit_test_" + name)).string();
}

}  // namespace

TEST_CASE("motion generation is deterministic and validates frame counts", "[toydata]") {
  for (auto kind : kAllKinds) {
    CHECK(gen_motion_clip(kind, 7, 17) == gen_motion_clip(kind, 7, 17));
    CHECK_FALSE(gen_motion_clip(kind, 7, 17) == gen_motion_clip(kind, 8, 17));
  }
  CHECK_THROWS_AS(gen_motion_clip(MotionKind::Walk, 1, 16), ToyDataError);
  CHECK_THROWS_AS(gen_motion_clip(MotionKind::Walk, 1, 0), ToyDataError);
  CHECK(gen_motion_clip(MotionKind::Walk, 1, 1).frame_count() == 1);
}

TEST_CASE("idle clips hold a constant pose", "[toydata]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto clip = gen_motion_clip(MotionKind::Idle, seed, 17);
    for (int j = 0; j < kJoints; ++j) CHECK(joint_displacement(clip, j) < 1e-6);
  }
}

TEST_CASE("waving moves only the arm chain", "[toydata]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto clip = gen_motion_clip(MotionKind::Wave, seed, 17);
    bool arm_moved = false;
    for (int j = 0; j < kJoints; ++j) {
      const double d = joint_displacement(clip, j);
      if (is_arm_joint(j)) arm_moved |= d > 0.01;
      else CHECK(d <= 0.01);
    }
    CHECK(arm_moved);
  }
}

TEST_CASE("joint positions follow from the stored rotations", "[toydata]") {
  for (auto kind : kAllKinds) {
    auto clip = gen_motion_clip(kind, 3, 17);
    const auto offsets = shaped_offsets(clip.frames[0].beta);
    for (const auto& f : clip.frames) {
      CHECK(f.beta == clip.frames[0].beta);
      Pose pose;
      pose.orient = motion::rot6d_to_matrix(f.gamma);
      pose.root = Eigen::Vector3d(f.root[0], f.root[1], f.root[2]);
      for (int j = 0; j < kJoints; ++j) pose.local[j] = motion::rot6d_to_matrix(f.theta[j]);
      const auto pos = forward_kinematics(pose, offsets);
      for (int j = 0; j < kJoints; ++j) {
        for (int c = 0; c < 3; ++c) REQUIRE(pos[j][c] == Catch::Approx(f.joints[j][c]).margin(1e-5));
        // Rigid limbs: bone length constant over time.
        if (j > 0) {
          const int p = kParents[j];
          const double len = std::hypot(f.joints[j][0] - f.joints[p][0], f.joints[j][1] - f.joints[p][1],
                                        f.joints[j][2] - f.joints[p][2]);
          REQUIRE(len == Catch::Approx(offsets[j].norm()).margin(1e-5));
        }
      }
    }
  }
}

TEST_CASE("trajectories are smooth", "[toydata]") {
  for (auto kind : kAllKinds)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto clip = gen_motion_clip(kind, seed, 17);
      const double fps3 = std::pow(clip.fps, 3.0);
      for (std::size_t f = 3; f < clip.frames.size(); ++f)
        for (int j = 0; j < kJoints; ++j)
          for (int c = 0; c < 3; ++c) {
            const double d3 = clip.frames[f].joints[j][c] - 3.0 * clip.frames[f - 1].joints[j][c] +
                              3.0 * clip.frames[f - 2].joints[j][c] - clip.frames[f - 3].joints[j][c];
            REQUIRE(std::abs(d3) * fps3 < 2000.0);
          }
    }
}

TEST_CASE("the figure stays inside the rendered window", "[toydata]") {
  for (auto kind : kAllKinds)
    for (std::uint64_t seed = 0; seed < 20; ++seed)
      for (const auto& f : gen_motion_clip(kind, seed, 17).frames)
        for (const auto& p : f.joints) {
          REQUIRE(std::abs(p[0]) < kWorldHalfWidth);
          REQUIRE(p[1] > 0.0);
          REQUIRE(p[1] < kWorldHeight);
        }
}

TEST_CASE("rendering is deterministic and static for idle clips", "[toydata]") {
  auto idle = gen_motion_clip(MotionKind::Idle, 2, 9);
  auto v = render_clip(idle, style_for(2), 32, 32);
  const auto frame = static_cast<std::size_t>(32 * 32 * 3);
  for (std::int64_t f = 1; f < v.frames; ++f)
    CHECK(std::equal(v.rgb.begin(), v.rgb.begin() + frame, v.rgb.begin() + f * frame));
  CHECK(v == render_clip(idle, style_for(2), 32, 32));
  auto walk = gen_motion_clip(MotionKind::Walk, 2, 9);
  CHECK(render_clip(walk, style_for(2), 32, 32) == render_clip(walk, style_for(2), 32, 32));
  CHECK_THROWS_AS(render_clip(idle, style_for(2), 6, 32), ToyDataError);
  CHECK_THROWS_AS(render_clip(idle, style_for(2), 32, 30), ToyDataError);
}

TEST_CASE("centroid detection recovers projected bones within 2 px", "[toydata]") {
  double worst_mean = 0, worst_single = 0;
  for (std::uint64_t i = 0; i < 120; ++i) {
    auto r = make_record(kAllKinds[i % kMotionKinds], record_seed(99, i), {});
    auto e = centroid_tracking_error(r.video, r.motion, style_for(r.seed));
    CHECK(e.missing == 0);
    worst_mean = std::max(worst_mean, e.mean_px);
    worst_single = std::max(worst_single, e.max_px);
  }
  INFO("worst clip mean " << worst_mean << ", worst single group " << worst_single);
  CHECK(worst_mean <= 2.0);
  // Overlapping limbs can pull one group in one frame further off.
  CHECK(worst_single <= 4.0);
}

TEST_CASE("a video from another quadrant is far from the skeleton", "[toydata]") {
  // Same kind and style, different placement.
  ClipGeometry g;
  std::uint64_t a = 0, b = 1;
  while (clip_params(MotionKind::Idle, b).quadrant == clip_params(MotionKind::Idle, a).quadrant) ++b;
  auto ra = make_record(MotionKind::Idle, a, g);
  auto rb = make_record(MotionKind::Idle, b, g);
  CHECK(centroid_tracking_error(rb.video, ra.motion, style_for(b)).mean_px >= 8.0);
}

TEST_CASE("captions", "[toydata]") {
  std::set<std::uint16_t> actions;
  for (auto kind : kAllKinds) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto c = gen_caption(kind, seed);
      CHECK(c.size() <= kMaxCaption);
      CHECK(std::count(c.begin(), c.end(), action_token(kind)) == 1);
      for (auto id : c) {
        CHECK(id != vocab::kPad);
        CHECK(id < vocab::kSize);
      }
      CHECK(c == gen_caption(kind, seed));
    }
    actions.insert(action_token(kind));
  }
  CHECK(actions.size() == kMotionKinds);
  CHECK(vocab::kSize < 128);
  CHECK(caption_text(gen_caption(MotionKind::Wave, 0)).find("waves") != std::string::npos);

  // Every non-pad id appears somewhere in a 1000-record corpus.
  std::set<std::uint16_t> used;
  for (std::uint64_t i = 0; i < 1000; ++i)
    for (auto id : gen_caption(kAllKinds[i % kMotionKinds], record_seed(5, i))) used.insert(id);
  CHECK(used.size() == vocab::kSize - 1);

  auto padded = pad_caption({3, 4}, 5);
  CHECK(padded == std::vector<std::int64_t>{3, 4, 0, 0, 0});
  CHECK_THROWS_AS(pad_caption(std::vector<std::uint16_t>(17, 1), 16), ToyDataError);
}

TEST_CASE("record invariants", "[toydata]") {
  auto r = make_record(MotionKind::Jump, 11, {});
  CHECK(r.video.frames == r.motion.frame_count());
  CHECK(r.video.fps == r.motion.fps);
  CHECK(r.video == render_clip(r.motion, style_for(11), 32, 32));
  CHECK(r == make_record(MotionKind::Jump, 11, {}));
  auto corpus = generate_corpus(12, 4, {});
  for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(corpus[i].kind == kAllKinds[i % kMotionKinds]);
  CHECK(dataset_stats(corpus) == dataset_stats(generate_corpus(12, 4, {})));
}

TEST_CASE("dataset round trip", "[toydata]") {
  auto records = generate_corpus(10, 21, {});
  const auto path = temp_path("roundtrip.hmvd");
  write_dataset(records, path);
  auto back = read_dataset(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == records[i]);
  CHECK(encode_dataset(back) == read_file(path));

  auto bytes = read_file(path);
  CHECK(bytes.substr(0, 4) == "HMVD");
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_dataset(bad), DatasetFormatError);
  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_AS(decode_dataset(bad), DatasetFormatError);
  CHECK_THROWS_AS(decode_dataset(bytes.substr(0, bytes.size() - 3)), DatasetFormatError);
  CHECK_THROWS_AS(decode_dataset(bytes + "x"), DatasetFormatError);
  std::filesystem::remove(path);
}

TEST_CASE("large file preserves record order", "[toydata]") {
  ClipGeometry small{5, 8, 8, 16};
  auto records = generate_corpus(1000, 77, small);
  const auto path = temp_path("order.hmvd");
  write_dataset(records, path);
  auto back = read_dataset(path);
  REQUIRE(back.size() == 1000);
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].seed == record_seed(77, i));
    REQUIRE(back[i].kind == kAllKinds[i % kMotionKinds]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("records convert to training examples", "[toydata]") {
  auto records = generate_corpus(3, 8, {});
  auto stats = dataset_stats(records);
  auto ex = to_train_examples(records, stats, 4, 16);
  REQUIRE(ex.size() == 3);
  CHECK(ex[1].id == 1);
  CHECK(ex[0].frames == 17);
  CHECK(ex[0].grid == video::LatentGeometry{5, 8, 8});
  CHECK(ex[0].video.size() == 320u * video::patch_dim(4));
  CHECK(ex[0].motion.size() == 17u * motion::kFrameParams);
  CHECK(ex[0].text.size() == 16);
  CHECK(ex[0].text.back() == vocab::kPad);
  auto back = motion::denormalize(ex[2].motion, stats, 16);
  for (std::size_t f = 0; f < back.frames.size(); ++f)
    for (int j = 0; j < kJoints; ++j)
      for (int c = 0; c < 3; ++c)
        CHECK(back.frames[f].joints[j][c] == Catch::Approx(records[2].motion.frames[f].joints[j][c]).margin(1e-5));
}
