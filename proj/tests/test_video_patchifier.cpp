// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "mvdit/numerics/gradcheck.hpp"
#include "mvdit/video/patchifier.hpp"

using namespace mvdit;
using namespace mvdit::video;

namespace {

VideoClip random_video(std::int64_t f, std::int64_t h, std::int64_t w, std::uint64_t seed) {
  VideoClip clip{f, h, w, 16, {}};
  Rng rng(seed);
  clip.rgb.resize(static_cast<std::size_t>(f * h * w * 3));
  for (auto& b : clip.rgb) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return clip;
}

// Count tokens by walking frames and patches the slow way.
std::int64_t enumerate_tokens(std::int64_t f, std::int64_t h, std::int64_t w, std::int64_t s) {
  std::int64_t count = 0;
  for (std::int64_t frame = 0; frame < f; ++frame) {
    if (frame != 0 && frame % 4 != 0) continue;  // one latent per group's last frame
    for (std::int64_t y = 0; y < h; y += s)
      for (std::int64_t x = 0; x < w; x += s) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("video token counts", "[video]") {
  CHECK(video_token_count(81, 480, 832, 16) == 32760);
  CHECK(video_token_count(1, 16, 16, 4) == 16);
  CHECK(video_token_count(17, 32, 32, 4) == enumerate_tokens(17, 32, 32, 4));
  CHECK(video_token_count(17, 32, 32, 4) == 320);
  CHECK(patchify(random_video(17, 32, 32, 1), 4).grid.tokens() == 320);
}

TEST_CASE("video geometry preconditions", "[video]") {
  CHECK_THROWS_AS(video_token_count(80, 480, 832, 16), VideoError);
  CHECK_THROWS_AS(video_token_count(81, 470, 832, 16), VideoError);
  CHECK_THROWS_AS(video_token_count(81, 480, 832, 0), VideoError);
  CHECK_THROWS_AS(video_token_count(0, 16, 16, 4), VideoError);
  auto clip = random_video(5, 8, 8, 2);
  clip.rgb.pop_back();
  CHECK_THROWS_AS(patchify(clip, 4), VideoError);
}

TEST_CASE("patchify round trip is bit-exact", "[video]") {
  for (auto [f, h, w, s] : std::vector<std::array<std::int64_t, 4>>{{1, 8, 8, 4}, {5, 8, 12, 4}, {9, 16, 8, 2}}) {
    auto clip = random_video(f, h, w, static_cast<std::uint64_t>(f * 100 + h));
    auto p = patchify(clip, s);
    CHECK(p.dim == 3 * 4 * s * s);
    CHECK(unpatchify(p.values, p.grid, s, clip.fps) == clip);
  }
}

TEST_CASE("every byte maps into [-1, 1]", "[video]") {
  CHECK(byte_to_unit(0) == -1.0f);
  CHECK(byte_to_unit(255) == 1.0f);
  for (int b = 0; b < 256; ++b) CHECK(unit_to_byte(byte_to_unit(static_cast<std::uint8_t>(b))) == b);
}

TEST_CASE("constant-colour clip gives identical patch vectors", "[video]") {
  VideoClip clip{9, 8, 8, 16, std::vector<std::uint8_t>(9 * 8 * 8 * 3)};
  for (std::size_t i = 0; i < clip.rgb.size(); ++i) clip.rgb[i] = static_cast<std::uint8_t>(i % 3 == 0 ? 200 : 17 * (i % 3));
  auto p = patchify(clip, 4);
  for (std::int64_t t = 1; t < p.grid.tokens(); ++t)
    for (std::int64_t c = 0; c < p.dim; ++c) CHECK(p.values[t * p.dim + c] == p.values[c]);
}

TEST_CASE("latent frame 1 of a 5-frame clip holds frames 1..4", "[video]") {
  auto clip = random_video(5, 4, 4, 7);
  const std::int64_t s = 2;
  auto p = patchify(clip, s);
  REQUIRE(p.grid.t == 2);
  for (std::int64_t k = 0; k < 2; ++k)
    for (std::int64_t ph = 0; ph < 2; ++ph)
      for (std::int64_t pw = 0; pw < 2; ++pw) {
        const auto token = (k * 2 + ph) * 2 + pw;
        std::int64_t c = 0;
        for (std::int64_t g = 0; g < 4; ++g)
          for (std::int64_t y = 0; y < s; ++y)
            for (std::int64_t x = 0; x < s; ++x)
              for (int ch = 0; ch < 3; ++ch, ++c) {
                const auto frame = k == 0 ? 0 : g + 1;
                CHECK(p.values[token * p.dim + c] == byte_to_unit(clip.at(frame, ph * s + y, pw * s + x, ch)));
              }
      }
}

TEST_CASE("frame 0 is recovered from its replicas", "[video]") {
  auto clip = random_video(1, 4, 4, 8);
  auto p = patchify(clip, 2);
  // Perturb replicas symmetrically; the mean stays on the original byte.
  for (std::int64_t t = 0; t < p.grid.tokens(); ++t)
    for (std::int64_t c = 0; c < 12; ++c) {
      p.values[t * p.dim + c] += 0.001f;
      p.values[t * p.dim + 12 + c] -= 0.001f;
    }
  CHECK(unpatchify(p.values, p.grid, 2) == clip);
}

TEST_CASE("patch embedding", "[video][embed]") {
  const std::int64_t s = 2, dim = patch_dim(s);
  auto p = patchify(random_video(5, 4, 4, 9), s);
  auto patches = Tensor<float>::from({p.grid.tokens(), dim}, p.values);

  SECTION("identity projection") {
    Buffer<float> eye(static_cast<std::size_t>(dim * dim), 0.0f);
    for (std::int64_t i = 0; i < dim; ++i) eye[i * dim + i] = 1.0f;
    Linear<float> in{Tensor<float>::from({dim, dim}, eye), Tensor<float>::zeros({dim})};
    CHECK(embed_patches(patches, in).values() == patches.values());
  }
  SECTION("zero projection") {
    Linear<float> in{Tensor<float>::zeros({dim, 8}), Tensor<float>::zeros({8})};
    for (auto v : embed_patches(patches, in).values()) CHECK(v == 0.0f);
  }
  SECTION("shape mismatch") {
    Linear<float> in{Tensor<float>::zeros({dim - 1, 8}), Tensor<float>::zeros({8})};
    CHECK_THROWS_AS(embed_patches(patches, in), ShapeError);
    CHECK_THROWS_AS(unembed(Tensor<float>::zeros({3, 7}), in), ShapeError);
  }
}

TEST_CASE("embed/unembed gradients match finite differences", "[video][gradcheck]") {
  ParameterSet<double> ps(5);
  const std::int64_t dim = patch_dim(1);
  auto in = Linear<double>::make(ps, "video.patch_in", dim, 6, Branch::Video);
  auto out = Linear<double>::make(ps, "video.patch_out", 6, dim, Branch::Video);
  Rng rng(3);
  auto x = Tensor<double>::from({5, dim}, rng.normal_vector<double>(5 * dim));
  auto w = Tensor<double>::from({5, dim}, rng.normal_vector<double>(5 * dim));
  auto loss = [&] { return sum(mul(unembed(gelu(embed_patches(x, in)), out), w)); };
  auto params = ps.tensors();
  auto grads = gradients(loss(), params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto numeric = finite_diff_grad_inplace<double>([&] { return loss().item(); }, params[i], 1e-6);
    CHECK(max_relative_error(grads[i], numeric, 1e-4) < 1e-6);
  }
}
