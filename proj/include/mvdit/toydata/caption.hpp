// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Templated captions: "a person in <attire> <action> [<side> [hand]] <tempo>
// on <background> background".

#pragma once

#include <string>
#include <vector>

#include "mvdit/toydata/render.hpp"

namespace mvdit::toydata {

namespace vocab {
inline constexpr std::uint16_t kPad = 0, kA = 1, kPerson = 2, kIn = 3;
inline constexpr std::uint16_t kAttireBase = 4;                              // 8 colours
inline constexpr std::uint16_t kActionBase = kAttireBase + kAttireColours;  // 6 actions
inline constexpr std::uint16_t kSlowly = kActionBase + kMotionKinds;
inline constexpr std::uint16_t kQuickly = kSlowly + 1, kStill = kSlowly + 2;
inline constexpr std::uint16_t kLeft = kSlowly + 3, kRight = kSlowly + 4, kHand = kSlowly + 5, kOn = kSlowly + 6;
inline constexpr std::uint16_t kBackgroundBase = kOn + 1;                                 // 4 backgrounds
inline constexpr std::uint16_t kBackgroundWord = kBackgroundBase + kBackgrounds;
inline constexpr std::uint16_t kSize = kBackgroundWord + 1;
}  // namespace vocab

inline constexpr std::size_t kMaxCaption = 16;

inline std::uint16_t action_token(MotionKind k) {
  return static_cast<std::uint16_t>(vocab::kActionBase + static_cast<int>(k));
}

inline std::vector<std::uint16_t> gen_caption(MotionKind kind, std::uint64_t seed) {
  using namespace vocab;
  const auto style = style_for(seed);
  const auto p = clip_params(kind, seed);
  std::vector<std::uint16_t> ids = {kA, kPerson, kIn, static_cast<std::uint16_t>(kAttireBase + style.attire),
                                    action_token(kind)};
  const auto side = p.side > 0 ? kLeft : kRight;
  switch (kind) {
    case MotionKind::Wave: ids.insert(ids.end(), {side, kHand}); break;
    case MotionKind::Walk:
    case MotionKind::Spin: ids.push_back(side); break;
    default: break;
  }
  ids.push_back(kind == MotionKind::Idle ? kStill : (p.quick ? kQuickly : kSlowly));
  ids.insert(ids.end(), {kOn, static_cast<std::uint16_t>(kBackgroundBase + style.background), kBackgroundWord});
  return ids;
}

inline std::string caption_text(const std::vector<std::uint16_t>& ids) {
  static const std::vector<std::string> words = {
      "<pad>", "a", "person", "in", "white", "magenta", "cyan", "orange", "pink", "brown", "grey", "violet",
      "waves", "walks", "squats", "spins", "jumps", "stands", "slowly", "quickly", "still", "left", "right",
      "hand", "on", "black", "navy", "green", "maroon", "background"};
  static_assert(vocab::kSize == 30);
  std::string out;
  for (auto id : ids) {
    if (!out.empty()) out += ' ';
    out += id < words.size() ? words[id] : "<unk>";
  }
  return out;
}

// Fixed-length model input: ids padded with PAD to len.
inline std::vector<std::int64_t> pad_caption(const std::vector<std::uint16_t>& ids, std::size_t len) {
  if (ids.size() > len) throw ToyDataError("caption longer than the text length");
  std::vector<std::int64_t> out(len, vocab::kPad);
  std::copy(ids.begin(), ids.end(), out.begin());
  return out;
}

}  // namespace mvdit::toydata
