// Copyright (c) 2026, The mvdit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Paired records (motion, rendered video, caption) and the HMVD container:
//   "HMVD" | u32 version | u64 count | records...
//   record: u32 F, H, W, fps, kind | u64 seed | u32 caption length |
//           f32[F*235] motion | u8[F*H*W*3] rgb | u16[len] caption
// All integers and floats little-endian.

#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "mvdit/motion/motion_codec.hpp"
#include "mvdit/toydata/caption.hpp"
#include "mvdit/training/trainer.hpp"

namespace mvdit::toydata {

struct ClipGeometry {
  std::int64_t frames = 17;
  std::int64_t height = 32;
  std::int64_t width = 32;
  int fps = 16;
};

struct DatasetRecord {
  MotionKind kind = MotionKind::Idle;
  std::uint64_t seed = 0;
  MotionClip motion;
  VideoClip video;
  std::vector<std::uint16_t> caption;

  bool operator==(const DatasetRecord&) const = default;
};

inline DatasetRecord make_record(MotionKind kind, std::uint64_t seed, const ClipGeometry& g, std::int64_t stride = 4) {
  DatasetRecord r;
  r.kind = kind;
  r.seed = seed;
  r.motion = gen_motion_clip(kind, seed, g.frames, g.fps);
  r.video = render_clip(r.motion, style_for(seed), g.height, g.width, stride);
  r.caption = gen_caption(kind, seed);
  return r;
}

// Record i has kind i mod 6 and a seed derived from (seed, i).
inline std::uint64_t record_seed(std::uint64_t seed, std::uint64_t index) { return derive_seed(seed, index, 0x7d); }

inline std::vector<DatasetRecord> generate_corpus(std::size_t count, std::uint64_t seed, const ClipGeometry& g,
                                                  std::int64_t stride = 4, std::size_t first = 0) {
  std::vector<DatasetRecord> out;
  out.reserve(count);
  for (std::size_t i = first; i < first + count; ++i)
    out.push_back(make_record(kAllKinds[i % kMotionKinds], record_seed(seed, i), g, stride));
  return out;
}

class DatasetFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kDatasetMagic[4] = {'H', 'M', 'V', 'D'};
inline constexpr std::uint32_t kDatasetVersion = 1;

namespace detail {

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float f) { put_le(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class U>
  U le() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DatasetFormatError("truncated dataset payload");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_dataset(const std::vector<DatasetRecord>& records) {
  std::string out(kDatasetMagic, 4);
  detail::put_le<std::uint32_t>(out, kDatasetVersion);
  detail::put_le<std::uint64_t>(out, records.size());
  for (const auto& r : records) {
    if (r.video.frames != r.motion.frame_count() || r.video.fps != r.motion.fps)
      throw ToyDataError("record video and motion disagree on frames or fps");
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.motion.frame_count()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.video.height));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.video.width));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.motion.fps));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.kind));
    detail::put_le<std::uint64_t>(out, r.seed);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.caption.size()));
    for (float v : motion::clip_to_array(r.motion)) detail::put_f32(out, v);
    out.append(reinterpret_cast<const char*>(r.video.rgb.data()), r.video.rgb.size());
    for (auto id : r.caption) detail::put_le<std::uint16_t>(out, id);
  }
  return out;
}

inline std::vector<DatasetRecord> decode_dataset(const std::string& bytes) {
  detail::Reader in(bytes);
  char magic[4];
  in.raw(magic, 4);
  if (std::memcmp(magic, kDatasetMagic, 4) != 0) throw DatasetFormatError("bad dataset magic");
  const auto version = in.le<std::uint32_t>();
  if (version != kDatasetVersion) throw DatasetFormatError("unsupported dataset version " + std::to_string(version));
  const auto count = in.le<std::uint64_t>();
  std::vector<DatasetRecord> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    DatasetRecord r;
    const std::int64_t f = in.le<std::uint32_t>(), h = in.le<std::uint32_t>(), w = in.le<std::uint32_t>();
    const int fps = static_cast<int>(in.le<std::uint32_t>());
    r.kind = kind_from_index(in.le<std::uint32_t>());
    r.seed = in.le<std::uint64_t>();
    const auto len = in.le<std::uint32_t>();
    const auto motion_bytes = static_cast<std::size_t>(f) * motion::kFrameParams * 4;
    const auto rgb_bytes = static_cast<std::size_t>(f * h * w * 3);
    if (in.remaining() < motion_bytes + rgb_bytes + 2ull * len) throw DatasetFormatError("truncated dataset payload");
    std::vector<float> m(static_cast<std::size_t>(f) * motion::kFrameParams);
    for (auto& v : m) v = in.f32();
    r.motion = motion::array_to_clip(m, fps);
    r.video.frames = f;
    r.video.height = h;
    r.video.width = w;
    r.video.fps = fps;
    r.video.rgb.resize(rgb_bytes);
    in.raw(r.video.rgb.data(), rgb_bytes);
    r.caption.resize(len);
    for (auto& id : r.caption) id = in.le<std::uint16_t>();
    out.push_back(std::move(r));
  }
  if (!in.done()) throw DatasetFormatError("trailing bytes after the last record");
  return out;
}

inline void write_dataset(const std::vector<DatasetRecord>& records, const std::string& path) {
  const auto bytes = encode_dataset(records);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::vector<DatasetRecord> read_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

inline motion::MotionStats dataset_stats(const std::vector<DatasetRecord>& records) {
  std::vector<MotionClip> clips;
  clips.reserve(records.size());
  for (const auto& r : records) clips.push_back(r.motion);
  return motion::compute_stats(clips);
}

// Model-ready example: normalized motion, patchified video, padded caption.
inline training::TrainExample to_train_example(const DatasetRecord& r, std::uint64_t id, const motion::MotionStats& stats,
                                               std::int64_t stride, std::size_t text_len) {
  training::TrainExample e;
  e.id = id;
  e.frames = r.motion.frame_count();
  e.motion = motion::normalize<float>(r.motion, stats);
  auto p = video::patchify(r.video, stride);
  e.grid = p.grid;
  e.video = std::move(p.values);
  e.text = pad_caption(r.caption, text_len);
  return e;
}

inline std::vector<training::TrainExample> to_train_examples(const std::vector<DatasetRecord>& records,
                                                             const motion::MotionStats& stats, std::int64_t stride,
                                                             std::size_t text_len) {
  std::vector<training::TrainExample> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) out.push_back(to_train_example(records[i], i, stats, stride, text_len));
  return out;
}

}  // namespace mvdit::toydata
