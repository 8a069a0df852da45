/*
 * Copyright 2026 The mia Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mia/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mia {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { little_endian(v); }
  void u64(std::uint64_t v) { little_endian(v); }
  void f64(double v) { little_endian(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  template <typename T>
  void little_endian(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint32_t u32() { return little_endian<std::uint32_t>(); }
  std::uint64_t u64() { return little_endian<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(little_endian<std::uint64_t>()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorCode::kTruncatedRecord, "checkpoint ends early");
  }
  template <typename T>
  T little_endian() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data) {
  Writer w;
  w.bytes(std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic)));
  w.u32(static_cast<std::uint32_t>(data.variant.size()));
  w.bytes(data.variant);
  w.u32(static_cast<std::uint32_t>(data.entries.size()));
  for (const auto& [name, t] : data.entries) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape().dims()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  const std::uint32_t crc = crc32(w.buffer());
  w.u32(crc);
  return std::move(w.buffer());
}

CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw Error(ErrorCode::kBadMagic, "not a checkpoint");
  }
  if (bytes.size() < sizeof(kCheckpointMagic) + 4) {
    throw Error(ErrorCode::kTruncatedRecord, "checkpoint has no checksum");
  }
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (crc32(body) != tail.u32()) throw Error(ErrorCode::kChecksumMismatch, "checkpoint corrupted");

  Reader r(body);
  r.bytes(sizeof(kCheckpointMagic));
  CheckpointData data;
  data.variant = r.bytes(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t e = 0; e < count; ++e) {
    std::string name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = static_cast<std::size_t>(r.u64());
    Shape shape(std::move(dims));
    if (r.remaining() / 8 < shape.numel()) {
      throw Error(ErrorCode::kTruncatedRecord, "checkpoint entry '" + name + "' truncated");
    }
    std::vector<double> values(shape.numel());
    for (double& v : values) v = r.f64();
    data.entries.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) throw Error(ErrorCode::kTruncatedRecord, "trailing bytes in checkpoint");
  return data;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  CheckpointData data;
  data.variant = std::string(to_string(model.variant));
  for (const auto& [name, t] : model.parameters) data.entries.emplace_back(name, t);
  const auto bytes = encode_checkpoint(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void load_checkpoint(const std::filesystem::path& path, Model& model) {
  CheckpointData data = read_checkpoint(path);
  if (data.variant != to_string(model.variant)) {
    throw Error(ErrorCode::kShapeMismatchOnLoad, "checkpoint variant '" + data.variant +
                                                     "' vs model variant '" +
                                                     std::string(to_string(model.variant)) + "'");
  }
  if (data.entries.size() != model.parameters.size()) {
    throw Error(ErrorCode::kShapeMismatchOnLoad, "checkpoint has " +
                                                     std::to_string(data.entries.size()) +
                                                     " entries, model has " +
                                                     std::to_string(model.parameters.size()));
  }
  for (auto& [name, t] : data.entries) {
    auto it = model.parameters.find(name);
    if (it == model.parameters.end() || !(it->second.shape() == t.shape())) {
      throw Error(ErrorCode::kShapeMismatchOnLoad, "parameter '" + name + "' does not match");
    }
  }
  for (auto& [name, t] : data.entries) model.parameters.at(name) = std::move(t);
}

}  // namespace mia
