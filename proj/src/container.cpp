// Copyright (c) 2026 The lreid Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lreid/container.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lreid {

static_assert(std::endian::native == std::endian::little,
              "container encoding assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'A', 'S', 'A'};

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (len > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    len -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == len_; }

 private:
  void need(std::size_t n) const {
    if (len_ - pos_ < n) throw FormatError("container truncated");
  }
  const std::uint8_t* data_;
  std::size_t len_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t NamedArray::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

const NamedArray* NamedArrays::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::size_t NamedArrays::payload_bytes() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.data.size() * sizeof(float);
  return n;
}

std::vector<std::uint8_t> encode(const NamedArrays& arrays) {
  std::vector<std::uint8_t> header;
  Writer hw(header);
  hw.put_str(arrays.arch_id);
  hw.put<std::uint32_t>(static_cast<std::uint32_t>(arrays.meta.size()));
  for (const auto& [k, v] : arrays.meta) {
    hw.put_str(k);
    hw.put_str(v);
  }
  hw.put<std::uint32_t>(static_cast<std::uint32_t>(arrays.entries.size()));
  std::uint64_t offset = 0;
  for (const auto& e : arrays.entries) {
    if (e.element_count() != e.data.size()) {
      throw FormatError("entry '" + e.name + "' shape does not match its data length");
    }
    hw.put_str(e.name);
    hw.put<std::uint8_t>(0);
    hw.put<std::uint8_t>(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) hw.put<std::uint32_t>(d);
    hw.put<std::uint64_t>(offset);
    offset += e.data.size() * sizeof(float);
  }

  std::vector<std::uint8_t> payload;
  payload.reserve(offset);
  for (const auto& e : arrays.entries) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(e.data.data());
    payload.insert(payload.end(), p, p + e.data.size() * sizeof(float));
  }

  std::vector<std::uint8_t> out;
  out.reserve(32 + header.size() + payload.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  Writer w(out);
  w.put<std::uint32_t>(NamedArrays::kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  w.put<std::uint32_t>(crc32_of(header.data(), header.size()));
  w.put<std::uint64_t>(payload.size());
  w.put<std::uint32_t>(crc32_of(payload.data(), payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

NamedArrays decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic: not a DASA container");
  }
  Reader r(bytes.data() + 4, bytes.size() - 4);
  const auto version = r.get<std::uint32_t>();
  if (version != NamedArrays::kVersion) {
    throw FormatError("unsupported container version " + std::to_string(version));
  }
  const auto header_len = r.get<std::uint32_t>();
  const std::size_t header_start = 4 + r.pos();
  if (bytes.size() - header_start < header_len) throw FormatError("container truncated");
  const std::uint8_t* header = bytes.data() + header_start;
  Reader tail(header + header_len, bytes.size() - header_start - header_len);
  const auto header_crc = tail.get<std::uint32_t>();
  if (crc32_of(header, header_len) != header_crc) {
    throw FormatError("header checksum mismatch");
  }
  const auto payload_len = tail.get<std::uint64_t>();
  const auto payload_crc = tail.get<std::uint32_t>();
  const std::size_t payload_start = header_start + header_len + tail.pos();
  if (bytes.size() - payload_start < payload_len) throw FormatError("container truncated");
  if (bytes.size() - payload_start > payload_len) throw FormatError("trailing bytes after payload");
  const std::uint8_t* payload = bytes.data() + payload_start;
  if (crc32_of(payload, payload_len) != payload_crc) {
    throw FormatError("payload checksum mismatch");
  }

  NamedArrays out;
  Reader hr(header, header_len);
  out.arch_id = hr.get_str();
  const auto n_meta = hr.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = hr.get_str();
    out.meta[k] = hr.get_str();
  }
  const auto n_entries = hr.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    NamedArray e;
    e.name = hr.get_str();
    if (hr.get<std::uint8_t>() != 0) throw FormatError("unsupported dtype in '" + e.name + "'");
    const auto ndim = hr.get<std::uint8_t>();
    for (int d = 0; d < ndim; ++d) e.shape.push_back(hr.get<std::uint32_t>());
    const auto offset = hr.get<std::uint64_t>();
    const std::size_t nbytes = e.element_count() * sizeof(float);
    if (offset > payload_len || payload_len - offset < nbytes) {
      throw FormatError("entry '" + e.name + "' points outside the payload");
    }
    e.data.resize(e.element_count());
    std::memcpy(e.data.data(), payload + offset, nbytes);
    out.entries.push_back(std::move(e));
  }
  if (!hr.done()) throw FormatError("unexpected bytes at end of header");
  return out;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace lreid
