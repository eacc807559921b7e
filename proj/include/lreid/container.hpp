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

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lreid {

/// Raised for malformed, truncated or corrupted containers.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedArray {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  std::size_t element_count() const;
  bool operator==(const NamedArray&) const = default;
};

/// Named f32 array container shared by weight files and domain snapshots.
///
/// Layout (all integers little-endian):
///   "DASA" | u32 version | u32 header_len | header | u32 header_crc
///   | u64 payload_len | u32 payload_crc | payload
/// header: str arch_id, u32 n_meta, n_meta x (str key, str value),
///         u32 n_entries, n_entries x (str name, u8 dtype, u8 ndim,
///         ndim x u32 dim, u64 offset)
/// str = u32 length + bytes. dtype 0 = f32 little-endian. Offsets index
/// into the payload. Both CRC32 values use the zlib polynomial.
struct NamedArrays {
  static constexpr std::uint32_t kVersion = 1;

  std::string arch_id;
  std::map<std::string, std::string> meta;
  std::vector<NamedArray> entries;

  const NamedArray* find(const std::string& name) const;
  std::size_t payload_bytes() const;
  bool operator==(const NamedArrays&) const = default;
};

std::vector<std::uint8_t> encode(const NamedArrays& arrays);
/// Throws FormatError on bad magic, version mismatch, truncation or CRC failure.
NamedArrays decode(const std::vector<std::uint8_t>& bytes);

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::string& path);

}  // namespace lreid
