// Copyright 2026 The hrtfxai Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hrtfxai {

// Flat `key = value` text files. Blank lines and `#` comments are skipped.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::filesystem::path& path);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

double parse_double(std::string_view s, std::string_view what);
std::int64_t parse_int(std::string_view s, std::string_view what);

// Shortest text that parses back to the same double.
std::string format_double(double v);

std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::uint8_t> data);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// splitmix64-seeded xoshiro256**. Fixed algorithm so sampling is identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

// Little-endian binary helpers for the on-disk containers.
namespace le {

void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);
void put_f64(std::string& out, double v);
std::uint32_t get_u32(const char* p);
float get_f32(const char* p);
double get_f64(const char* p);

}  // namespace le

// Framed container shared by all binary outputs: 8-byte magic, u32 LE JSON
// length, UTF-8 JSON, then a raw payload.
struct Frame {
  std::string json;
  std::string_view payload;
};

std::string make_frame(std::string_view magic, std::string_view json, std::string_view payload);
// Throws MagicMismatch / TruncatedPayload. The returned payload views `bytes`.
Frame parse_frame(std::string_view bytes, std::string_view magic, const std::string& source);

}  // namespace hrtfxai
