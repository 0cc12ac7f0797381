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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "hrtfxai/error.hpp"
#include "hrtfxai/util.hpp"

using namespace hrtfxai;

TEST(KeyValues, ParsesCommentsAndWhitespace) {
  const auto kv = parse_key_values("# header\n a = 1 \n\nname=two words\n");
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("name"), "two words");
  EXPECT_EQ(kv.size(), 2u);
}

TEST(KeyValues, RejectsDuplicatesAndMissingEquals) {
  EXPECT_THROW(parse_key_values("a = 1\na = 2\n"), DataError);
  EXPECT_THROW(parse_key_values("just text\n"), DataError);
}

TEST(Numbers, ParseAndFormat) {
  EXPECT_DOUBLE_EQ(parse_double(" 2.5 ", "x"), 2.5);
  EXPECT_THROW(parse_double("2.5x", "x"), DataError);
  EXPECT_EQ(parse_int("-7", "n"), -7);
  EXPECT_THROW(parse_int("7.0", "n"), DataError);
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -123456.789, 22050.0}) {
    EXPECT_EQ(parse_double(format_double(v), "v"), v);
  }
  EXPECT_EQ(format_double(22050.0), "22050");
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Rng, DeterministicAndBounded) {
  Rng a(5), b(5), c(6);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
  Rng r(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const auto k = r.below(7);
    ASSERT_LT(k, 7u);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, NormalMoments) {
  Rng r(3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Frame, RoundTripAndErrors) {
  const std::string bytes = make_frame("TESTMAG1", "{\"k\":1}", std::string("\x01\x02\x03", 3));
  const Frame f = parse_frame(bytes, "TESTMAG1", "mem");
  EXPECT_EQ(f.json, "{\"k\":1}");
  EXPECT_EQ(f.payload.size(), 3u);
  EXPECT_THROW(parse_frame(bytes, "OTHERMAG", "mem"), MagicMismatch);
  EXPECT_THROW(parse_frame(bytes.substr(0, 14), "TESTMAG1", "mem"), TruncatedPayload);
  EXPECT_THROW(parse_frame("TEST", "TESTMAG1", "mem"), FormatError);
}

TEST(LittleEndian, RoundTrip) {
  std::string out;
  le::put_u32(out, 0x01020304u);
  le::put_f32(out, 1.5f);
  le::put_f64(out, -2.25);
  ASSERT_EQ(out.size(), 16u);
  EXPECT_EQ(static_cast<unsigned char>(out[0]), 0x04);
  EXPECT_EQ(le::get_u32(out.data()), 0x01020304u);
  EXPECT_EQ(le::get_f32(out.data() + 4), 1.5f);
  EXPECT_EQ(le::get_f64(out.data() + 8), -2.25);
}

TEST(Files, WriteCreatesParents) {
  const auto dir = std::filesystem::temp_directory_path() / "hrtfxai_util_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_file(dir / "a.txt", "hello");
  EXPECT_EQ(read_file(dir / "a.txt"), "hello");
  EXPECT_THROW(read_file(dir / "missing.txt"), DataError);
  std::filesystem::remove_all(dir.parent_path());
}

TEST(Errors, ExitCodes) {
  EXPECT_EQ(exit_code_for(UsageError("x")), 2);
  EXPECT_EQ(exit_code_for(DataError("x")), 3);
  EXPECT_EQ(exit_code_for(MagicMismatch("x")), 3);
  EXPECT_EQ(exit_code_for(NumericalError("x")), 4);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 1);
}
