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

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <set>

#include "hrtfxai/dataset.hpp"
#include "hrtfxai/error.hpp"
#include "hrtfxai/util.hpp"

using namespace hrtfxai;
namespace fs = std::filesystem;

namespace {

SubjectRecord make_record(const std::string& id, std::size_t n_dirs = 3, std::size_t n = 16) {
  SubjectRecord r;
  r.subject_id = id;
  r.dataset_id = "unit";
  r.sample_rate_hz = 48000.0;
  r.n_samples = n;
  Rng rng(std::hash<std::string>{}(id));
  for (std::size_t d = 0; d < n_dirs; ++d) {
    r.directions.push_back({{static_cast<double>(d) * 40.0 - 40.0, static_cast<double>(d) * 10.0},
                            d == 0 ? std::optional<double>(1.2) : std::nullopt});
  }
  r.irs.resize(n_dirs * 2 * n);
  for (auto& v : r.irs) v = static_cast<float>(rng.normal());
  return r;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hrtfxai_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

HrtfSample sample_with(const std::string& subject, double value, std::size_t bins) {
  HrtfSample s;
  s.subject_id = subject;
  s.dataset_id = "unit";
  s.ipsi.assign(bins, value);
  s.contra.assign(bins, -value);
  s.freq_axis = AxisSpec::linear((bins - 1) * 2, 44100);
  s.direction = Direction::from_vertical({value, 0.0});
  s.preproc = "abc";
  return s;
}

}  // namespace

TEST(Hrd, RoundTripIsExact) {
  const auto rec = make_record("S7");
  const auto back = decode_subject(encode_subject(rec));
  EXPECT_EQ(back.subject_id, "S7");
  EXPECT_EQ(back.dataset_id, "unit");
  EXPECT_EQ(back.sample_rate_hz, 48000.0);
  EXPECT_EQ(back.irs, rec.irs);
  ASSERT_EQ(back.n_directions(), 3u);
  EXPECT_EQ(back.directions[0].distance_m, 1.2);
  EXPECT_FALSE(back.directions[1].distance_m.has_value());
  EXPECT_EQ(back.directions[2].position.elevation_deg, 20.0);
}

TEST(Hrd, FileRoundTrip) {
  const auto dir = temp_dir("hrd");
  const auto rec = make_record("S1");
  write_subject(rec, dir / "s1.hrd");
  EXPECT_EQ(read_subject(dir / "s1.hrd").irs, rec.irs);
  EXPECT_THROW(read_subject(dir / "missing.hrd"), DataError);
}

TEST(Hrd, CorruptionIsDetected) {
  const std::string bytes = encode_subject(make_record("S2"));
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_subject(bad_magic), MagicMismatch);
  EXPECT_THROW(decode_subject(bytes.substr(0, bytes.size() - 4)), TruncatedPayload);
  EXPECT_THROW(decode_subject(bytes + "abcd"), FormatError);
  EXPECT_THROW(decode_subject(bytes.substr(0, 10)), FormatError);

  std::string nan_bytes = bytes;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan_bytes.data() + nan_bytes.size() - 4, &nan, 4);
  EXPECT_THROW(decode_subject(nan_bytes), NonFiniteValue);
}

TEST(Hrd, MalformedMetadataIsFormatError) {
  const std::string json = R"({"subject_id": "S", "dataset_id": "d"})";
  EXPECT_THROW(decode_subject(make_frame(kHrdMagic, json, "")), FormatError);
  EXPECT_THROW(decode_subject(make_frame(kHrdMagic, "{not json", "")), FormatError);
}

TEST(Hrd, ValidateRejectsInconsistentShapes) {
  auto rec = make_record("S3");
  rec.irs.pop_back();
  EXPECT_THROW(rec.validate(), ShapeMismatch);
  auto empty = make_record("S4", 0);
  EXPECT_THROW(empty.validate(), DataError);
}

TEST(Hrd, ToHrirsSplitsEars) {
  const auto rec = make_record("S5", 2, 4);
  const auto hrirs = rec.to_hrirs();
  ASSERT_EQ(hrirs.size(), 2u);
  EXPECT_EQ(hrirs[1].left[2], static_cast<double>(rec.ir(1, 0)[2]));
  EXPECT_EQ(hrirs[1].right[3], static_cast<double>(rec.ir(1, 1)[3]));
  EXPECT_EQ(hrirs[0].sample_rate_hz, 48000.0);
  EXPECT_EQ(hrirs[0].direction.source_distance_m, 1.2);
}

TEST(Manifest, RelativePathsResolveAndHeaderIsOptional) {
  const auto dir = temp_dir("manifest");
  write_file(dir / "m.csv", "subject_id,path,dataset_id\nA, a.hrd ,ds1\n\nB,/abs/b.hrd,ds2\n");
  const auto rows = read_manifest(dir / "m.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].path, dir / "a.hrd");
  EXPECT_EQ(rows[1].path, fs::path("/abs/b.hrd"));
  EXPECT_EQ(rows[1].dataset_id, "ds2");

  write_file(dir / "n.csv", "A,a.hrd,ds1\n");
  EXPECT_EQ(read_manifest(dir / "n.csv").size(), 1u);
  write_file(dir / "bad.csv", "A,a.hrd\n");
  EXPECT_THROW(read_manifest(dir / "bad.csv"), DataError);

  write_manifest(rows, dir / "out.csv");
  EXPECT_EQ(read_manifest(dir / "out.csv")[1].subject_id, "B");
}

TEST(Split, SizesFollowRounding) {
  EXPECT_EQ(split_sizes(40, {}), (std::array<std::size_t, 3>{32, 4, 4}));
  EXPECT_EQ(split_sizes(10, {}), (std::array<std::size_t, 3>{8, 1, 1}));
  EXPECT_EQ(split_sizes(3, {}), (std::array<std::size_t, 3>{1, 1, 1}));
  EXPECT_EQ(split_sizes(45, {}), (std::array<std::size_t, 3>{36, 5, 4}));
  EXPECT_THROW(split_sizes(2, {}), DataError);
  EXPECT_THROW(split_sizes(10, {0.5, 0.5, 0.5, 0}), UsageError);
}

TEST(Split, DisjointCoveringAndDeterministic) {
  std::vector<std::string> ids;
  for (int i = 0; i < 40; ++i) ids.push_back("S" + std::to_string(100 + i));
  const auto a = split_subjects(ids, {0.8, 0.1, 0.1, 7});
  std::vector<std::string> reversed(ids.rbegin(), ids.rend());
  const auto b = split_subjects(reversed, {0.8, 0.1, 0.1, 7});
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::set<std::string> all(a.train.begin(), a.train.end());
  all.insert(a.val.begin(), a.val.end());
  all.insert(a.test.begin(), a.test.end());
  EXPECT_EQ(all.size(), 40u);
  const auto c = split_subjects(ids, {0.8, 0.1, 0.1, 8});
  EXPECT_NE(a.train, c.train);
  ids.push_back("S100");
  EXPECT_THROW(split_subjects(ids, {}), DataError);
}

TEST(Combined, DrawsRoundedFractionPerDataset) {
  const auto idx = combined_indices({100, 35, 4}, {0.1, 3});
  std::array<std::size_t, 3> per{};
  std::set<std::pair<std::size_t, std::size_t>> seen(idx.begin(), idx.end());
  for (const auto& [d, i] : idx) ++per[d];
  EXPECT_EQ(per, (std::array<std::size_t, 3>{10, 4, 0}));
  EXPECT_EQ(seen.size(), idx.size());
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end(), [](auto& x, auto& y) { return x.first < y.first; }));
  EXPECT_EQ(idx, combined_indices({100, 35, 4}, {0.1, 3}));
  EXPECT_THROW(combined_indices({10, 0}, {}), DataError);
  EXPECT_THROW(combined_indices({10}, {0.0, 0}), UsageError);
}

TEST(Combined, BuildCopiesSelectedSamples) {
  std::vector<std::vector<HrtfSample>> parts(2);
  for (int i = 0; i < 20; ++i) parts[0].push_back(sample_with("A", i, 5));
  for (int i = 0; i < 30; ++i) parts[1].push_back(sample_with("B", 100 + i, 5));
  const auto out = build_combined(parts, {0.1, 1});
  ASSERT_EQ(out.size(), 5u);
  EXPECT_EQ(out[0].subject_id, "A");
  EXPECT_EQ(out[4].subject_id, "B");
}

TEST(SampleSet, RoundTripAndErrors) {
  std::vector<HrtfSample> set = {sample_with("A", 10, 9), sample_with("B", -20, 9)};
  const std::string cfg = "normalization=none\n";
  const auto bytes = encode_samples(set, cfg);
  const auto back = decode_samples(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].contra, set[1].contra);
  EXPECT_EQ(back[1].subject_id, "B");
  EXPECT_EQ(back[0].preproc, "abc");
  EXPECT_EQ(back[0].label(), set[0].label());
  EXPECT_EQ(back[0].freq_axis.bin_center_hz, set[0].freq_axis.bin_center_hz);
  EXPECT_THROW(decode_samples(bytes.substr(0, bytes.size() - 8)), TruncatedPayload);

  set.push_back(sample_with("C", 0, 7));
  EXPECT_THROW(encode_samples(set, cfg), ShapeMismatch);

  const auto dir = temp_dir("set");
  set.pop_back();
  write_samples(set, cfg, dir / "x.hset");
  EXPECT_EQ(read_samples(dir / "x.hset").size(), 2u);
}

TEST(SampleSet, PreprocessAndSelect) {
  std::vector<SubjectRecord> recs = {make_record("B", 3, 64), make_record("A", 2, 64)};
  const auto samples = preprocess_records(recs, PreprocConfig::raw());
  ASSERT_EQ(samples.size(), 5u);
  EXPECT_EQ(samples[0].subject_id, "B");
  EXPECT_EQ(samples[0].bins(), 257u);
  const auto only_a = select_subjects(samples, {"A"});
  ASSERT_EQ(only_a.size(), 2u);
  EXPECT_EQ(only_a[0].subject_id, "A");
  const auto h = class_balance(samples);
  std::size_t total = 0;
  for (auto v : h) total += v;
  EXPECT_EQ(total, 5u);
}
