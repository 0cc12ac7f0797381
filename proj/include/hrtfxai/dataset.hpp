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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hrtfxai/coords.hpp"
#include "hrtfxai/dsp.hpp"

namespace hrtfxai {

inline constexpr std::string_view kHrdMagic = "HRDATA01";

struct MeasuredDirection {
  VerticalPolar position;
  std::optional<double> distance_m;
};

// One subject's HRIR set as stored on disk.
struct SubjectRecord {
  std::string subject_id;
  std::string dataset_id;
  double sample_rate_hz = 44100.0;
  std::size_t n_samples = 0;
  std::vector<MeasuredDirection> directions;
  // Row-major [direction][ear (L, R)][sample].
  std::vector<float> irs;

  std::size_t n_directions() const { return directions.size(); }
  const float* ir(std::size_t direction, int ear) const {
    return irs.data() + (direction * 2 + static_cast<std::size_t>(ear)) * n_samples;
  }
  float* ir(std::size_t direction, int ear) {
    return irs.data() + (direction * 2 + static_cast<std::size_t>(ear)) * n_samples;
  }

  void validate() const;
  std::vector<Hrir> to_hrirs() const;
};

// HRD1 container: "HRDATA01", u32 LE metadata length, JSON metadata, then
// little-endian float32 IRs.
std::string encode_subject(const SubjectRecord& rec);
SubjectRecord decode_subject(std::string_view bytes, const std::string& source = "<memory>");
void write_subject(const SubjectRecord& rec, const std::filesystem::path& path);
SubjectRecord read_subject(const std::filesystem::path& path);

// `subject_id,path,dataset_id` rows; an optional header row is skipped.
// Relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::string subject_id;
  std::filesystem::path path;
  std::string dataset_id;
};
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& csv);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& csv);

struct SplitSpec {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::uint64_t seed = 0;
};

struct SubjectSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

// Partition sizes for n subjects: train = round(0.8 n), val = round(0.1 n),
// test takes the rest; val and test never drop below one subject.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec);
SubjectSplit split_subjects(std::vector<std::string> subject_ids, const SplitSpec& spec);

struct CombinedSpec {
  double per_dataset_fraction = 0.10;
  std::uint64_t seed = 0;
};

std::size_t round_half_up(double x);

// Draws round(fraction * n) samples without replacement from every
// dataset's training samples and concatenates them, dataset by dataset.
// Returned pairs are (dataset index, sample index).
std::vector<std::pair<std::size_t, std::size_t>> combined_indices(
    const std::vector<std::size_t>& train_sizes, const CombinedSpec& spec);
std::vector<HrtfSample> build_combined(const std::vector<std::vector<HrtfSample>>& train_partitions,
                                       const CombinedSpec& spec);

// Preprocesses every subject in order and concatenates the samples.
std::vector<HrtfSample> preprocess_records(const std::vector<SubjectRecord>& records, const PreprocConfig& cfg);
// Samples whose subject id is in `ids`, original order kept.
std::vector<HrtfSample> select_subjects(const std::vector<HrtfSample>& samples, const std::vector<std::string>& ids);

using ClassHistogram = std::array<std::size_t, kNumClasses>;
ClassHistogram class_balance(const std::vector<HrtfSample>& samples);
ClassHistogram class_balance(const std::vector<Direction>& directions);

// Preprocessed sample sets on disk ("HRTFSET1" frame, float64 payload
// [sample][channel][bin]).
inline constexpr std::string_view kHrtfSetMagic = "HRTFSET1";
std::string encode_samples(const std::vector<HrtfSample>& samples, const std::string& preproc_text);
std::vector<HrtfSample> decode_samples(std::string_view bytes, const std::string& source = "<memory>");
void write_samples(const std::vector<HrtfSample>& samples, const std::string& preproc_text,
                   const std::filesystem::path& path);
std::vector<HrtfSample> read_samples(const std::filesystem::path& path);

}  // namespace hrtfxai
