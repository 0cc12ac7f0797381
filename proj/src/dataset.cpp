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

#include "hrtfxai/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

#include "hrtfxai/error.hpp"
#include "hrtfxai/util.hpp"
#include "json.hpp"

namespace hrtfxai {

using nlohmann::json;

// --- HRD1 ------------------------------------------------------------------

void SubjectRecord::validate() const {
  if (directions.empty()) throw DataError("subject " + subject_id + ": no directions");
  if (n_samples == 0) throw DataError("subject " + subject_id + ": empty impulse responses");
  if (!(sample_rate_hz > 0.0)) throw DataError("subject " + subject_id + ": invalid sample rate");
  if (irs.size() != directions.size() * 2 * n_samples) {
    throw ShapeMismatch("subject " + subject_id + ": IR array does not match directions x 2 x samples");
  }
  for (const float v : irs) {
    if (!std::isfinite(v)) throw NonFiniteValue("subject " + subject_id + ": non-finite IR value");
  }
}

std::vector<Hrir> SubjectRecord::to_hrirs() const {
  std::vector<Hrir> out;
  out.reserve(directions.size());
  for (std::size_t d = 0; d < directions.size(); ++d) {
    Hrir h;
    h.left.assign(ir(d, 0), ir(d, 0) + n_samples);
    h.right.assign(ir(d, 1), ir(d, 1) + n_samples);
    h.sample_rate_hz = sample_rate_hz;
    h.direction = Direction::from_vertical(directions[d].position, directions[d].distance_m);
    h.subject_id = subject_id;
    h.dataset_id = dataset_id;
    out.push_back(std::move(h));
  }
  return out;
}

std::string encode_subject(const SubjectRecord& rec) {
  rec.validate();
  json meta;
  meta["subject_id"] = rec.subject_id;
  meta["dataset_id"] = rec.dataset_id;
  meta["sample_rate_hz"] = rec.sample_rate_hz;
  meta["n_samples"] = rec.n_samples;
  json dirs = json::array();
  for (const auto& d : rec.directions) {
    json row = {{"azimuth_deg", d.position.azimuth_deg}, {"elevation_deg", d.position.elevation_deg}};
    row["distance_m"] = d.distance_m ? json(*d.distance_m) : json(nullptr);
    dirs.push_back(std::move(row));
  }
  meta["directions"] = std::move(dirs);

  std::string payload;
  payload.reserve(rec.irs.size() * 4);
  for (const float v : rec.irs) le::put_f32(payload, v);
  return make_frame(kHrdMagic, meta.dump(), payload);
}

SubjectRecord decode_subject(std::string_view bytes, const std::string& source) {
  const Frame frame = parse_frame(bytes, kHrdMagic, source);
  SubjectRecord rec;
  try {
    const json meta = json::parse(frame.json);
    rec.subject_id = meta.at("subject_id").get<std::string>();
    rec.dataset_id = meta.at("dataset_id").get<std::string>();
    rec.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
    rec.n_samples = meta.at("n_samples").get<std::size_t>();
    for (const auto& row : meta.at("directions")) {
      MeasuredDirection d;
      d.position.azimuth_deg = row.at("azimuth_deg").get<double>();
      d.position.elevation_deg = row.at("elevation_deg").get<double>();
      if (row.contains("distance_m") && !row["distance_m"].is_null()) {
        d.distance_m = row["distance_m"].get<double>();
      }
      rec.directions.push_back(d);
    }
  } catch (const json::exception& e) {
    throw FormatError(source + ": malformed metadata: " + e.what());
  }

  const std::size_t count = rec.directions.size() * 2 * rec.n_samples;
  if (frame.payload.size() < count * 4) {
    throw TruncatedPayload(source + ": payload holds " + std::to_string(frame.payload.size()) +
                           " bytes, expected " + std::to_string(count * 4));
  }
  if (frame.payload.size() > count * 4) {
    throw FormatError(source + ": trailing bytes after payload");
  }
  rec.irs.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    rec.irs[i] = le::get_f32(frame.payload.data() + 4 * i);
    if (!std::isfinite(rec.irs[i])) {
      throw NonFiniteValue(source + ": non-finite IR value at index " + std::to_string(i));
    }
  }
  try {
    rec.validate();
  } catch (const DataError& e) {
    throw FormatError(source + ": " + e.what());
  }
  return rec;
}

void write_subject(const SubjectRecord& rec, const std::filesystem::path& path) {
  write_file(path, encode_subject(rec));
}

SubjectRecord read_subject(const std::filesystem::path& path) {
  return decode_subject(read_file(path), path.string());
}

// --- manifest --------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& csv) {
  const std::string text = read_file(csv);
  const auto base = csv.parent_path();
  std::vector<ManifestEntry> out;
  int line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 3) {
      throw DataError(csv.string() + ":" + std::to_string(line_no) +
                      ": expected `subject_id,path,dataset_id`");
    }
    if (line_no == 1 && trim(cols[0]) == "subject_id") continue;
    ManifestEntry e{trim(cols[0]), trim(cols[1]), trim(cols[2])};
    if (e.path.is_relative()) e.path = base / e.path;
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& csv) {
  std::string text = "subject_id,path,dataset_id\n";
  for (const auto& e : entries) {
    text += e.subject_id + "," + e.path.generic_string() + "," + e.dataset_id + "\n";
  }
  write_file(csv, text);
}

// --- splits ----------------------------------------------------------------

std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
  if (n < 3) throw DataError("split needs at least 3 subjects, got " + std::to_string(n));
  const double total = spec.train_frac + spec.val_frac + spec.test_frac;
  if (std::abs(total - 1.0) > 1e-9 || spec.train_frac <= 0 || spec.val_frac <= 0 ||
      spec.test_frac <= 0) {
    throw UsageError("split fractions must be positive and sum to 1");
  }
  const double nd = static_cast<double>(n);
  std::size_t train = std::min(n, round_half_up(spec.train_frac * nd));
  std::size_t val = round_half_up(spec.val_frac * nd);
  val = std::clamp<std::size_t>(val, 1, n - 1);
  if (train + val > n - 1) train = n - 1 - val;
  if (train == 0) {
    train = 1;
    val = 1;
  }
  const std::size_t test = n - train - val;
  return {train, val, test};
}

SubjectSplit split_subjects(std::vector<std::string> subject_ids, const SplitSpec& spec) {
  std::sort(subject_ids.begin(), subject_ids.end());
  if (std::adjacent_find(subject_ids.begin(), subject_ids.end()) != subject_ids.end()) {
    throw DataError("split: duplicate subject id");
  }
  const auto [n_train, n_val, n_test] = split_sizes(subject_ids.size(), spec);
  Rng rng(spec.seed);
  rng.shuffle(subject_ids);

  SubjectSplit s;
  auto it = subject_ids.begin();
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  it += static_cast<std::ptrdiff_t>(n_train);
  s.val.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
  it += static_cast<std::ptrdiff_t>(n_val);
  s.test.assign(it, it + static_cast<std::ptrdiff_t>(n_test));
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

// --- combined --------------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> combined_indices(
    const std::vector<std::size_t>& train_sizes, const CombinedSpec& spec) {
  if (!(spec.per_dataset_fraction > 0.0 && spec.per_dataset_fraction <= 1.0)) {
    throw UsageError("combined fraction must be in (0, 1]");
  }
  Rng rng(spec.seed);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t d = 0; d < train_sizes.size(); ++d) {
    const std::size_t n = train_sizes[d];
    if (n == 0) throw DataError("combined: dataset " + std::to_string(d) + " has an empty train partition");
    const std::size_t take = std::min(n, round_half_up(spec.per_dataset_fraction * static_cast<double>(n)));
    // Partial Fisher-Yates: the first `take` slots are the draw.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < take; ++i) out.emplace_back(d, idx[i]);
  }
  return out;
}

std::vector<HrtfSample> build_combined(const std::vector<std::vector<HrtfSample>>& train_partitions,
                                       const CombinedSpec& spec) {
  std::vector<std::size_t> sizes;
  for (const auto& p : train_partitions) sizes.push_back(p.size());
  std::vector<HrtfSample> out;
  for (const auto& [d, i] : combined_indices(sizes, spec)) out.push_back(train_partitions[d][i]);
  return out;
}

ClassHistogram class_balance(const std::vector<HrtfSample>& samples) {
  ClassHistogram h{};
  for (const auto& s : samples) ++h[static_cast<std::size_t>(to_index(s.label()))];
  return h;
}

ClassHistogram class_balance(const std::vector<Direction>& directions) {
  ClassHistogram h{};
  for (const auto& d : directions) ++h[static_cast<std::size_t>(to_index(d.label))];
  return h;
}

// --- preprocessed sets -----------------------------------------------------

namespace {

std::string axis_kind_name(AxisKind k) {
  switch (k) {
    case AxisKind::Linear: return "linear";
    case AxisKind::Mel: return "mel";
    case AxisKind::Erb: return "erb";
  }
  return "linear";
}

AxisKind axis_kind_from(const std::string& s) {
  if (s == "linear") return AxisKind::Linear;
  if (s == "mel") return AxisKind::Mel;
  if (s == "erb") return AxisKind::Erb;
  throw FormatError("unknown axis kind `" + s + "`");
}

}  // namespace

std::string encode_samples(const std::vector<HrtfSample>& samples, const std::string& preproc_text) {
  json meta;
  meta["preproc"] = preproc_text;
  const std::size_t bins = samples.empty() ? 0 : samples.front().bins();
  meta["bins"] = bins;
  if (!samples.empty()) {
    meta["fingerprint"] = samples.front().preproc;
    meta["axis_kind"] = axis_kind_name(samples.front().freq_axis.kind);
    meta["bin_center_hz"] = samples.front().freq_axis.bin_center_hz;
  }
  json rows = json::array();
  std::string payload;
  payload.reserve(samples.size() * 2 * bins * 8);
  for (const auto& s : samples) {
    if (s.bins() != bins || s.contra.size() != bins) {
      throw ShapeMismatch("encode_samples: samples have different bin counts");
    }
    json row = {{"subject_id", s.subject_id},
                {"dataset_id", s.dataset_id},
                {"azimuth_deg", s.direction.vertical.azimuth_deg},
                {"elevation_deg", s.direction.vertical.elevation_deg}};
    row["distance_m"] = s.direction.source_distance_m ? json(*s.direction.source_distance_m) : json(nullptr);
    rows.push_back(std::move(row));
    for (const double v : s.ipsi) le::put_f64(payload, v);
    for (const double v : s.contra) le::put_f64(payload, v);
  }
  meta["samples"] = std::move(rows);
  return make_frame(kHrtfSetMagic, meta.dump(), payload);
}

std::vector<HrtfSample> decode_samples(std::string_view bytes, const std::string& source) {
  const Frame frame = parse_frame(bytes, kHrtfSetMagic, source);
  std::vector<HrtfSample> out;
  try {
    const json meta = json::parse(frame.json);
    const std::size_t bins = meta.at("bins").get<std::size_t>();
    const auto& rows = meta.at("samples");
    if (rows.empty()) return out;
    AxisSpec axis;
    axis.kind = axis_kind_from(meta.at("axis_kind").get<std::string>());
    axis.bin_center_hz = meta.at("bin_center_hz").get<std::vector<double>>();
    const std::string fingerprint = meta.at("fingerprint").get<std::string>();
    if (axis.size() != bins) throw ShapeMismatch(source + ": axis length does not match bins");
    const std::size_t need = rows.size() * 2 * bins * 8;
    if (frame.payload.size() < need) throw TruncatedPayload(source + ": truncated sample payload");
    if (frame.payload.size() > need) throw FormatError(source + ": trailing bytes after payload");
    const char* p = frame.payload.data();
    for (const auto& row : rows) {
      HrtfSample s;
      s.subject_id = row.at("subject_id").get<std::string>();
      s.dataset_id = row.at("dataset_id").get<std::string>();
      std::optional<double> dist;
      if (row.contains("distance_m") && !row["distance_m"].is_null()) dist = row["distance_m"].get<double>();
      s.direction = Direction::from_vertical(
          {row.at("azimuth_deg").get<double>(), row.at("elevation_deg").get<double>()}, dist);
      s.freq_axis = axis;
      s.preproc = fingerprint;
      s.ipsi.resize(bins);
      s.contra.resize(bins);
      for (std::size_t b = 0; b < bins; ++b, p += 8) s.ipsi[b] = le::get_f64(p);
      for (std::size_t b = 0; b < bins; ++b, p += 8) s.contra[b] = le::get_f64(p);
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(source + ": malformed metadata: " + e.what());
  }
  return out;
}

void write_samples(const std::vector<HrtfSample>& samples, const std::string& preproc_text,
                   const std::filesystem::path& path) {
  write_file(path, encode_samples(samples, preproc_text));
}

std::vector<HrtfSample> read_samples(const std::filesystem::path& path) {
  return decode_samples(read_file(path), path.string());
}

std::vector<HrtfSample> preprocess_records(const std::vector<SubjectRecord>& records, const PreprocConfig& cfg) {
  std::vector<HrtfSample> out;
  for (const auto& rec : records) {
    const auto hrirs = rec.to_hrirs();
    auto res = preprocess_subject(hrirs, cfg);
    std::move(res.samples.begin(), res.samples.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<HrtfSample> select_subjects(const std::vector<HrtfSample>& samples, const std::vector<std::string>& ids) {
  const std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<HrtfSample> out;
  for (const auto& s : samples) {
    if (keep.count(s.subject_id)) out.push_back(s);
  }
  return out;
}

}  // namespace hrtfxai
