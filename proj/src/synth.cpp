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

#include "hrtfxai/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "hrtfxai/error.hpp"
#include "hrtfxai/util.hpp"

namespace hrtfxai {

namespace {

// 1 at u = 0 falling to 0 at |u| = 1.
double raised_cosine(double u) {
  if (!(std::abs(u) < 1.0)) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

// 0 below -1, 1 above +1, cosine ramp in between.
double smooth_step(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return 0.5 * (1.0 - std::cos(0.5 * std::numbers::pi * (u + 1.0)));
}

bool is_front(double polar) { return polar <= 70.0; }
bool is_rear(double polar) { return polar > 110.0; }

}  // namespace

void SynthSpec::validate() const {
  if (n_subjects < 1) throw UsageError("synth: n_subjects must be >= 1");
  if (!(sample_rate_hz > 0.0)) throw UsageError("synth: sample rate must be positive");
  if (ir_length < 16 || ir_length % 2 != 0) throw UsageError("synth: ir_length must be even and >= 16");
  if (!(lateral_step_deg > 0.0) || !(polar_step_deg > 0.0)) throw UsageError("synth: grid steps must be positive");
  if (!(lateral_start_deg > -90.0 && lateral_start_deg <= 0.0)) {
    throw UsageError("synth: lateral_start_deg must be in (-90, 0]");
  }
  if (notch_track.empty()) throw UsageError("synth: notch_track needs at least one knot");
  if (notch_depth_db < 0.0) throw UsageError("synth: notch depth must be >= 0");
  if (!(notch_width_octaves > 0.0)) throw UsageError("synth: notch width must be positive");
  if (subject_jitter < 0.0 || subject_jitter >= 0.5) throw UsageError("synth: jitter must be in [0, 0.5)");
  const double nyquist = sample_rate_hz / 2.0;
  for (const auto& [polar, hz] : notch_track) {
    if (!(hz > 0.0 && hz < nyquist)) throw UsageError("synth: notch centres must lie in (0, Nyquist)");
  }
  for (const auto& d : grid()) {
    const double c = notch_center_hz(d.polar_deg) * (1.0 + subject_jitter);
    const double lo = notch_center_hz(d.polar_deg) * (1.0 - subject_jitter);
    if (!(lo > 0.0 && c < nyquist)) {
      throw UsageError("synth: notch track leaves (0, Nyquist) at polar " + format_double(d.polar_deg));
    }
  }
  const auto hist = [&] {
    std::vector<Direction> dirs;
    for (const auto& i : grid()) dirs.push_back(Direction::from_vertical(interaural_to_vertical(i)));
    return class_balance(dirs);
  }();
  for (int c = 0; c < kNumClasses; ++c) {
    if (hist[static_cast<std::size_t>(c)] == 0) {
      throw DataError("synth: grid too sparse, no direction in class " +
                      std::string(class_name(class_from_index(c))));
    }
  }
}

std::vector<InterauralPolar> SynthSpec::grid() const {
  std::vector<InterauralPolar> out;
  for (double lat = lateral_start_deg; lat <= -lateral_start_deg + 1e-9; lat += lateral_step_deg) {
    for (double pol = polar_start_deg; pol < 270.0 - 1e-9; pol += polar_step_deg) {
      out.push_back({lat, pol});
    }
  }
  return out;
}

double SynthSpec::notch_center_hz(double polar_deg) const {
  double p = normalize_polar(polar_deg);
  if (p > 90.0) p = 180.0 - p;  // rear directions mirror the frontal track
  if (notch_track.size() == 1) return notch_track.front().second;
  auto knots = notch_track;
  std::sort(knots.begin(), knots.end());
  std::size_t seg = 0;
  while (seg + 2 < knots.size() && p > knots[seg + 1].first) ++seg;
  const auto [p0, f0] = knots[seg];
  const auto [p1, f1] = knots[seg + 1];
  return f0 + (f1 - f0) * (p - p0) / (p1 - p0);
}

std::string SynthSpec::serialize() const {
  std::ostringstream os;
  os << "dataset_id = " << dataset_id << "\n";
  os << "front_peak_hz = " << format_double(front_peak_hz) << "\n";
  os << "front_peak_ratio = " << format_double(front_peak_ratio) << "\n";
  os << "front_peak_width_octaves = " << format_double(front_peak_width_octaves) << "\n";
  os << "ild_ratio_per_deg = " << format_double(ild_ratio_per_deg) << "\n";
  os << "ir_length = " << ir_length << "\n";
  os << "lateral_start_deg = " << format_double(lateral_start_deg) << "\n";
  os << "lateral_step_deg = " << format_double(lateral_step_deg) << "\n";
  os << "n_subjects = " << n_subjects << "\n";
  os << "noise_floor_db = " << format_double(noise_floor_db) << "\n";
  os << "notch_depth_db = " << format_double(notch_depth_db) << "\n";
  os << "notch_track = ";
  for (std::size_t i = 0; i < notch_track.size(); ++i) {
    os << (i ? "," : "") << format_double(notch_track[i].first) << ":" << format_double(notch_track[i].second);
  }
  os << "\n";
  os << "notch_width_octaves = " << format_double(notch_width_octaves) << "\n";
  os << "polar_start_deg = " << format_double(polar_start_deg) << "\n";
  os << "polar_step_deg = " << format_double(polar_step_deg) << "\n";
  os << "rear_shelf_hz = " << format_double(rear_shelf_hz) << "\n";
  os << "rear_shelf_ratio = " << format_double(rear_shelf_ratio) << "\n";
  os << "sample_rate_hz = " << format_double(sample_rate_hz) << "\n";
  os << "subject_gain_db = " << format_double(subject_gain_db) << "\n";
  os << "subject_jitter = " << format_double(subject_jitter) << "\n";
  return os.str();
}

SynthSpec SynthSpec::parse(std::string_view text) {
  SynthSpec s;
  for (const auto& [key, value] : parse_key_values(text)) {
    auto num = [&] { return parse_double(value, key); };
    if (key == "dataset_id") s.dataset_id = value;
    else if (key == "front_peak_hz") s.front_peak_hz = num();
    else if (key == "front_peak_ratio") s.front_peak_ratio = num();
    else if (key == "front_peak_width_octaves") s.front_peak_width_octaves = num();
    else if (key == "ild_ratio_per_deg") s.ild_ratio_per_deg = num();
    else if (key == "ir_length") s.ir_length = static_cast<int>(parse_int(value, key));
    else if (key == "lateral_start_deg") s.lateral_start_deg = num();
    else if (key == "lateral_step_deg") s.lateral_step_deg = num();
    else if (key == "n_subjects") s.n_subjects = static_cast<int>(parse_int(value, key));
    else if (key == "noise_floor_db") s.noise_floor_db = num();
    else if (key == "notch_depth_db") s.notch_depth_db = num();
    else if (key == "notch_track") {
      s.notch_track.clear();
      for (const auto& knot : split(value, ',')) {
        const auto parts = split(knot, ':');
        if (parts.size() != 2) throw DataError("notch_track expects `polar:hz,...`");
        s.notch_track.emplace_back(parse_double(parts[0], key), parse_double(parts[1], key));
      }
    } else if (key == "notch_width_octaves") s.notch_width_octaves = num();
    else if (key == "polar_start_deg") s.polar_start_deg = num();
    else if (key == "polar_step_deg") s.polar_step_deg = num();
    else if (key == "rear_shelf_hz") s.rear_shelf_hz = num();
    else if (key == "rear_shelf_ratio") s.rear_shelf_ratio = num();
    else if (key == "sample_rate_hz") s.sample_rate_hz = num();
    else if (key == "subject_gain_db") s.subject_gain_db = num();
    else if (key == "subject_jitter") s.subject_jitter = num();
    else throw DataError("unknown synth key `" + key + "`");
  }
  s.validate();
  return s;
}

std::pair<std::vector<double>, std::vector<double>> synth_template(const SynthSpec& spec,
                                                                   const InterauralPolar& dir,
                                                                   const TemplateParams& p) {
  const std::size_t bins = static_cast<std::size_t>(spec.ir_length / 2 + 1);
  const double polar = normalize_polar(dir.polar_deg);
  const double center = spec.notch_center_hz(polar) * p.jitter_scale;
  const double depth = spec.notch_depth_db;
  const double ild_db = spec.ild_ratio_per_deg * depth * std::abs(dir.lateral_deg);

  std::vector<double> ipsi(bins), contra(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * spec.sample_rate_hz / spec.ir_length;
    double gain = p.gain_db;
    if (f > 0.0) {
      gain -= depth * raised_cosine(std::log2(f / center) / (0.5 * spec.notch_width_octaves));
      if (is_front(polar)) {
        gain += spec.front_peak_ratio * depth *
                raised_cosine(std::log2(f / spec.front_peak_hz) / (0.5 * spec.front_peak_width_octaves));
      }
      if (is_rear(polar)) {
        gain -= spec.rear_shelf_ratio * depth * smooth_step(std::log2(f / spec.rear_shelf_hz) / 0.25);
      }
    }
    ipsi[k] = std::pow(10.0, gain / 20.0);
    contra[k] = std::pow(10.0, (gain - ild_db) / 20.0);
  }
  return {std::move(ipsi), std::move(contra)};
}

std::vector<double> linear_phase_ir(std::span<const double> magnitude, int ir_length) {
  const std::size_t bins = static_cast<std::size_t>(ir_length / 2 + 1);
  if (magnitude.size() != bins) throw UsageError("linear_phase_ir: magnitude length mismatch");
  // A delay of N/2 samples multiplies bin k by (-1)^k, keeping it real.
  std::vector<std::complex<double>> half(bins);
  for (std::size_t k = 0; k < bins; ++k) half[k] = (k % 2 == 0 ? 1.0 : -1.0) * magnitude[k];
  auto ir = inverse_real_fft(half, ir_length);
  const double inv = 1.0 / ir_length;
  for (auto& v : ir) v *= inv;
  return ir;
}

CueRecord planted_cues(const SynthSpec& spec, const InterauralPolar& dir, double jitter_scale) {
  const double polar = normalize_polar(dir.polar_deg);
  CueRecord r;
  r.center_hz.push_back(spec.notch_center_hz(polar) * jitter_scale);
  r.width_oct.push_back(spec.notch_width_octaves);
  if (spec.notch_depth_db > 0.0 && is_front(polar) && spec.front_peak_ratio > 0.0) {
    r.center_hz.push_back(spec.front_peak_hz);
    r.width_oct.push_back(spec.front_peak_width_octaves);
  }
  if (spec.notch_depth_db > 0.0 && is_rear(polar) && spec.rear_shelf_ratio > 0.0) {
    r.center_hz.push_back(spec.rear_shelf_hz);
    r.width_oct.push_back(0.5);
  }
  return r;
}

SynthOutput generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto grid = spec.grid();
  const std::size_t n = static_cast<std::size_t>(spec.ir_length);
  const double noise_amp = std::pow(10.0, spec.noise_floor_db / 20.0);
  Rng rng(seed);

  SynthOutput out;
  out.negative_control = spec.notch_depth_db == 0.0;
  for (int s = 0; s < spec.n_subjects; ++s) {
    char id[32];
    std::snprintf(id, sizeof(id), "S%03d", s + 1);
    SubjectRecord rec;
    rec.subject_id = id;
    rec.dataset_id = spec.dataset_id;
    rec.sample_rate_hz = spec.sample_rate_hz;
    rec.n_samples = n;
    rec.irs.resize(grid.size() * 2 * n);

    TemplateParams tp;
    tp.jitter_scale = 1.0 + rng.uniform(-spec.subject_jitter, spec.subject_jitter);
    tp.gain_db = rng.uniform(-spec.subject_gain_db, spec.subject_gain_db);

    for (std::size_t d = 0; d < grid.size(); ++d) {
      const auto vertical = interaural_to_vertical(grid[d]);
      rec.directions.push_back({vertical, 1.2});
      // The stored direction is what the pipeline sees; use its lateral sign.
      const auto dir = Direction::from_vertical(vertical);
      auto [ipsi, contra] = synth_template(spec, dir.interaural, tp);
      for (auto& v : ipsi) v += noise_amp * rng.uniform();
      for (auto& v : contra) v += noise_amp * rng.uniform();
      const bool left_is_ipsi = dir.interaural.lateral_deg <= 0.0;
      const auto left = linear_phase_ir(left_is_ipsi ? ipsi : contra, spec.ir_length);
      const auto right = linear_phase_ir(left_is_ipsi ? contra : ipsi, spec.ir_length);
      std::transform(left.begin(), left.end(), rec.ir(d, 0), [](double v) { return static_cast<float>(v); });
      std::transform(right.begin(), right.end(), rec.ir(d, 1), [](double v) { return static_cast<float>(v); });

      auto cues = planted_cues(spec, dir.interaural, tp.jitter_scale);
      cues.subject_id = rec.subject_id;
      cues.direction_index = d;
      out.truth.push_back(std::move(cues));
    }
    out.subjects.push_back(std::move(rec));
  }
  return out;
}

void write_ground_truth(const std::vector<CueRecord>& truth, const std::filesystem::path& csv) {
  std::string text = "subject,direction_index,cue_center_hz,width_oct\n";
  for (const auto& t : truth) {
    auto join = [](const std::vector<double>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_double(v[i]);
      return s;
    };
    text += t.subject_id + "," + std::to_string(t.direction_index) + "," + join(t.center_hz) + "," +
            join(t.width_oct) + "\n";
  }
  write_file(csv, text);
}

std::vector<CueRecord> read_ground_truth(const std::filesystem::path& csv) {
  std::vector<CueRecord> out;
  bool header = true;
  for (const auto& raw : split(read_file(csv), '\n')) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 4) throw DataError(csv.string() + ": malformed ground-truth row");
    CueRecord r;
    r.subject_id = cols[0];
    r.direction_index = static_cast<std::size_t>(parse_int(cols[1], "direction_index"));
    for (const auto& v : split(cols[2], ';')) r.center_hz.push_back(parse_double(v, "cue_center_hz"));
    for (const auto& v : split(cols[3], ';')) r.width_oct.push_back(parse_double(v, "width_oct"));
    if (r.center_hz.size() != r.width_oct.size()) throw DataError(csv.string() + ": cue and width counts differ");
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

bool in_cue_window(double f, std::span<const double> centers) {
  if (!(f > 0.0)) return false;
  for (const double c : centers) {
    if (std::abs(std::log2(f / c)) <= kCueHalfWidthOctaves) return true;
  }
  return false;
}

}  // namespace

LocalizationScore saliency_localization_score(std::span<const double> saliency,
                                              std::span<const double> cue_centers_hz,
                                              const AxisSpec& axis) {
  if (saliency.size() != axis.size()) throw UsageError("localization score: saliency/axis length mismatch");
  double total = 0.0;
  double inside = 0.0;
  for (std::size_t k = 0; k < saliency.size(); ++k) {
    const double v = std::max(0.0, saliency[k]);
    total += v;
    if (in_cue_window(axis.bin_center_hz[k], cue_centers_hz)) inside += v;
  }
  if (!(total > 0.0)) return {0.0, true};
  return {inside / total, false};
}

double uniform_baseline_score(std::span<const double> cue_centers_hz, const AxisSpec& axis) {
  if (axis.size() == 0) return 0.0;
  std::size_t inside = 0;
  for (const double f : axis.bin_center_hz) inside += in_cue_window(f, cue_centers_hz) ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(axis.size());
}

}  // namespace hrtfxai
