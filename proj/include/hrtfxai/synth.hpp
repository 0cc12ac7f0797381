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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hrtfxai/dataset.hpp"
#include "hrtfxai/dsp.hpp"

namespace hrtfxai {

// Parametric HRTF generator with planted, direction-dependent spectral cues.
//
// Every direction gets a raised-cosine notch whose centre follows
// `notch_track` (linear in polar angle). Directions behind the head reuse the
// track mirrored about the frontal plane and add a high shelf above
// `rear_shelf_hz`; frontal directions add a peak at `front_peak_hz`. The
// contralateral ear is attenuated in proportion to |lateral|. Peak, shelf and
// interaural gains scale with `notch_depth_db`, so a zero depth yields flat
// spectra (the negative control).
struct SynthSpec {
  int n_subjects = 40;
  std::string dataset_id = "synth";
  double sample_rate_hz = 44100.0;
  int ir_length = 512;

  // Sphere grid in interaural coordinates. Laterals run from lateral_start to
  // -lateral_start; polar angles from polar_start up to (excluding) 270.
  double lateral_start_deg = -75.0;
  double lateral_step_deg = 30.0;
  double polar_start_deg = -45.0;
  double polar_step_deg = 45.0;

  // (polar_deg, centre_hz) knots, linearly inter/extrapolated.
  std::vector<std::pair<double, double>> notch_track = {{-20.0, 5000.0}, {70.0, 11000.0}};
  double notch_depth_db = 20.0;
  double notch_width_octaves = 1.0;

  double front_peak_hz = 13000.0;
  double front_peak_width_octaves = 0.5;
  double front_peak_ratio = 0.5;   // peak gain = ratio * notch depth
  double rear_shelf_hz = 4000.0;
  double rear_shelf_ratio = 0.5;   // shelf cut = ratio * notch depth
  double ild_ratio_per_deg = 0.02; // contra cut = ratio * depth * |lateral|

  double subject_jitter = 0.05;    // notch centres scaled by 1 +- jitter
  double subject_gain_db = 6.0;    // broadband per-subject level spread
  double noise_floor_db = -40.0;   // additive magnitude noise level

  void validate() const;
  std::vector<InterauralPolar> grid() const;
  double notch_center_hz(double polar_deg) const;

  std::string serialize() const;
  static SynthSpec parse(std::string_view text);
};

// Planted cues of one generated sample: the notch, plus the frontal peak or
// the rear shelf edge when present. The CSV stores each list `;`-joined.
struct CueRecord {
  std::string subject_id;
  std::size_t direction_index = 0;
  std::vector<double> center_hz;
  std::vector<double> width_oct;
};

// Cue list for one direction given the subject's jitter scale.
CueRecord planted_cues(const SynthSpec& spec, const InterauralPolar& dir, double jitter_scale);

struct SynthOutput {
  std::vector<SubjectRecord> subjects;
  std::vector<CueRecord> truth;  // one per (subject, direction), in order
  bool negative_control = false;
};

// Linear-magnitude template (ipsi, contra) on the ir_length/2 + 1 FFT bins
// for one direction and subject parameters.
struct TemplateParams {
  double jitter_scale = 1.0;
  double gain_db = 0.0;
};
std::pair<std::vector<double>, std::vector<double>> synth_template(const SynthSpec& spec,
                                                                   const InterauralPolar& dir,
                                                                   const TemplateParams& p);
// Zero-phase magnitude shifted by ir_length/2 samples; real-valued.
std::vector<double> linear_phase_ir(std::span<const double> magnitude, int ir_length);

SynthOutput generate(const SynthSpec& spec, std::uint64_t seed);

void write_ground_truth(const std::vector<CueRecord>& truth, const std::filesystem::path& csv);
std::vector<CueRecord> read_ground_truth(const std::filesystem::path& csv);

inline constexpr double kCueHalfWidthOctaves = 0.5;

struct LocalizationScore {
  double score = 0.0;
  bool zero_mass = false;
};

// Fraction of (ReLU-clipped) saliency mass within +-0.5 octave of any cue
// centre.
LocalizationScore saliency_localization_score(std::span<const double> saliency,
                                              std::span<const double> cue_centers_hz,
                                              const AxisSpec& axis);
// Score a flat saliency would get: the fraction of bins inside cue windows.
double uniform_baseline_score(std::span<const double> cue_centers_hz, const AxisSpec& axis);

}  // namespace hrtfxai
