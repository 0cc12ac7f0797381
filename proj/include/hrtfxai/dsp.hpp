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

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hrtfxai/coords.hpp"

namespace hrtfxai {

struct Hrir {
  std::vector<double> left;
  std::vector<double> right;
  double sample_rate_hz = 44100.0;
  Direction direction;
  std::string subject_id;
  std::string dataset_id;
};

enum class AxisKind { Linear, Mel, Erb };

struct AxisSpec {
  AxisKind kind = AxisKind::Linear;
  std::vector<double> bin_center_hz;

  std::size_t size() const { return bin_center_hz.size(); }
  static AxisSpec linear(std::size_t fft_size, double sample_rate_hz);
};

enum class Normalization { None, Aee };
enum class AmplitudeScale { Linear, Log10 };

struct BandCut {
  double low_hz = 0.0;
  double high_hz = 0.0;
};

struct PreprocConfig {
  Normalization normalization = Normalization::None;
  AmplitudeScale amplitude_scale = AmplitudeScale::Linear;
  std::optional<BandCut> band_cut_hz;
  AxisKind freq_axis = AxisKind::Linear;
  int fft_size = 512;
  double target_rate_hz = 44100.0;
  // ERB filterbank shape, only read when freq_axis == Erb.
  int erb_filters = 255;
  double erb_low_hz = 50.0;
  double erb_high_hz = 22050.0;

  static PreprocConfig raw();
  static PreprocConfig optimized();
  static PreprocConfig perceptual();
  // "raw" | "optimized" | "perceptual"; throws UsageError otherwise.
  static PreprocConfig preset(std::string_view name);

  void validate() const;
  // Canonical `key = value` text; the fingerprint hashes exactly this.
  std::string serialize() const;
  static PreprocConfig parse(std::string_view text);
  std::string fingerprint() const;
  // Length of the per-channel vector this configuration produces.
  std::size_t output_bins() const;
};

struct HrtfSample {
  std::vector<double> ipsi;
  std::vector<double> contra;
  AxisSpec freq_axis;
  Direction direction;
  std::string subject_id;
  std::string dataset_id;
  std::string preproc;  // PreprocConfig fingerprint

  std::size_t bins() const { return ipsi.size(); }
  ElevationClass label() const { return direction.label; }
};

// Windowed-sinc band-limited interpolation (Kaiser, beta 8.6, 64 zero
// crossings per side). Passthrough when the rate already matches.
Hrir resample(const Hrir& h, double target_rate_hz);
std::vector<double> resample_signal(std::span<const double> x, double source_rate_hz,
                                    double target_rate_hz);

// Real FFT of length n (n even). Output has n/2 + 1 bins.
std::vector<std::complex<double>> real_fft(std::span<const double> x, int n);
// Inverse of real_fft for a Hermitian half spectrum, unnormalized by 1/n.
std::vector<double> inverse_real_fft(std::span<const std::complex<double>> half, int n);

// Zero-pads or truncates (tail first) each channel to fft_size and returns
// (left, right) magnitudes of length fft_size/2 + 1.
std::pair<std::vector<double>, std::vector<double>> to_magnitude(const Hrir& h, int fft_size);
std::vector<double> magnitude_spectrum(std::span<const double> x, int fft_size);

struct AeeReport {
  double equator_energy = 0.0;     // before scaling
  double scale = 1.0;              // every magnitude was multiplied by this
  std::size_t equator_samples = 0;
  bool widened = false;            // no sample within +-5 deg; nearest ring used
  double ring_elevation_deg = 0.0;
};

inline constexpr double kEquatorToleranceDeg = 5.0;

// Scales all samples of one subject by 1/sqrt(E), E being the mean squared
// magnitude of the equator samples over both channels and all bins.
AeeReport aee_normalize(std::span<HrtfSample> subject_samples);
double equator_mean_energy(std::span<const HrtfSample> subject_samples,
                           double tolerance_deg = kEquatorToleranceDeg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Indices of the linear bins nearest to B mel-spaced frequencies.
std::vector<std::size_t> mel_bin_indices(const AxisSpec& axis);
std::pair<std::vector<double>, AxisSpec> mel_warp(std::span<const double> mag,
                                                  const AxisSpec& axis);

std::vector<double> band_cut(std::span<const double> mag, const AxisSpec& axis, double low_hz,
                             double high_hz);

inline constexpr double kLogFloor = 1e-8;
std::vector<double> amplitude_scale(std::span<const double> mag, AmplitudeScale kind);

double hz_to_erb_rate(double hz);
double erb_rate_to_hz(double erb);

struct ErbFilterbank {
  std::vector<double> center_hz;
  AxisSpec input_axis;
  // Row-major [n_filters x fft_bins].
  std::vector<double> weights;

  std::size_t n_filters() const { return center_hz.size(); }
  std::size_t fft_bins() const { return input_axis.size(); }
  std::span<const double> row(std::size_t k) const {
    return std::span<const double>(weights).subspan(k * fft_bins(), fft_bins());
  }
};

// Half-cosine filters equally spaced on the ERB-rate scale; each filter
// reaches from its lower to its upper neighbour's centre, so squared
// responses of adjacent filters sum to one.
ErbFilterbank build_erb_filterbank(int n_filters, double low_hz, double high_hz,
                                   const AxisSpec& input_axis);
std::vector<double> apply_filterbank(std::span<const double> mag, const ErbFilterbank& fb);

// Runs the configured pipeline over one subject's measurements:
// resample, FFT magnitude, ipsi/contra ordering, band cut, AEE, axis
// transform, amplitude scale.
struct PreprocResult {
  std::vector<HrtfSample> samples;
  std::optional<AeeReport> aee;
};

PreprocResult preprocess_subject(std::span<const Hrir> subject, const PreprocConfig& cfg);

}  // namespace hrtfxai
