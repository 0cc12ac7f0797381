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

#include "hrtfxai/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <tuple>

#include "hrtfxai/error.hpp"
#include "hrtfxai/util.hpp"

namespace hrtfxai {

// --- axis / config ---------------------------------------------------------

AxisSpec AxisSpec::linear(std::size_t fft_size, double sample_rate_hz) {
  AxisSpec a;
  a.kind = AxisKind::Linear;
  const std::size_t bins = fft_size / 2 + 1;
  a.bin_center_hz.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    a.bin_center_hz[k] = static_cast<double>(k) * sample_rate_hz / static_cast<double>(fft_size);
  }
  return a;
}

PreprocConfig PreprocConfig::raw() { return PreprocConfig{}; }

PreprocConfig PreprocConfig::optimized() {
  PreprocConfig c;
  c.normalization = Normalization::Aee;
  c.amplitude_scale = AmplitudeScale::Linear;
  c.band_cut_hz = BandCut{50.0, 22050.0};
  c.freq_axis = AxisKind::Linear;
  return c;
}

PreprocConfig PreprocConfig::perceptual() {
  PreprocConfig c = optimized();
  c.freq_axis = AxisKind::Erb;
  // 255 ERB-spaced filters from 50 Hz are only a few Hz apart at the low end;
  // the spectrum must be fine enough that every filter owns a distinct bin.
  c.fft_size = 8192;
  return c;
}

PreprocConfig PreprocConfig::preset(std::string_view name) {
  if (name == "raw") return raw();
  if (name == "optimized") return optimized();
  if (name == "perceptual") return perceptual();
  throw UsageError("unknown preset `" + std::string(name) +
                   "` (expected raw, optimized or perceptual)");
}

void PreprocConfig::validate() const {
  if (fft_size <= 0 || fft_size % 2 != 0) {
    throw UsageError("fft_size must be positive and even, got " + std::to_string(fft_size));
  }
  if (!(target_rate_hz > 0.0)) throw UsageError("target_rate_hz must be positive");
  if (band_cut_hz) {
    if (!(band_cut_hz->low_hz < band_cut_hz->high_hz)) {
      throw UsageError("band cut low must be below high");
    }
    if (band_cut_hz->high_hz > target_rate_hz / 2.0) {
      throw UsageError("band cut high exceeds Nyquist");
    }
  }
  if (freq_axis == AxisKind::Erb) {
    if (erb_filters < 2) throw UsageError("erb_filters must be >= 2");
    if (!(erb_low_hz > 0.0 && erb_low_hz < erb_high_hz)) {
      throw UsageError("invalid ERB frequency range");
    }
  }
}

namespace {

std::string axis_name(AxisKind k) {
  switch (k) {
    case AxisKind::Linear: return "linear";
    case AxisKind::Mel: return "mel";
    case AxisKind::Erb: return "erb";
  }
  return "linear";
}

AxisKind parse_axis(const std::string& s) {
  if (s == "linear") return AxisKind::Linear;
  if (s == "mel") return AxisKind::Mel;
  if (s == "erb") return AxisKind::Erb;
  throw DataError("unknown freq_axis `" + s + "`");
}

}  // namespace

std::string PreprocConfig::serialize() const {
  std::ostringstream os;
  os << "amplitude_scale = " << (amplitude_scale == AmplitudeScale::Linear ? "linear" : "log10")
     << "\n";
  os << "band_cut_hz = ";
  if (band_cut_hz) {
    os << format_double(band_cut_hz->low_hz) << "," << format_double(band_cut_hz->high_hz);
  } else {
    os << "none";
  }
  os << "\n";
  os << "erb_filters = " << erb_filters << "\n";
  os << "erb_high_hz = " << format_double(erb_high_hz) << "\n";
  os << "erb_low_hz = " << format_double(erb_low_hz) << "\n";
  os << "fft_size = " << fft_size << "\n";
  os << "freq_axis = " << axis_name(freq_axis) << "\n";
  os << "normalization = " << (normalization == Normalization::Aee ? "aee" : "none") << "\n";
  os << "target_rate_hz = " << format_double(target_rate_hz) << "\n";
  return os.str();
}

PreprocConfig PreprocConfig::parse(std::string_view text) {
  const KeyValues kv = parse_key_values(text);
  PreprocConfig c;
  for (const auto& [key, value] : kv) {
    if (key == "amplitude_scale") {
      if (value == "linear") c.amplitude_scale = AmplitudeScale::Linear;
      else if (value == "log10") c.amplitude_scale = AmplitudeScale::Log10;
      else throw DataError("unknown amplitude_scale `" + value + "`");
    } else if (key == "band_cut_hz") {
      if (value == "none") {
        c.band_cut_hz.reset();
      } else {
        const auto parts = split(value, ',');
        if (parts.size() != 2) throw DataError("band_cut_hz expects `low,high` or `none`");
        c.band_cut_hz = BandCut{parse_double(parts[0], key), parse_double(parts[1], key)};
      }
    } else if (key == "erb_filters") {
      c.erb_filters = static_cast<int>(parse_int(value, key));
    } else if (key == "erb_high_hz") {
      c.erb_high_hz = parse_double(value, key);
    } else if (key == "erb_low_hz") {
      c.erb_low_hz = parse_double(value, key);
    } else if (key == "fft_size") {
      c.fft_size = static_cast<int>(parse_int(value, key));
    } else if (key == "freq_axis") {
      c.freq_axis = parse_axis(value);
    } else if (key == "normalization") {
      if (value == "aee") c.normalization = Normalization::Aee;
      else if (value == "none") c.normalization = Normalization::None;
      else throw DataError("unknown normalization `" + value + "`");
    } else if (key == "target_rate_hz") {
      c.target_rate_hz = parse_double(value, key);
    } else {
      throw DataError("unknown preprocessing key `" + key + "`");
    }
  }
  c.validate();
  return c;
}

std::string PreprocConfig::fingerprint() const { return sha256_hex(serialize()); }

std::size_t PreprocConfig::output_bins() const {
  if (freq_axis == AxisKind::Erb) return static_cast<std::size_t>(erb_filters);
  return static_cast<std::size_t>(fft_size / 2 + 1);
}

// --- resampling --------------------------------------------------------------

namespace {

constexpr int kSincZeroCrossings = 64;
constexpr double kKaiserBeta = 8.6;

double kaiser(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  static const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - u * u)) / norm;
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

std::vector<double> resample_signal(std::span<const double> x, double source_rate_hz,
                                    double target_rate_hz) {
  if (x.empty()) throw DataError("resample: empty input");
  if (!(source_rate_hz > 0.0) || !(target_rate_hz > 0.0)) {
    throw UsageError("resample: sample rates must be positive");
  }
  if (source_rate_hz == target_rate_hz) return {x.begin(), x.end()};

  const double ratio = target_rate_hz / source_rate_hz;
  const double cutoff = std::min(1.0, ratio);
  const double half_width = kSincZeroCrossings / cutoff;  // in input samples
  const auto out_len =
      static_cast<std::size_t>(std::ceil(static_cast<double>(x.size()) * ratio - 1e-9));
  const auto n_in = static_cast<std::ptrdiff_t>(x.size());

  std::vector<double> y(out_len, 0.0);
  for (std::size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const auto k_lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto k_hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) {
      const double d = t - static_cast<double>(k);
      acc += x[static_cast<std::size_t>(k)] * cutoff * sinc(cutoff * d) * kaiser(d / half_width);
    }
    y[n] = acc;
  }
  return y;
}

Hrir resample(const Hrir& h, double target_rate_hz) {
  if (h.left.empty() || h.right.empty()) throw DataError("resample: empty HRIR");
  if (h.left.size() != h.right.size()) throw DataError("resample: channel length mismatch");
  if (!(target_rate_hz > 0.0)) throw UsageError("resample: target rate must be positive");
  if (h.sample_rate_hz == target_rate_hz) return h;
  Hrir out = h;
  out.left = resample_signal(h.left, h.sample_rate_hz, target_rate_hz);
  out.right = resample_signal(h.right, h.sample_rate_hz, target_rate_hz);
  out.sample_rate_hz = target_rate_hz;
  return out;
}

// --- FFT -------------------------------------------------------------------

namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

// FFTW's planner is not thread-safe; plans are created once per size.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

fftw_plan forward_plan(int n) {
  static std::map<int, fftw_plan> plans;
  std::lock_guard lock(plan_mutex());
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  auto in = fftw_buffer<double>(static_cast<std::size_t>(n));
  auto out = fftw_buffer<fftw_complex>(static_cast<std::size_t>(n / 2 + 1));
  fftw_plan p = fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE);
  plans.emplace(n, p);
  return p;
}

fftw_plan inverse_plan(int n) {
  static std::map<int, fftw_plan> plans;
  std::lock_guard lock(plan_mutex());
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  auto in = fftw_buffer<fftw_complex>(static_cast<std::size_t>(n / 2 + 1));
  auto out = fftw_buffer<double>(static_cast<std::size_t>(n));
  fftw_plan p = fftw_plan_dft_c2r_1d(n, in.get(), out.get(), FFTW_ESTIMATE);
  plans.emplace(n, p);
  return p;
}

void check_fft_size(int n) {
  if (n <= 0 || n % 2 != 0) {
    throw UsageError("fft_size must be positive and even, got " + std::to_string(n));
  }
}

}  // namespace

std::vector<std::complex<double>> real_fft(std::span<const double> x, int n) {
  check_fft_size(n);
  const auto len = static_cast<std::size_t>(n);
  auto in = fftw_buffer<double>(len);
  auto out = fftw_buffer<fftw_complex>(len / 2 + 1);
  const std::size_t copy = std::min(len, x.size());
  std::copy_n(x.begin(), copy, in.get());
  std::fill(in.get() + copy, in.get() + len, 0.0);
  fftw_execute_dft_r2c(forward_plan(n), in.get(), out.get());
  std::vector<std::complex<double>> result(len / 2 + 1);
  for (std::size_t k = 0; k < result.size(); ++k) result[k] = {out[k][0], out[k][1]};
  return result;
}

std::vector<double> inverse_real_fft(std::span<const std::complex<double>> half, int n) {
  check_fft_size(n);
  const auto len = static_cast<std::size_t>(n);
  if (half.size() != len / 2 + 1) throw UsageError("inverse_real_fft: half spectrum size mismatch");
  auto in = fftw_buffer<fftw_complex>(len / 2 + 1);
  auto out = fftw_buffer<double>(len);
  for (std::size_t k = 0; k < half.size(); ++k) {
    in[k][0] = half[k].real();
    in[k][1] = half[k].imag();
  }
  fftw_execute_dft_c2r(inverse_plan(n), in.get(), out.get());
  return std::vector<double>(out.get(), out.get() + len);
}

std::vector<double> magnitude_spectrum(std::span<const double> x, int fft_size) {
  const auto spec = real_fft(x, fft_size);
  std::vector<double> mag(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) mag[k] = std::abs(spec[k]);
  return mag;
}

std::pair<std::vector<double>, std::vector<double>> to_magnitude(const Hrir& h, int fft_size) {
  check_fft_size(fft_size);
  if (h.left.size() != h.right.size()) throw DataError("to_magnitude: channel length mismatch");
  return {magnitude_spectrum(h.left, fft_size), magnitude_spectrum(h.right, fft_size)};
}

// --- AEE -------------------------------------------------------------------

namespace {

std::vector<std::size_t> equator_indices(std::span<const HrtfSample> s, double tol,
                                         bool& widened, double& ring) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (std::abs(s[i].direction.vertical.elevation_deg) <= tol) idx.push_back(i);
  }
  widened = false;
  ring = 0.0;
  if (!idx.empty()) return idx;

  // No equator ring: fall back to the ring closest to it.
  double nearest = std::abs(s[0].direction.vertical.elevation_deg);
  for (const auto& x : s) nearest = std::min(nearest, std::abs(x.direction.vertical.elevation_deg));
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (std::abs(s[i].direction.vertical.elevation_deg) - nearest <= 1e-6) idx.push_back(i);
  }
  widened = true;
  ring = nearest;
  return idx;
}

double mean_energy(std::span<const HrtfSample> s, std::span<const std::size_t> idx) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto i : idx) {
    for (const double v : s[i].ipsi) sum += v * v;
    for (const double v : s[i].contra) sum += v * v;
    count += s[i].ipsi.size() + s[i].contra.size();
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace

double equator_mean_energy(std::span<const HrtfSample> subject_samples, double tolerance_deg) {
  if (subject_samples.empty()) throw DataError("equator energy: subject has no measurements");
  bool widened = false;
  double ring = 0.0;
  const auto idx = equator_indices(subject_samples, tolerance_deg, widened, ring);
  return mean_energy(subject_samples, idx);
}

AeeReport aee_normalize(std::span<HrtfSample> subject_samples) {
  if (subject_samples.empty()) throw DataError("AEE: subject has no measurements");
  AeeReport report;
  const std::span<const HrtfSample> view(subject_samples.data(), subject_samples.size());
  const auto idx = equator_indices(view, kEquatorToleranceDeg, report.widened,
                                   report.ring_elevation_deg);
  report.equator_samples = idx.size();
  report.equator_energy = mean_energy(view, idx);
  if (!(report.equator_energy > 0.0) || !std::isfinite(report.equator_energy)) {
    throw NumericalError("AEE: equator energy is zero or non-finite for subject " +
                         subject_samples[0].subject_id);
  }
  report.scale = 1.0 / std::sqrt(report.equator_energy);
  for (auto& s : subject_samples) {
    for (auto& v : s.ipsi) v *= report.scale;
    for (auto& v : s.contra) v *= report.scale;
  }
  return report;
}

// --- Mel -------------------------------------------------------------------

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::size_t nearest_bin(const std::vector<double>& centers, double hz) {
  auto it = std::lower_bound(centers.begin(), centers.end(), hz);
  if (it == centers.begin()) return 0;
  if (it == centers.end()) return centers.size() - 1;
  const auto hi = static_cast<std::size_t>(it - centers.begin());
  const std::size_t lo = hi - 1;
  // Ties go to the lower bin.
  return (hz - centers[lo] <= centers[hi] - hz) ? lo : hi;
}

}  // namespace

std::vector<std::size_t> mel_bin_indices(const AxisSpec& axis) {
  if (axis.kind != AxisKind::Linear) throw UsageError("mel_warp: input axis must be linear");
  const std::size_t b = axis.size();
  if (b < 2) throw UsageError("mel_warp: need at least two bins");
  const double m0 = hz_to_mel(axis.bin_center_hz.front());
  const double m1 = hz_to_mel(axis.bin_center_hz.back());
  std::vector<std::size_t> idx(b);
  for (std::size_t i = 0; i < b; ++i) {
    const double m = m0 + (m1 - m0) * static_cast<double>(i) / static_cast<double>(b - 1);
    idx[i] = nearest_bin(axis.bin_center_hz, mel_to_hz(m));
  }
  idx.front() = 0;
  idx.back() = b - 1;
  return idx;
}

std::pair<std::vector<double>, AxisSpec> mel_warp(std::span<const double> mag,
                                                  const AxisSpec& axis) {
  if (mag.size() != axis.size()) throw UsageError("mel_warp: magnitude/axis length mismatch");
  const auto idx = mel_bin_indices(axis);
  const std::size_t b = axis.size();
  std::vector<double> out(b);
  AxisSpec out_axis;
  out_axis.kind = AxisKind::Mel;
  out_axis.bin_center_hz.resize(b);
  const double m0 = hz_to_mel(axis.bin_center_hz.front());
  const double m1 = hz_to_mel(axis.bin_center_hz.back());
  for (std::size_t i = 0; i < b; ++i) {
    out[i] = mag[idx[i]];
    out_axis.bin_center_hz[i] =
        mel_to_hz(m0 + (m1 - m0) * static_cast<double>(i) / static_cast<double>(b - 1));
  }
  out_axis.bin_center_hz.front() = axis.bin_center_hz.front();
  out_axis.bin_center_hz.back() = axis.bin_center_hz.back();
  return {std::move(out), std::move(out_axis)};
}

// --- band cut / scaling ------------------------------------------------------

std::vector<double> band_cut(std::span<const double> mag, const AxisSpec& axis, double low_hz,
                             double high_hz) {
  if (!(low_hz < high_hz)) throw UsageError("band_cut: low must be below high");
  if (mag.size() != axis.size()) throw UsageError("band_cut: magnitude/axis length mismatch");
  std::vector<double> out(mag.begin(), mag.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double f = axis.bin_center_hz[k];
    if (f < low_hz || f > high_hz) out[k] = 0.0;
  }
  return out;
}

std::vector<double> amplitude_scale(std::span<const double> mag, AmplitudeScale kind) {
  std::vector<double> out(mag.begin(), mag.end());
  if (kind == AmplitudeScale::Log10) {
    for (auto& v : out) v = 20.0 * std::log10(v + kLogFloor);
  }
  return out;
}

// --- ERB ---------------------------------------------------------------------

double hz_to_erb_rate(double hz) { return 21.4 * std::log10(1.0 + 0.00437 * hz); }
double erb_rate_to_hz(double erb) { return (std::pow(10.0, erb / 21.4) - 1.0) / 0.00437; }

ErbFilterbank build_erb_filterbank(int n_filters, double low_hz, double high_hz,
                                   const AxisSpec& input_axis) {
  if (n_filters < 2) throw UsageError("ERB filterbank needs at least 2 filters");
  if (!(low_hz > 0.0 && low_hz < high_hz)) throw UsageError("ERB filterbank: invalid range");
  if (input_axis.kind != AxisKind::Linear || input_axis.size() < 2) {
    throw UsageError("ERB filterbank: input axis must be linear");
  }
  const auto n = static_cast<std::size_t>(n_filters);
  const std::size_t bins = input_axis.size();
  const double e_lo = hz_to_erb_rate(low_hz);
  const double e_hi = hz_to_erb_rate(high_hz);
  const double step = (e_hi - e_lo) / static_cast<double>(n - 1);

  ErbFilterbank fb;
  fb.input_axis = input_axis;
  fb.center_hz.resize(n);
  std::vector<double> center_erb(n);
  for (std::size_t k = 0; k < n; ++k) {
    center_erb[k] = e_lo + step * static_cast<double>(k);
    fb.center_hz[k] = erb_rate_to_hz(center_erb[k]);
  }
  fb.center_hz.front() = low_hz;
  fb.center_hz.back() = high_hz;

  std::vector<double> bin_erb(bins);
  for (std::size_t b = 0; b < bins; ++b) bin_erb[b] = hz_to_erb_rate(input_axis.bin_center_hz[b]);

  // Each centre needs its own bin, otherwise neighbouring filters collapse.
  std::size_t prev_bin = bins;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < bins; ++b) {
      if (std::abs(bin_erb[b] - center_erb[k]) < std::abs(bin_erb[best] - center_erb[k])) best = b;
    }
    if (best == prev_bin) {
      throw UsageError("ERB filterbank: " + std::to_string(bins) +
                       " bins cannot resolve neighbouring centres near " +
                       format_double(fb.center_hz[k]) + " Hz");
    }
    prev_bin = best;
  }

  fb.weights.assign(n * bins, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double* row = fb.weights.data() + k * bins;
    for (std::size_t b = 0; b < bins; ++b) {
      const double u = (bin_erb[b] - center_erb[k]) / step;
      if (std::abs(u) < 1.0) row[b] = std::cos(0.5 * std::numbers::pi * u);
    }
  }
  return fb;
}

std::vector<double> apply_filterbank(std::span<const double> mag, const ErbFilterbank& fb) {
  if (mag.size() != fb.fft_bins()) {
    throw UsageError("apply_filterbank: expected " + std::to_string(fb.fft_bins()) +
                     " bins, got " + std::to_string(mag.size()));
  }
  std::vector<double> out(fb.n_filters(), 0.0);
  for (std::size_t k = 0; k < fb.n_filters(); ++k) {
    const auto w = fb.row(k);
    double acc = 0.0;
    for (std::size_t b = 0; b < w.size(); ++b) {
      if (w[b] != 0.0) acc += w[b] * mag[b];
    }
    out[k] = acc;
  }
  return out;
}

// --- pipeline --------------------------------------------------------------

namespace {

std::shared_ptr<const ErbFilterbank> cached_filterbank(const PreprocConfig& cfg) {
  using Key = std::tuple<int, double, double, int, double>;
  static std::map<Key, std::shared_ptr<const ErbFilterbank>> cache;
  static std::mutex m;
  const Key key{cfg.erb_filters, cfg.erb_low_hz, cfg.erb_high_hz, cfg.fft_size, cfg.target_rate_hz};
  std::lock_guard lock(m);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto fb = std::make_shared<const ErbFilterbank>(
      build_erb_filterbank(cfg.erb_filters, cfg.erb_low_hz, cfg.erb_high_hz,
                           AxisSpec::linear(static_cast<std::size_t>(cfg.fft_size), cfg.target_rate_hz)));
  cache.emplace(key, fb);
  return fb;
}

}  // namespace

PreprocResult preprocess_subject(std::span<const Hrir> subject, const PreprocConfig& cfg) {
  cfg.validate();
  if (subject.empty()) throw DataError("preprocess: subject has no measurements");
  const std::string fingerprint = cfg.fingerprint();
  const AxisSpec linear_axis =
      AxisSpec::linear(static_cast<std::size_t>(cfg.fft_size), cfg.target_rate_hz);

  PreprocResult result;
  result.samples.reserve(subject.size());
  for (const auto& hrir : subject) {
    const Hrir h = resample(hrir, cfg.target_rate_hz);
    auto [left, right] = to_magnitude(h, cfg.fft_size);
    auto [ipsi, contra] = ipsi_contra_swap(left, right, h.direction.interaural.lateral_deg);
    if (cfg.band_cut_hz) {
      ipsi = band_cut(ipsi, linear_axis, cfg.band_cut_hz->low_hz, cfg.band_cut_hz->high_hz);
      contra = band_cut(contra, linear_axis, cfg.band_cut_hz->low_hz, cfg.band_cut_hz->high_hz);
    }
    HrtfSample s;
    s.ipsi = std::move(ipsi);
    s.contra = std::move(contra);
    s.freq_axis = linear_axis;
    s.direction = h.direction;
    s.subject_id = h.subject_id;
    s.dataset_id = h.dataset_id;
    s.preproc = fingerprint;
    result.samples.push_back(std::move(s));
  }

  if (cfg.normalization == Normalization::Aee) {
    result.aee = aee_normalize(result.samples);
  }

  if (cfg.freq_axis == AxisKind::Mel) {
    for (auto& s : result.samples) {
      auto [ipsi, axis] = mel_warp(s.ipsi, s.freq_axis);
      auto contra = mel_warp(s.contra, s.freq_axis).first;
      s.ipsi = std::move(ipsi);
      s.contra = std::move(contra);
      s.freq_axis = std::move(axis);
    }
  } else if (cfg.freq_axis == AxisKind::Erb) {
    const auto fb = cached_filterbank(cfg);
    AxisSpec erb_axis;
    erb_axis.kind = AxisKind::Erb;
    erb_axis.bin_center_hz = fb->center_hz;
    for (auto& s : result.samples) {
      s.ipsi = apply_filterbank(s.ipsi, *fb);
      s.contra = apply_filterbank(s.contra, *fb);
      s.freq_axis = erb_axis;
    }
  }

  if (cfg.amplitude_scale != AmplitudeScale::Linear) {
    for (auto& s : result.samples) {
      s.ipsi = amplitude_scale(s.ipsi, cfg.amplitude_scale);
      s.contra = amplitude_scale(s.contra, cfg.amplitude_scale);
    }
  }
  return result;
}

}  // namespace hrtfxai
