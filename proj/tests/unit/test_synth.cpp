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

#include "hrtfxai/dataset.hpp"
#include "hrtfxai/error.hpp"
#include "hrtfxai/synth.hpp"

using namespace hrtfxai;
namespace fs = std::filesystem;

namespace {

SynthSpec small_spec(int subjects) {
  SynthSpec s;
  s.n_subjects = subjects;
  return s;
}

// Log magnitudes of both ears with the per-sample mean removed, so the
// broadband subject gain does not dominate the distance.
std::vector<double> features(const HrtfSample& s) {
  std::vector<double> f;
  for (double v : s.ipsi) f.push_back(std::log(v));
  for (double v : s.contra) f.push_back(std::log(v));
  double mean = 0.0;
  for (double v : f) mean += v / static_cast<double>(f.size());
  for (double& v : f) v -= mean;
  return f;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
  return d;
}

}  // namespace

TEST(SynthSpec, DefaultsAndNotchTrack) {
  const SynthSpec s;
  EXPECT_NO_THROW(s.validate());
  EXPECT_DOUBLE_EQ(s.notch_center_hz(-20.0), 5000.0);
  EXPECT_DOUBLE_EQ(s.notch_center_hz(70.0), 11000.0);
  EXPECT_DOUBLE_EQ(s.notch_center_hz(25.0), 8000.0);
  // Rear directions mirror the frontal track.
  EXPECT_DOUBLE_EQ(s.notch_center_hz(155.0), 8000.0);
  EXPECT_EQ(s.grid().size(), 42u);
}

TEST(SynthSpec, SerializeParseRoundTrip) {
  SynthSpec s;
  s.notch_depth_db = 12.5;
  s.notch_track = {{0.0, 6000.0}, {90.0, 10000.0}};
  const auto text = s.serialize();
  const auto back = SynthSpec::parse(text);
  EXPECT_EQ(back.serialize(), text);
  EXPECT_EQ(back.notch_track, s.notch_track);
  EXPECT_THROW(SynthSpec::parse("bogus = 1\n"), DataError);
}

TEST(SynthSpec, ValidationErrors) {
  SynthSpec sparse;
  sparse.polar_step_deg = 180.0;
  EXPECT_THROW(sparse.validate(), DataError);
  SynthSpec above_nyquist;
  above_nyquist.notch_track = {{0.0, 30000.0}};
  EXPECT_THROW(above_nyquist.validate(), UsageError);
  SynthSpec jitter;
  jitter.subject_jitter = 0.7;
  EXPECT_THROW(jitter.validate(), UsageError);
}

TEST(Synth, FrontUpNotchAtEightKilohertz) {
  const SynthSpec s;
  const InterauralPolar dir{0.0, 25.0};
  EXPECT_EQ(classify(dir), ElevationClass::FrontUp);
  for (double jitter : {0.95, 1.0, 1.05}) {
    const auto cues = planted_cues(s, dir, jitter);
    EXPECT_NEAR(cues.center_hz[0], 8000.0 * jitter, 1e-9);
    const auto [ipsi, contra] = synth_template(s, dir, {jitter, 0.0});
    const double bin_hz = s.sample_rate_hz / s.ir_length;
    const auto k = static_cast<std::size_t>(std::min_element(ipsi.begin(), ipsi.begin() + 250) - ipsi.begin());
    EXPECT_NEAR(static_cast<double>(k) * bin_hz, 8000.0 * jitter, bin_hz);
  }
}

TEST(Synth, CueFamiliesByRegion) {
  const SynthSpec s;
  EXPECT_EQ(planted_cues(s, {0.0, 0.0}, 1.0).center_hz.size(), 2u);     // notch + peak
  EXPECT_EQ(planted_cues(s, {0.0, 90.0}, 1.0).center_hz.size(), 1u);    // notch only
  const auto rear = planted_cues(s, {0.0, 180.0}, 1.0);
  ASSERT_EQ(rear.center_hz.size(), 2u);
  EXPECT_DOUBLE_EQ(rear.center_hz[1], 4000.0);
  SynthSpec flat;
  flat.notch_depth_db = 0.0;
  EXPECT_EQ(planted_cues(flat, {0.0, 0.0}, 1.0).center_hz.size(), 1u);
}

TEST(Synth, LinearPhaseIrReproducesTemplate) {
  const SynthSpec s;
  for (const InterauralPolar dir : {InterauralPolar{-45.0, 0.0}, InterauralPolar{15.0, 135.0}}) {
    const auto [ipsi, contra] = synth_template(s, dir, {1.03, -2.0});
    for (const auto* mag : {&ipsi, &contra}) {
      const auto ir = linear_phase_ir(*mag, s.ir_length);
      ASSERT_EQ(ir.size(), 512u);
      const auto back = magnitude_spectrum(ir, s.ir_length);
      for (std::size_t k = 0; k < back.size(); ++k) ASSERT_NEAR(back[k] / (*mag)[k], 1.0, 1e-6) << k;
    }
  }
}

TEST(Synth, GeneratedFilesMatchTemplatesWithoutNoise) {
  SynthSpec s = small_spec(2);
  s.subject_jitter = 0.0;
  s.subject_gain_db = 0.0;
  s.noise_floor_db = -400.0;
  const auto out = generate(s, 4);
  const auto grid = s.grid();
  const auto& rec = out.subjects[1];
  for (std::size_t d = 0; d < grid.size(); d += 5) {
    const auto dir = Direction::from_vertical(rec.directions[d].position);
    const auto [ipsi, contra] = synth_template(s, dir.interaural, {});
    const auto hrir = rec.to_hrirs()[d];
    const auto [l, r] = to_magnitude(hrir, s.ir_length);
    const auto& ipsi_mag = dir.interaural.lateral_deg <= 0.0 ? l : r;
    const auto& contra_mag = dir.interaural.lateral_deg <= 0.0 ? r : l;
    for (std::size_t k = 0; k < ipsi.size(); ++k) {
      ASSERT_NEAR(ipsi_mag[k] / ipsi[k], 1.0, 1e-5);
      ASSERT_NEAR(contra_mag[k] / contra[k], 1.0, 1e-5);
    }
  }
}

TEST(Synth, DeterministicBySeed) {
  const auto a = generate(small_spec(3), 11);
  const auto b = generate(small_spec(3), 11);
  const auto c = generate(small_spec(3), 12);
  ASSERT_EQ(a.subjects.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.subjects[i].irs, b.subjects[i].irs);
  EXPECT_NE(a.subjects[0].irs, c.subjects[0].irs);
  EXPECT_EQ(a.subjects[2].subject_id, "S003");
  EXPECT_EQ(a.truth.size(), 3u * 42u);
  EXPECT_EQ(a.truth[43].direction_index, 1u);
  EXPECT_EQ(encode_subject(a.subjects[0]), encode_subject(b.subjects[0]));
}

TEST(Synth, ClassBalanceOfDefaultGrid) {
  const auto out = generate(small_spec(1), 1);
  const auto h = class_balance(preprocess_records(out.subjects, PreprocConfig::raw()));
  EXPECT_EQ(h[to_index(ElevationClass::LateralUp)], 8u);
  EXPECT_EQ(h[to_index(ElevationClass::LateralDown)], 6u);
  for (int c = 0; c < 7; ++c) EXPECT_EQ(h[static_cast<std::size_t>(c)], 4u);
}

TEST(Synth, ZeroDepthGivesFlatSpectra) {
  SynthSpec s = small_spec(2);
  s.notch_depth_db = 0.0;
  s.noise_floor_db = -400.0;
  const auto out = generate(s, 3);
  EXPECT_TRUE(out.negative_control);
  for (const auto& rec : out.subjects) {
    const auto samples = preprocess_records({rec}, PreprocConfig::raw());
    const double level = samples[0].ipsi[1];
    for (const auto& smp : samples) {
      for (std::size_t k = 0; k < smp.bins(); ++k) {
        ASSERT_NEAR(smp.ipsi[k] / level, 1.0, 1e-5);
        ASSERT_NEAR(smp.contra[k] / level, 1.0, 1e-5);
      }
    }
  }
}

TEST(Synth, NearestCentroidSeparatesClasses) {
  const auto out = generate(small_spec(20), 5);
  const auto samples = preprocess_records(out.subjects, PreprocConfig::raw());
  std::vector<HrtfSample> train, test;
  for (const auto& s : samples) (s.subject_id <= "S015" ? train : test).push_back(s);
  const std::size_t bins = samples[0].bins();
  std::vector<std::vector<double>> centroid(kNumClasses, std::vector<double>(2 * bins, 0.0));
  std::vector<std::size_t> count(kNumClasses, 0);
  for (const auto& s : train) {
    const auto c = static_cast<std::size_t>(to_index(s.label()));
    const auto f = features(s);
    for (std::size_t k = 0; k < f.size(); ++k) centroid[c][k] += f[k];
    ++count[c];
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (auto& v : centroid[c]) v /= static_cast<double>(count[c]);
  }
  std::size_t correct = 0;
  for (const auto& s : test) {
    const auto f = features(s);
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
      if (distance(f, centroid[c]) < distance(f, centroid[best])) best = c;
    }
    correct += static_cast<int>(best) == to_index(s.label()) ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(test.size()), 0.95);
}

TEST(GroundTruth, CsvRoundTrip) {
  const auto out = generate(small_spec(2), 8);
  const auto path = fs::temp_directory_path() / "hrtfxai_test_truth.csv";
  write_ground_truth(out.truth, path);
  const auto back = read_ground_truth(path);
  ASSERT_EQ(back.size(), out.truth.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].subject_id, out.truth[i].subject_id);
    EXPECT_EQ(back[i].direction_index, out.truth[i].direction_index);
    ASSERT_EQ(back[i].center_hz.size(), out.truth[i].center_hz.size());
    for (std::size_t j = 0; j < back[i].center_hz.size(); ++j) {
      EXPECT_DOUBLE_EQ(back[i].center_hz[j], out.truth[i].center_hz[j]);
    }
  }
}

TEST(LocalizationScore, WorkedExamples) {
  const auto axis = AxisSpec::linear(512, 44100);
  const std::vector<double> centers = {8000.0};
  std::vector<double> delta(axis.size(), 0.0);
  delta[static_cast<std::size_t>(std::lround(8000.0 * 512 / 44100.0))] = 1.0;
  EXPECT_DOUBLE_EQ(saliency_localization_score(delta, centers, axis).score, 1.0);

  const std::vector<double> uniform(axis.size(), 0.3);
  std::size_t inside = 0;
  for (double f : axis.bin_center_hz) inside += (f >= 8000.0 / std::sqrt(2.0) && f <= 8000.0 * std::sqrt(2.0)) ? 1 : 0;
  const double expected = static_cast<double>(inside) / static_cast<double>(axis.size());
  EXPECT_NEAR(saliency_localization_score(uniform, centers, axis).score, expected, 1e-12);
  EXPECT_NEAR(uniform_baseline_score(centers, axis), expected, 1e-12);

  std::vector<double> outside(axis.size(), 0.0);
  outside[10] = 1.0;
  outside[250] = 0.5;
  EXPECT_DOUBLE_EQ(saliency_localization_score(outside, centers, axis).score, 0.0);

  const auto zero = saliency_localization_score(std::vector<double>(axis.size(), 0.0), centers, axis);
  EXPECT_TRUE(zero.zero_mass);
  EXPECT_EQ(zero.score, 0.0);
  EXPECT_THROW(saliency_localization_score(std::vector<double>(5), centers, axis), UsageError);
}
