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

#include "hrtfxai/dsp.hpp"
#include "hrtfxai/model.hpp"

namespace hrtfxai {

struct SampleRef {
  std::size_t index = 0;  // position in the caller's sample list
  std::string subject_id;
  std::string dataset_id;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

SampleRef make_ref(const HrtfSample& s, std::size_t index);

struct SaliencyMap {
  std::vector<double> values;   // length B, in [0, 1]
  std::vector<double> raw_cam;  // length L
  int class_id = 0;
  int predicted_class = 0;
  double confidence = 0.0;      // softmax probability of predicted_class
  bool no_positive_evidence = false;
  SampleRef provenance;
};

// Class activation map over the last conv layer: M_c(x) = sum_k w_ck A_k(x).
std::vector<double> cam(const ForwardTrace& trace, const CnnModel& model, int class_id);

// Linear interpolation of L points onto B bins (endpoints pinned), ReLU,
// then division by the maximum. Sets *no_positive when nothing survives.
std::vector<double> upsample_normalize(std::span<const double> raw, std::size_t bins,
                                       bool* no_positive = nullptr);

SaliencyMap saliency_from_trace(const ForwardTrace& trace, const CnnModel& model, int class_id);
SaliencyMap saliency(const CnnModel& model, const HrtfSample& s, int class_id);
// Saliency for whatever class the model predicts.
SaliencyMap saliency_predicted(const CnnModel& model, const HrtfSample& s);

// Magnitudes multiplied by the saliency (ipsi, contra).
std::pair<std::vector<double>, std::vector<double>> occlusion_render(const HrtfSample& s,
                                                                     const SaliencyMap& sal);

// Saliencies of one (class, dataset) cell, rows ordered by confidence
// descending (ties by sample index).
struct SaliencyStack {
  int class_id = 0;
  std::string dataset_id;
  std::vector<SaliencyMap> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  std::size_t bins() const { return rows.empty() ? 0 : rows.front().values.size(); }
};

SaliencyStack aggregate(const std::vector<HrtfSample>& samples, const CnnModel& model,
                        const std::string& dataset_id, int class_id, bool only_correct = true);

struct MeanSaliencyContour {
  int class_id = 0;
  std::size_t rows_per_dataset = 0;
  std::vector<std::string> dataset_ids;           // non-empty stacks only
  std::vector<std::vector<double>> per_dataset;   // mean curve per dataset
  std::vector<double> msc;
  std::vector<SaliencyStack> equalized;           // top rows kept per dataset
};

// Truncates every non-empty stack to the smallest non-empty size (dropping the
// least confident rows) and averages with equal dataset weight.
MeanSaliencyContour equalize_and_msc(const std::vector<SaliencyStack>& stacks);

struct PrototypeHrtf {
  int class_id = 0;
  std::vector<double> ipsi;
  std::vector<double> contra;
  double variance_target = 0.90;
  double variance_kept = 1.0;     // actual cumulative fraction of the kept PCs
  std::size_t components = 0;
  SaliencyMap saliency;           // for class_id
  int predicted_class = 0;
  double confidence = 0.0;
};

PrototypeHrtf prototype(const std::vector<HrtfSample>& samples, const CnnModel& model, int class_id,
                        double variance_kept = 0.90);

// Index of the sample closest (Euclidean, over ipsi and contra) to the
// prototype; ties go to the lower index.
std::size_t nearest_sample(const std::vector<HrtfSample>& samples, const PrototypeHrtf& proto);

inline constexpr double kSagittalToleranceDeg = 10.0;

struct SagittalRow {
  std::size_t sample_index = 0;
  double polar_deg = 0.0;
  SaliencyMap saliency;  // for the predicted class
};

// Samples with |lateral| <= tolerance, sorted by polar angle.
std::vector<SagittalRow> sagittal_map(const std::vector<HrtfSample>& subject_samples, const CnnModel& model,
                                      double tolerance_deg = kSagittalToleranceDeg);

// (subject_id, mean confidence of the predicted class), best first.
std::vector<std::pair<std::string, double>> rank_subjects_by_confidence(const std::vector<HrtfSample>& samples,
                                                                        const CnnModel& model);

// --- exports -----------------------------------------------------------------

inline constexpr std::string_view kStackMagic = "HRSTACK1";

void write_stack_csv(const SaliencyStack& stack, const std::filesystem::path& path);
std::string encode_stack(const SaliencyStack& stack);
SaliencyStack decode_stack(std::string_view bytes, const std::string& source = "<memory>");
void write_stack(const SaliencyStack& stack, const std::filesystem::path& path);
SaliencyStack read_stack(const std::filesystem::path& path);

// Header row `series,<hz>,<hz>...`, then one row per dataset and an `msc` row.
void write_msc_csv(const MeanSaliencyContour& msc, const AxisSpec& axis, const std::filesystem::path& path);
struct MscTable {
  std::vector<double> axis_hz;
  std::vector<std::string> series;
  std::vector<std::vector<double>> rows;
};
MscTable read_msc_csv(const std::filesystem::path& path);

}  // namespace hrtfxai
