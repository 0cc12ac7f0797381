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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrtfxai/coords.hpp"
#include "hrtfxai/dsp.hpp"
#include "hrtfxai/model.hpp"

namespace hrtfxai {

// Classes that count towards a macro average.
using LabelSpace = std::array<bool, kNumClasses>;

LabelSpace full_label_space();
// Classes with at least one label present.
LabelSpace label_space_of(std::span<const int> labels);

struct ClassMetrics {
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  std::array<std::size_t, kNumClasses> support{};
  LabelSpace label_space{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
};

// One-vs-rest metrics; the macro averages run over `space` (all nine classes
// by default), with classes that are never predicted or present scoring 0.
ClassMetrics metrics(std::span<const int> preds, std::span<const int> labels,
                     const std::optional<LabelSpace>& space = std::nullopt);

struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};  // [true][pred]
  std::array<std::array<double, kNumClasses>, kNumClasses> rates{};        // row-normalized
  std::size_t n = 0;
  std::size_t errors = 0;
  std::size_t adjacent_errors = 0;
  // adjacent_errors / errors, 0 when there are no errors.
  double adjacency_fraction = 0.0;
};

// Neighbours along FD-FL-FU-UP-BU-BL-BD (circular); LU touches LD and the
// upper medial sectors, LD touches LU and the lower ones.
bool classes_adjacent(ElevationClass a, ElevationClass b);

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels);

std::vector<int> predict_all(const CnnModel& model, const std::vector<HrtfSample>& samples);
std::vector<int> labels_of(const std::vector<HrtfSample>& samples);

struct CrossSummary {
  double in_domain = 0.0;
  // Off-diagonal per-row statistics averaged over rows; absent for a 1x1 matrix.
  std::optional<double> best;
  std::optional<double> median;
  std::optional<double> average;
  std::optional<double> worst;
};

struct CrossMatrix {
  std::vector<std::string> model_ids;
  std::vector<std::string> dataset_ids;
  std::vector<std::vector<double>> f1;  // [model][dataset]
};

// Pure function of the matrix: diagonal mean plus off-diagonal reductions.
CrossSummary summarize(const std::vector<std::vector<double>>& f1);

struct NamedModel {
  std::string id;
  const CnnModel* model = nullptr;
};
struct NamedTestSet {
  std::string id;
  const std::vector<HrtfSample>* samples = nullptr;
};

CrossMatrix cross_matrix(const std::vector<NamedModel>& models, const std::vector<NamedTestSet>& test_sets);

void write_cross_csv(const CrossMatrix& m, const std::filesystem::path& path);
CrossMatrix read_cross_csv(const std::filesystem::path& path);
void write_confusion_csv(const ConfusionMatrix& c, const std::filesystem::path& path);

// JSON fragments used by reports.
std::string metrics_json(const ClassMetrics& m);
std::string confusion_json(const ConfusionMatrix& c);
std::string summary_json(const CrossSummary& s);

}  // namespace hrtfxai
