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

#include "hrtfxai/eval.hpp"

#include <algorithm>
#include <numeric>

#include "hrtfxai/error.hpp"
#include "hrtfxai/util.hpp"
#include "json.hpp"

namespace hrtfxai {

using nlohmann::json;

namespace {

void check_inputs(std::span<const int> preds, std::span<const int> labels) {
  if (preds.empty()) throw DataError("metrics: empty input");
  if (preds.size() != labels.size()) {
    throw ShapeMismatch("metrics: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= kNumClasses || preds[i] < 0 || preds[i] >= kNumClasses) {
      throw DataError("metrics: class index out of range at position " + std::to_string(i));
    }
  }
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

LabelSpace full_label_space() {
  LabelSpace s;
  s.fill(true);
  return s;
}

LabelSpace label_space_of(std::span<const int> labels) {
  LabelSpace s{};
  for (const int l : labels) {
    if (l >= 0 && l < kNumClasses) s[static_cast<std::size_t>(l)] = true;
  }
  return s;
}

ClassMetrics metrics(std::span<const int> preds, std::span<const int> labels, const std::optional<LabelSpace>& space) {
  check_inputs(preds, labels);
  ClassMetrics m;
  m.n = preds.size();
  m.label_space = space.value_or(full_label_space());
  std::array<std::size_t, kNumClasses> tp{}, fp{}, fn{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto p = static_cast<std::size_t>(preds[i]);
    const auto l = static_cast<std::size_t>(labels[i]);
    ++m.support[l];
    if (p == l) {
      ++tp[l];
      ++correct;
    } else {
      ++fp[p];
      ++fn[l];
    }
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  std::size_t counted = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double t = static_cast<double>(tp[c]);
    m.precision[c] = tp[c] + fp[c] ? t / static_cast<double>(tp[c] + fp[c]) : 0.0;
    m.recall[c] = tp[c] + fn[c] ? t / static_cast<double>(tp[c] + fn[c]) : 0.0;
    const double s = m.precision[c] + m.recall[c];
    m.f1[c] = s > 0.0 ? 2.0 * m.precision[c] * m.recall[c] / s : 0.0;
    if (m.label_space[c]) {
      m.macro_precision += m.precision[c];
      m.macro_recall += m.recall[c];
      m.macro_f1 += m.f1[c];
      ++counted;
    }
  }
  if (counted) {
    m.macro_precision /= static_cast<double>(counted);
    m.macro_recall /= static_cast<double>(counted);
    m.macro_f1 /= static_cast<double>(counted);
  }
  return m;
}

bool classes_adjacent(ElevationClass a, ElevationClass b) {
  using E = ElevationClass;
  if (a == b) return false;
  static constexpr std::array<E, 7> ring = {E::FrontDown, E::FrontLevel, E::FrontUp, E::Up,
                                            E::BackUp,    E::BackLevel,  E::BackDown};
  auto ring_pos = [](E c) -> int {
    for (int i = 0; i < 7; ++i) {
      if (ring[static_cast<std::size_t>(i)] == c) return i;
    }
    return -1;
  };
  auto lateral_touches = [](E lat, E medial) {
    if (lat == E::LateralUp) return medial == E::FrontUp || medial == E::Up || medial == E::BackUp;
    return medial == E::FrontDown || medial == E::BackDown;
  };
  const int pa = ring_pos(a);
  const int pb = ring_pos(b);
  if (pa >= 0 && pb >= 0) {
    const int d = std::abs(pa - pb);
    return d == 1 || d == 6;
  }
  if (pa < 0 && pb < 0) return true;  // LU and LD
  return pa < 0 ? lateral_touches(a, b) : lateral_touches(b, a);
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels) {
  check_inputs(preds, labels);
  ConfusionMatrix c;
  c.n = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    const auto p = static_cast<std::size_t>(preds[i]);
    ++c.counts[l][p];
    if (l != p) {
      ++c.errors;
      if (classes_adjacent(class_from_index(labels[i]), class_from_index(preds[i]))) ++c.adjacent_errors;
    }
  }
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    const std::size_t total = std::accumulate(c.counts[r].begin(), c.counts[r].end(), std::size_t{0});
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      c.rates[r][k] = total ? static_cast<double>(c.counts[r][k]) / static_cast<double>(total) : 0.0;
    }
  }
  c.adjacency_fraction = c.errors ? static_cast<double>(c.adjacent_errors) / static_cast<double>(c.errors) : 0.0;
  return c;
}

std::vector<int> predict_all(const CnnModel& model, const std::vector<HrtfSample>& samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  ForwardTrace trace;
  for (const auto& s : samples) {
    if (s.bins() != model.input_bins()) {
      throw ShapeMismatch("model expects " + std::to_string(model.input_bins()) + " bins, sample " + s.subject_id +
                          " has " + std::to_string(s.bins()));
    }
    model.forward_into(trace, pack_input(s), s.bins());
    out.push_back(trace.predicted_class());
  }
  return out;
}

std::vector<int> labels_of(const std::vector<HrtfSample>& samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(to_index(s.label()));
  return out;
}

CrossSummary summarize(const std::vector<std::vector<double>>& f1) {
  CrossSummary s;
  const std::size_t rows = f1.size();
  if (rows == 0) throw DataError("summarize: empty matrix");
  const std::size_t cols = f1.front().size();
  const std::size_t diag = std::min(rows, cols);
  if (diag == 0) throw DataError("summarize: empty matrix");
  for (std::size_t i = 0; i < diag; ++i) s.in_domain += f1[i][i];
  s.in_domain /= static_cast<double>(diag);

  double best = 0.0, med = 0.0, avg = 0.0, worst = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (f1[i].size() != cols) throw ShapeMismatch("summarize: ragged matrix");
    std::vector<double> off;
    for (std::size_t j = 0; j < cols; ++j) {
      if (j != i) off.push_back(f1[i][j]);
    }
    if (off.empty()) continue;
    best += *std::max_element(off.begin(), off.end());
    worst += *std::min_element(off.begin(), off.end());
    avg += std::accumulate(off.begin(), off.end(), 0.0) / static_cast<double>(off.size());
    med += median_of(off);
    ++used;
  }
  if (used) {
    const double n = static_cast<double>(used);
    s.best = best / n;
    s.median = med / n;
    s.average = avg / n;
    s.worst = worst / n;
  }
  return s;
}

CrossMatrix cross_matrix(const std::vector<NamedModel>& models, const std::vector<NamedTestSet>& test_sets) {
  if (models.empty() || test_sets.empty()) throw UsageError("cross_matrix: need at least one model and test set");
  CrossMatrix m;
  for (const auto& t : test_sets) {
    if (!t.samples || t.samples->empty()) throw DataError("cross_matrix: test set `" + t.id + "` is empty");
    m.dataset_ids.push_back(t.id);
  }
  for (const auto& nm : models) {
    m.model_ids.push_back(nm.id);
    std::vector<double> row;
    for (const auto& t : test_sets) {
      if (t.samples->front().bins() != nm.model->input_bins()) {
        throw ShapeMismatch("model `" + nm.id + "` expects " + std::to_string(nm.model->input_bins()) +
                            " bins but test set `" + t.id + "` has " + std::to_string(t.samples->front().bins()));
      }
      const auto labels = labels_of(*t.samples);
      const auto preds = predict_all(*nm.model, *t.samples);
      row.push_back(metrics(preds, labels, label_space_of(labels)).macro_f1);
    }
    m.f1.push_back(std::move(row));
  }
  return m;
}

void write_cross_csv(const CrossMatrix& m, const std::filesystem::path& path) {
  std::string text = "model";
  for (const auto& d : m.dataset_ids) text += "," + d;
  text += "\n";
  for (std::size_t i = 0; i < m.model_ids.size(); ++i) {
    text += m.model_ids[i];
    for (const double v : m.f1[i]) text += "," + format_double(v);
    text += "\n";
  }
  write_file(path, text);
}

CrossMatrix read_cross_csv(const std::filesystem::path& path) {
  CrossMatrix m;
  bool header = true;
  for (const auto& raw : split(read_file(path), '\n')) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (header) {
      m.dataset_ids.assign(cols.begin() + 1, cols.end());
      header = false;
      continue;
    }
    if (cols.size() != m.dataset_ids.size() + 1) throw DataError(path.string() + ": ragged cross-matrix row");
    m.model_ids.push_back(cols[0]);
    std::vector<double> row;
    for (std::size_t j = 1; j < cols.size(); ++j) row.push_back(parse_double(cols[j], "f1"));
    m.f1.push_back(std::move(row));
  }
  if (m.model_ids.empty()) throw DataError(path.string() + ": no rows");
  return m;
}

void write_confusion_csv(const ConfusionMatrix& c, const std::filesystem::path& path) {
  std::string text = "true\\pred";
  for (int k = 0; k < kNumClasses; ++k) text += "," + std::string(class_code(class_from_index(k)));
  text += "\n";
  for (int r = 0; r < kNumClasses; ++r) {
    text += class_code(class_from_index(r));
    for (int k = 0; k < kNumClasses; ++k) {
      text += "," + std::to_string(c.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)]);
    }
    text += "\n";
  }
  write_file(path, text);
}

std::string metrics_json(const ClassMetrics& m) {
  json j;
  j["n"] = m.n;
  j["accuracy"] = m.accuracy;
  j["macro_precision"] = m.macro_precision;
  j["macro_recall"] = m.macro_recall;
  j["macro_f1"] = m.macro_f1;
  json per = json::object();
  json space = json::array();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto i = static_cast<std::size_t>(c);
    const std::string code(class_code(class_from_index(c)));
    per[code] = {{"precision", m.precision[i]}, {"recall", m.recall[i]}, {"f1", m.f1[i]}, {"support", m.support[i]}};
    if (m.label_space[i]) space.push_back(code);
  }
  j["per_class"] = per;
  j["label_space"] = space;
  return j.dump();
}

std::string confusion_json(const ConfusionMatrix& c) {
  json j;
  j["n"] = c.n;
  j["errors"] = c.errors;
  j["adjacent_errors"] = c.adjacent_errors;
  j["adjacency_fraction"] = c.adjacency_fraction;
  json labels = json::array();
  for (int k = 0; k < kNumClasses; ++k) labels.push_back(class_code(class_from_index(k)));
  j["labels"] = labels;
  j["counts"] = c.counts;
  j["rates"] = c.rates;
  return j.dump();
}

std::string summary_json(const CrossSummary& s) {
  json j;
  j["in_domain"] = s.in_domain;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  j["best"] = opt(s.best);
  j["median"] = opt(s.median);
  j["average"] = opt(s.average);
  j["worst"] = opt(s.worst);
  return j.dump();
}

}  // namespace hrtfxai
