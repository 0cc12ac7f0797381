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

#include "hrtfxai/xai.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "hrtfxai/error.hpp"
#include "hrtfxai/util.hpp"
#include "json.hpp"

namespace hrtfxai {

using nlohmann::json;

namespace {

void check_class(int class_id) {
  if (class_id < 0 || class_id >= kNumClasses) {
    throw UsageError("class id " + std::to_string(class_id) + " outside 0.." + std::to_string(kNumClasses - 1));
  }
}

bool by_confidence(const SaliencyMap& a, const SaliencyMap& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  return a.provenance.index < b.provenance.index;
}

}  // namespace

SampleRef make_ref(const HrtfSample& s, std::size_t index) {
  return SampleRef{index, s.subject_id, s.dataset_id, s.direction.vertical.azimuth_deg,
                   s.direction.vertical.elevation_deg};
}

std::vector<double> cam(const ForwardTrace& trace, const CnnModel& model, int class_id) {
  check_class(class_id);
  const std::size_t len = trace.last_conv_length();
  const auto act = trace.last_conv();
  if (act.size() != kLastConvChannels * len) throw ShapeMismatch("cam: trace does not match the model");
  std::vector<double> out(len, 0.0);
  for (std::size_t k = 0; k < kLastConvChannels; ++k) {
    const double w = model.dense_weight(class_id, k);
    const double* a = act.data() + k * len;
    for (std::size_t x = 0; x < len; ++x) out[x] += w * a[x];
  }
  return out;
}

std::vector<double> upsample_normalize(std::span<const double> raw, std::size_t bins, bool* no_positive) {
  if (raw.size() < 2) throw UsageError("upsample_normalize: need at least 2 CAM positions");
  std::vector<double> out(bins, 0.0);
  const double span = static_cast<double>(raw.size() - 1);
  for (std::size_t b = 0; b < bins; ++b) {
    const double pos = bins == 1 ? 0.0 : span * static_cast<double>(b) / static_cast<double>(bins - 1);
    auto i = static_cast<std::size_t>(std::floor(pos));
    if (i >= raw.size() - 1) i = raw.size() - 2;
    const double t = pos - static_cast<double>(i);
    out[b] = std::max(0.0, raw[i] + t * (raw[i + 1] - raw[i]));
  }
  const double peak = bins ? *std::max_element(out.begin(), out.end()) : 0.0;
  if (no_positive) *no_positive = !(peak > 0.0);
  if (peak > 0.0) {
    for (auto& v : out) v /= peak;
  }
  return out;
}

SaliencyMap saliency_from_trace(const ForwardTrace& trace, const CnnModel& model, int class_id) {
  SaliencyMap m;
  m.class_id = class_id;
  m.raw_cam = cam(trace, model, class_id);
  m.values = upsample_normalize(m.raw_cam, trace.input_bins, &m.no_positive_evidence);
  m.predicted_class = trace.predicted_class();
  m.confidence = trace.confidence();
  return m;
}

SaliencyMap saliency(const CnnModel& model, const HrtfSample& s, int class_id) {
  return saliency_from_trace(model.forward(s), model, class_id);
}

SaliencyMap saliency_predicted(const CnnModel& model, const HrtfSample& s) {
  const auto trace = model.forward(s);
  return saliency_from_trace(trace, model, trace.predicted_class());
}

std::pair<std::vector<double>, std::vector<double>> occlusion_render(const HrtfSample& s,
                                                                     const SaliencyMap& sal) {
  if (sal.values.size() != s.ipsi.size() || s.contra.size() != s.ipsi.size()) {
    throw ShapeMismatch("occlusion_render: saliency has " + std::to_string(sal.values.size()) +
                        " bins, sample has " + std::to_string(s.ipsi.size()));
  }
  std::vector<double> ipsi(s.ipsi.size()), contra(s.contra.size());
  for (std::size_t k = 0; k < ipsi.size(); ++k) {
    ipsi[k] = s.ipsi[k] * sal.values[k];
    contra[k] = s.contra[k] * sal.values[k];
  }
  return {std::move(ipsi), std::move(contra)};
}

SaliencyStack aggregate(const std::vector<HrtfSample>& samples, const CnnModel& model,
                        const std::string& dataset_id, int class_id, bool only_correct) {
  check_class(class_id);
  SaliencyStack stack;
  stack.class_id = class_id;
  stack.dataset_id = dataset_id;
  ForwardTrace trace;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.dataset_id != dataset_id || to_index(s.label()) != class_id) continue;
    model.forward_into(trace, pack_input(s), s.bins());
    if (only_correct && trace.predicted_class() != class_id) continue;
    auto m = saliency_from_trace(trace, model, class_id);
    m.provenance = make_ref(s, i);
    stack.rows.push_back(std::move(m));
  }
  std::stable_sort(stack.rows.begin(), stack.rows.end(), by_confidence);
  return stack;
}

MeanSaliencyContour equalize_and_msc(const std::vector<SaliencyStack>& stacks) {
  MeanSaliencyContour out;
  std::size_t m = std::numeric_limits<std::size_t>::max();
  std::size_t bins = 0;
  for (const auto& s : stacks) {
    if (s.empty()) continue;
    m = std::min(m, s.size());
    if (bins == 0) bins = s.bins();
    if (s.bins() != bins) throw ShapeMismatch("equalize_and_msc: stacks disagree on bin count");
    out.class_id = s.class_id;
  }
  if (bins == 0) throw DataError("equalize_and_msc: every stack is empty");
  out.rows_per_dataset = m;
  out.msc.assign(bins, 0.0);
  for (const auto& s : stacks) {
    if (s.empty()) continue;
    SaliencyStack kept = s;
    std::stable_sort(kept.rows.begin(), kept.rows.end(), by_confidence);
    kept.rows.resize(m);
    std::vector<double> mean(bins, 0.0);
    for (const auto& r : kept.rows) {
      for (std::size_t k = 0; k < bins; ++k) mean[k] += r.values[k];
    }
    for (auto& v : mean) v /= static_cast<double>(m);
    out.dataset_ids.push_back(s.dataset_id);
    out.per_dataset.push_back(std::move(mean));
    out.equalized.push_back(std::move(kept));
  }
  for (const auto& curve : out.per_dataset) {
    for (std::size_t k = 0; k < bins; ++k) out.msc[k] += curve[k];
  }
  for (auto& v : out.msc) v /= static_cast<double>(out.per_dataset.size());
  return out;
}

PrototypeHrtf prototype(const std::vector<HrtfSample>& samples, const CnnModel& model, int class_id,
                        double variance_kept) {
  check_class(class_id);
  if (samples.empty()) throw DataError("prototype: no samples for class " + std::to_string(class_id));
  if (!(variance_kept > 0.0 && variance_kept <= 1.0)) throw UsageError("prototype: variance must be in (0, 1]");
  const std::size_t bins = samples.front().bins();
  const auto dim = static_cast<Eigen::Index>(2 * bins);
  const auto n = static_cast<Eigen::Index>(samples.size());

  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (s.bins() != bins || s.contra.size() != bins) throw ShapeMismatch("prototype: samples differ in length");
    for (std::size_t k = 0; k < bins; ++k) {
      x(i, static_cast<Eigen::Index>(k)) = s.ipsi[k];
      x(i, static_cast<Eigen::Index>(bins + k)) = s.contra[k];
    }
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;

  PrototypeHrtf p;
  p.class_id = class_id;
  p.variance_target = variance_kept;
  Eigen::VectorXd recon = mean.transpose();

  if (n >= 2) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalError("prototype: eigendecomposition failed");
    // Eigen returns ascending eigenvalues; walk from the top.
    const Eigen::VectorXd values = eig.eigenvalues().cwiseMax(0.0);
    const double total = values.sum();
    if (total > 0.0) {
      Eigen::MatrixXd basis(dim, 0);
      double acc = 0.0;
      for (Eigen::Index j = dim - 1; j >= 0; --j) {
        Eigen::VectorXd v = eig.eigenvectors().col(j);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
        basis.col(basis.cols() - 1) = v;
        acc += values(j);
        if (acc >= variance_kept * total * (1.0 - 1e-12)) break;
      }
      p.components = static_cast<std::size_t>(basis.cols());
      p.variance_kept = acc / total;
      const Eigen::MatrixXd scores = centered * basis;
      const Eigen::VectorXd centroid = scores.colwise().mean().transpose();
      recon = mean.transpose() + basis * centroid;
    }
  }
  p.ipsi.assign(recon.data(), recon.data() + bins);
  p.contra.assign(recon.data() + bins, recon.data() + 2 * bins);

  std::vector<double> input(recon.data(), recon.data() + 2 * bins);
  const auto trace = model.forward(input, bins);
  p.saliency = saliency_from_trace(trace, model, class_id);
  p.saliency.provenance.subject_id = "prototype";
  p.saliency.provenance.dataset_id = samples.front().dataset_id;
  p.predicted_class = trace.predicted_class();
  p.confidence = trace.confidence();
  return p;
}

std::size_t nearest_sample(const std::vector<HrtfSample>& samples, const PrototypeHrtf& proto) {
  if (samples.empty()) throw DataError("nearest_sample: empty sample set");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.bins() != proto.ipsi.size()) throw ShapeMismatch("nearest_sample: length mismatch");
    double d = 0.0;
    for (std::size_t k = 0; k < s.bins(); ++k) {
      const double a = s.ipsi[k] - proto.ipsi[k];
      const double b = s.contra[k] - proto.contra[k];
      d += a * a + b * b;
    }
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<SagittalRow> sagittal_map(const std::vector<HrtfSample>& subject_samples, const CnnModel& model,
                                      double tolerance_deg) {
  std::vector<SagittalRow> rows;
  for (std::size_t i = 0; i < subject_samples.size(); ++i) {
    const auto& s = subject_samples[i];
    if (std::abs(s.direction.interaural.lateral_deg) > tolerance_deg) continue;
    SagittalRow r;
    r.sample_index = i;
    r.polar_deg = s.direction.interaural.polar_deg;
    r.saliency = saliency_predicted(model, s);
    r.saliency.provenance = make_ref(s, i);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("sagittal_map: no samples within the sagittal tolerance");
  std::stable_sort(rows.begin(), rows.end(), [](const SagittalRow& a, const SagittalRow& b) {
    return a.polar_deg < b.polar_deg;
  });
  return rows;
}

std::vector<std::pair<std::string, double>> rank_subjects_by_confidence(const std::vector<HrtfSample>& samples,
                                                                        const CnnModel& model) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  ForwardTrace trace;
  for (const auto& s : samples) {
    model.forward_into(trace, pack_input(s), s.bins());
    auto& [sum, count] = acc[s.subject_id];
    sum += trace.confidence();
    ++count;
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [id, sc] : acc) out.emplace_back(id, sc.first / static_cast<double>(sc.second));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

// --- exports -----------------------------------------------------------------

void write_stack_csv(const SaliencyStack& stack, const std::filesystem::path& path) {
  std::string text = "sample_index,subject_id,dataset_id,azimuth_deg,elevation_deg,class,confidence";
  for (std::size_t k = 0; k < stack.bins(); ++k) text += ",s" + std::to_string(k);
  text += "\n";
  for (const auto& r : stack.rows) {
    text += std::to_string(r.provenance.index) + "," + r.provenance.subject_id + "," + r.provenance.dataset_id +
            "," + format_double(r.provenance.azimuth_deg) + "," + format_double(r.provenance.elevation_deg) + "," +
            std::string(class_code(class_from_index(r.class_id))) + "," + format_double(r.confidence);
    for (const double v : r.values) text += "," + format_double(v);
    text += "\n";
  }
  write_file(path, text);
}

std::string encode_stack(const SaliencyStack& stack) {
  json meta;
  meta["format"] = "hrtfxai-saliency-stack";
  meta["class_id"] = stack.class_id;
  meta["class"] = class_code(class_from_index(stack.class_id));
  meta["dataset_id"] = stack.dataset_id;
  meta["bins"] = stack.bins();
  meta["rows"] = json::array();
  std::string payload;
  payload.reserve(stack.size() * stack.bins() * 8);
  for (const auto& r : stack.rows) {
    meta["rows"].push_back({{"sample_index", r.provenance.index},
                            {"subject_id", r.provenance.subject_id},
                            {"dataset_id", r.provenance.dataset_id},
                            {"azimuth_deg", r.provenance.azimuth_deg},
                            {"elevation_deg", r.provenance.elevation_deg},
                            {"predicted_class", r.predicted_class},
                            {"confidence", r.confidence},
                            {"no_positive_evidence", r.no_positive_evidence}});
    for (const double v : r.values) le::put_f64(payload, v);
  }
  return make_frame(kStackMagic, meta.dump(), payload);
}

SaliencyStack decode_stack(std::string_view bytes, const std::string& source) {
  const Frame f = parse_frame(bytes, kStackMagic, source);
  json meta;
  try {
    meta = json::parse(f.json);
  } catch (const json::exception& e) {
    throw FormatError(source + ": invalid stack metadata: " + e.what());
  }
  SaliencyStack s;
  try {
    s.class_id = meta.at("class_id").get<int>();
    s.dataset_id = meta.at("dataset_id").get<std::string>();
    const auto bins = meta.at("bins").get<std::size_t>();
    const auto& rows = meta.at("rows");
    if (f.payload.size() != rows.size() * bins * 8) {
      throw TruncatedPayload(source + ": stack payload has " + std::to_string(f.payload.size()) + " bytes, expected " +
                             std::to_string(rows.size() * bins * 8));
    }
    const char* p = f.payload.data();
    for (const auto& jr : rows) {
      SaliencyMap m;
      m.class_id = s.class_id;
      m.provenance.index = jr.at("sample_index").get<std::size_t>();
      m.provenance.subject_id = jr.at("subject_id").get<std::string>();
      m.provenance.dataset_id = jr.at("dataset_id").get<std::string>();
      m.provenance.azimuth_deg = jr.at("azimuth_deg").get<double>();
      m.provenance.elevation_deg = jr.at("elevation_deg").get<double>();
      m.predicted_class = jr.at("predicted_class").get<int>();
      m.confidence = jr.at("confidence").get<double>();
      m.no_positive_evidence = jr.at("no_positive_evidence").get<bool>();
      m.values.resize(bins);
      for (auto& v : m.values) {
        v = le::get_f64(p);
        p += 8;
      }
      s.rows.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw FormatError(source + ": malformed stack metadata: " + e.what());
  }
  return s;
}

void write_stack(const SaliencyStack& stack, const std::filesystem::path& path) {
  write_file(path, encode_stack(stack));
}

SaliencyStack read_stack(const std::filesystem::path& path) { return decode_stack(read_file(path), path.string()); }

void write_msc_csv(const MeanSaliencyContour& msc, const AxisSpec& axis, const std::filesystem::path& path) {
  if (axis.size() != msc.msc.size()) throw ShapeMismatch("write_msc_csv: axis length mismatch");
  std::string text = "series";
  for (const double hz : axis.bin_center_hz) text += "," + format_double(hz);
  text += "\n";
  auto row = [&](const std::string& name, const std::vector<double>& v) {
    text += name;
    for (const double x : v) text += "," + format_double(x);
    text += "\n";
  };
  for (std::size_t d = 0; d < msc.per_dataset.size(); ++d) row(msc.dataset_ids[d], msc.per_dataset[d]);
  row("msc", msc.msc);
  write_file(path, text);
}

MscTable read_msc_csv(const std::filesystem::path& path) {
  MscTable t;
  bool header = true;
  for (const auto& raw : split(read_file(path), '\n')) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (header) {
      for (std::size_t i = 1; i < cols.size(); ++i) t.axis_hz.push_back(parse_double(cols[i], "axis"));
      header = false;
      continue;
    }
    if (cols.size() != t.axis_hz.size() + 1) throw DataError(path.string() + ": ragged MSC row");
    t.series.push_back(cols[0]);
    std::vector<double> v;
    for (std::size_t i = 1; i < cols.size(); ++i) v.push_back(parse_double(cols[i], "saliency"));
    t.rows.push_back(std::move(v));
  }
  return t;
}

}  // namespace hrtfxai
