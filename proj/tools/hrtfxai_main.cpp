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

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hrtfxai/coords.hpp"
#include "hrtfxai/dataset.hpp"
#include "hrtfxai/dsp.hpp"
#include "hrtfxai/error.hpp"
#include "hrtfxai/eval.hpp"
#include "hrtfxai/model.hpp"
#include "hrtfxai/synth.hpp"
#include "hrtfxai/util.hpp"
#include "hrtfxai/xai.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hrtfxai;

namespace {

constexpr const char* kSamplesFile = "samples.hset";
constexpr const char* kPreprocFile = "preproc.kv";
constexpr const char* kSplitFile = "split.json";
constexpr const char* kManifestFile = "manifest.csv";

// Options shared by every subcommand.
struct Common {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool quiet = false;
};

std::uint64_t resolve_seed(const Common& c) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("HRTFXAI_SEED")) {
    const auto v = parse_int(env, "HRTFXAI_SEED");
    if (v < 0) throw UsageError("HRTFXAI_SEED must be non-negative");
    return static_cast<std::uint64_t>(v);
  }
  return 0;
}

void info(const Common& c, const std::string& msg) {
  if (!c.quiet) std::cerr << msg << "\n";
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

// Provenance record written next to every artifact-producing command's output.
class RunManifest {
 public:
  RunManifest(std::string command, const Common& common) : command_(std::move(command)), start_(Clock::now()) {
    doc_["command"] = command_;
    doc_["toolkit_version"] = HRTFXAI_VERSION;
    doc_["threads"] = common.threads;
    doc_["seeds"] = json::object();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
  }
  void seed(const std::string& name, std::uint64_t v) { doc_["seeds"][name] = v; }
  void input(const fs::path& p) { doc_["inputs"].push_back(p.generic_string()); }
  void output(const fs::path& p) { doc_["outputs"].push_back(p.generic_string()); }
  void fingerprint(const std::string& v) { doc_["config_fingerprint"] = v; }
  json& extra() { return doc_; }

  void write(const fs::path& path) {
    doc_["wall_clock_s"] = std::chrono::duration<double>(Clock::now() - start_).count();
    write_file(path, doc_.dump(2) + "\n");
  }

 private:
  using Clock = std::chrono::steady_clock;
  std::string command_;
  Clock::time_point start_;
  json doc_;
};

fs::path manifest_path_for(const fs::path& out) {
  if (fs::is_directory(out)) return out / "run_manifest.json";
  return fs::path(out.string() + ".run_manifest.json");
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create directory " + p.string() + ": " + ec.message());
}

// --- prepared dataset directories --------------------------------------------

struct Prepared {
  fs::path dir;
  std::string dataset_id;
  std::string preproc_text;
  std::vector<HrtfSample> samples;
  std::optional<SubjectSplit> split;
};

SubjectSplit read_split(const fs::path& path) {
  try {
    const json j = json::parse(read_file(path));
    SubjectSplit s;
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    return s;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed split file: " + e.what());
  }
}

Prepared load_prepared(const fs::path& dir) {
  Prepared p;
  p.dir = dir;
  if (!fs::exists(dir / kSamplesFile)) {
    throw DataError(dir.string() + ": no " + kSamplesFile + " (run `hrtfxai preprocess` first)");
  }
  p.samples = read_samples(dir / kSamplesFile);
  if (p.samples.empty()) throw DataError(dir.string() + ": sample set is empty");
  p.preproc_text = fs::exists(dir / kPreprocFile) ? read_file(dir / kPreprocFile) : "";
  std::set<std::string> ids;
  for (const auto& s : p.samples) ids.insert(s.dataset_id);
  p.dataset_id = ids.size() == 1 ? *ids.begin() : dir.filename().string();
  if (fs::exists(dir / kSplitFile)) p.split = read_split(dir / kSplitFile);
  return p;
}

std::vector<HrtfSample> partition(const Prepared& p, const std::string& which) {
  if (which == "all") return p.samples;
  if (!p.split) throw DataError(p.dir.string() + ": no split file (run `hrtfxai split` first)");
  const auto& ids = which == "train" ? p.split->train : which == "val" ? p.split->val : p.split->test;
  auto out = select_subjects(p.samples, ids);
  if (out.empty()) throw DataError(p.dir.string() + ": " + which + " partition is empty");
  return out;
}

std::string model_id(const fs::path& p) { return p.stem().string(); }

// --- ingest --------------------------------------------------------------------

struct IngestArgs {
  fs::path manifest;
  fs::path out;
};

int cmd_ingest(const IngestArgs& a, const Common& c) {
  RunManifest run("ingest", c);
  run.input(a.manifest);
  const auto entries = read_manifest(a.manifest);
  if (entries.empty()) throw DataError(a.manifest.string() + ": manifest has no rows");
  ensure_dir(a.out);

  struct Summary {
    std::set<std::string> subjects;
    std::size_t directions = 0;
    std::set<double> rates;
    std::set<std::size_t> lengths;
    ClassHistogram classes{};
  };
  std::map<std::string, Summary> per_dataset;
  std::vector<ManifestEntry> written;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : entries) {
    auto rec = read_subject(e.path);
    if (rec.subject_id != e.subject_id) {
      throw DataError(e.path.string() + ": file holds subject `" + rec.subject_id + "`, manifest says `" +
                      e.subject_id + "`");
    }
    if (!seen.insert({e.dataset_id, e.subject_id}).second) {
      throw DataError(a.manifest.string() + ": duplicate subject `" + e.subject_id + "` in dataset `" + e.dataset_id + "`");
    }
    rec.dataset_id = e.dataset_id;
    auto& s = per_dataset[e.dataset_id];
    s.subjects.insert(rec.subject_id);
    s.directions += rec.n_directions();
    s.rates.insert(rec.sample_rate_hz);
    s.lengths.insert(rec.n_samples);
    std::vector<Direction> dirs;
    for (const auto& d : rec.directions) dirs.push_back(Direction::from_vertical(d.position));
    const auto h = class_balance(dirs);
    for (std::size_t k = 0; k < h.size(); ++k) s.classes[k] += h[k];

    const fs::path target = a.out / (e.dataset_id + "_" + e.subject_id + ".hrd");
    write_subject(rec, target);
    run.input(e.path);
    written.push_back({e.subject_id, target.filename(), e.dataset_id});
  }
  write_manifest(written, a.out / kManifestFile);
  run.output(a.out / kManifestFile);

  std::printf("%-16s %8s %10s %12s %8s", "dataset", "subjects", "directions", "rate_hz", "ir_len");
  for (auto cls : kAllClasses) std::printf(" %5s", std::string(class_code(cls)).c_str());
  std::printf("\n");
  json summary = json::object();
  for (const auto& [id, s] : per_dataset) {
    std::string rates, lengths;
    for (double r : s.rates) rates += (rates.empty() ? "" : "/") + format_double(r);
    for (auto n : s.lengths) lengths += (lengths.empty() ? "" : "/") + std::to_string(n);
    std::printf("%-16s %8zu %10zu %12s %8s", id.c_str(), s.subjects.size(), s.directions, rates.c_str(),
                lengths.c_str());
    for (auto v : s.classes) std::printf(" %5zu", v);
    std::printf("\n");
    summary[id] = {{"subjects", s.subjects.size()}, {"directions", s.directions}, {"sample_rates_hz", s.rates},
                   {"ir_lengths", s.lengths}, {"class_balance", s.classes}};
  }
  run.extra()["summary"] = summary;
  run.write(a.out / "run_manifest.json");
  return 0;
}

// --- preprocess ------------------------------------------------------------------

struct PreprocessArgs {
  std::string preset;
  fs::path config;
  fs::path in;
  fs::path out;
};

int cmd_preprocess(const PreprocessArgs& a, const Common& c) {
  RunManifest run("preprocess", c);
  PreprocConfig cfg = a.config.empty() ? PreprocConfig::preset(a.preset) : PreprocConfig::parse(read_file(a.config));
  cfg.validate();
  run.fingerprint(cfg.fingerprint());
  run.extra()["preset"] = a.config.empty() ? a.preset : "custom";

  const auto entries = read_manifest(a.in / kManifestFile);
  if (entries.empty()) throw DataError((a.in / kManifestFile).string() + ": no subjects");
  std::vector<SubjectRecord> records;
  for (const auto& e : entries) {
    auto rec = read_subject(e.path);
    rec.dataset_id = e.dataset_id;
    records.push_back(std::move(rec));
    run.input(e.path);
  }
  const auto samples = preprocess_records(records, cfg);
  ensure_dir(a.out);
  const std::string text = cfg.serialize();
  write_samples(samples, text, a.out / kSamplesFile);
  write_file(a.out / kPreprocFile, text);
  run.output(a.out / kSamplesFile);
  run.output(a.out / kPreprocFile);
  run.extra()["samples"] = samples.size();
  run.extra()["bins"] = samples.front().bins();
  run.write(a.out / "run_manifest.json");
  info(c, "preprocessed " + std::to_string(records.size()) + " subjects into " + std::to_string(samples.size()) +
              " samples of " + std::to_string(samples.front().bins()) + " bins (fingerprint " +
              cfg.fingerprint().substr(0, 12) + ")");
  return 0;
}

// --- split -----------------------------------------------------------------------

struct SplitArgs {
  fs::path data;
  double train = 0.8, val = 0.1, test = 0.1;
};

int cmd_split(const SplitArgs& a, const Common& c) {
  RunManifest run("split", c);
  const auto seed = resolve_seed(c);
  run.seed("split", seed);
  const auto samples = read_samples(a.data / kSamplesFile);
  run.input(a.data / kSamplesFile);
  std::set<std::string> ids;
  for (const auto& s : samples) ids.insert(s.subject_id);
  const auto split = split_subjects({ids.begin(), ids.end()}, SplitSpec{a.train, a.val, a.test, seed});
  const json j = {{"seed", seed}, {"train", split.train}, {"val", split.val}, {"test", split.test}};
  write_file(a.data / kSplitFile, j.dump(2) + "\n");
  run.output(a.data / kSplitFile);
  run.write(a.data / "split.run_manifest.json");
  std::printf("train %zu, val %zu, test %zu subjects\n", split.train.size(), split.val.size(), split.test.size());
  return 0;
}

// --- train -----------------------------------------------------------------------

struct TrainArgs {
  std::vector<fs::path> data;
  std::optional<double> combined_frac;
  fs::path out;
  int epochs = 200;
  std::size_t batch = 32;
  double lr = 1e-4;
};

int cmd_train(const TrainArgs& a, const Common& c) {
  RunManifest run("train", c);
  const auto seed = resolve_seed(c);
  run.seed("train", seed);
  if (a.data.size() > 1 && !a.combined_frac) {
    throw UsageError("several --data directories need --combined-frac");
  }
  std::vector<std::vector<HrtfSample>> trains;
  std::vector<HrtfSample> val;
  std::string preproc;
  for (const auto& d : a.data) {
    auto p = load_prepared(d);
    run.input(d / kSamplesFile);
    if (!p.split) throw DataError(d.string() + ": missing validation split (run `hrtfxai split` first)");
    if (!preproc.empty() && p.preproc_text != preproc) {
      throw DataError(d.string() + ": preprocessing differs from the other --data directories");
    }
    preproc = p.preproc_text;
    trains.push_back(partition(p, "train"));
    auto v = partition(p, "val");
    val.insert(val.end(), v.begin(), v.end());
  }
  std::vector<HrtfSample> train_set;
  if (a.combined_frac) {
    run.seed("combined", seed);
    run.extra()["combined_fraction"] = *a.combined_frac;
    train_set = build_combined(trains, CombinedSpec{*a.combined_frac, seed});
  } else {
    train_set = std::move(trains.front());
  }
  if (!preproc.empty()) run.fingerprint(PreprocConfig::parse(preproc).fingerprint());

  TrainConfig tc;
  tc.seed = seed;
  tc.max_epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.adam.learning_rate = a.lr;
  info(c, "training on " + std::to_string(train_set.size()) + " samples, validating on " + std::to_string(val.size()));
  const auto result = train(train_set, val, tc, [&](const EpochRecord& e) {
    if (!c.quiet && (e.epoch == 1 || e.epoch % 10 == 0)) {
      std::fprintf(stderr, "epoch %3d  train %.4f  val %.4f  acc %.3f  lr %.3g\n", e.epoch, e.train_loss, e.val_loss,
                   e.val_accuracy, e.learning_rate);
    }
  });
  if (a.out.has_parent_path()) ensure_dir(a.out.parent_path());
  save_model(result.model, a.out);
  run.output(a.out);

  json hist;
  hist["best_epoch"] = result.history.best_epoch;
  hist["stop_epoch"] = result.history.stop_epoch;
  hist["early_stopped"] = result.history.early_stopped;
  hist["lr_reductions"] = result.history.lr_reductions;
  json epochs = json::array();
  for (const auto& e : result.history.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                      {"val_accuracy", e.val_accuracy}, {"learning_rate", e.learning_rate}});
  }
  hist["epochs"] = epochs;
  const fs::path hist_path = a.out.string() + ".history.json";
  write_file(hist_path, hist.dump(2) + "\n");
  run.output(hist_path);
  run.extra()["model_sha256"] = sha256_hex(read_file(a.out));
  run.write(manifest_path_for(a.out));
  info(c, "best epoch " + std::to_string(result.history.best_epoch) + " of " +
              std::to_string(result.history.stop_epoch) + "; model written to " + a.out.string());
  return 0;
}

// --- eval ------------------------------------------------------------------------

struct EvalArgs {
  std::vector<fs::path> models;
  std::vector<fs::path> tests;
  std::string partition = "test";
  fs::path out;
};

int cmd_eval(const EvalArgs& a, const Common& c) {
  RunManifest run("eval", c);
  std::vector<CnnModel> models;
  std::vector<std::string> model_ids;
  for (const auto& m : a.models) {
    models.push_back(load_model(m));
    model_ids.push_back(model_id(m));
    run.input(m);
  }
  std::vector<Prepared> prepared;
  std::vector<std::vector<HrtfSample>> test_sets;
  std::set<std::string> fingerprints;
  for (const auto& d : a.tests) {
    prepared.push_back(load_prepared(d));
    test_sets.push_back(partition(prepared.back(), a.partition));
    fingerprints.insert(test_sets.back().front().preproc);
    run.input(d / kSamplesFile);
  }

  std::vector<NamedModel> named_models;
  for (std::size_t i = 0; i < models.size(); ++i) named_models.push_back({model_ids[i], &models[i]});
  std::vector<NamedTestSet> named_sets;
  for (std::size_t j = 0; j < test_sets.size(); ++j) named_sets.push_back({prepared[j].dataset_id, &test_sets[j]});

  json report;
  report["partition"] = a.partition;
  report["preproc_fingerprints"] = fingerprints;
  report["models"] = model_ids;
  json cells = json::array();
  const fs::path out_dir = a.out.has_parent_path() ? a.out.parent_path() : fs::path(".");
  ensure_dir(out_dir);
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = 0; j < test_sets.size(); ++j) {
      if (test_sets[j].front().bins() != models[i].input_bins()) {
        throw ShapeMismatch("model `" + model_ids[i] + "` expects " + std::to_string(models[i].input_bins()) +
                            " bins, test set `" + named_sets[j].id + "` has " +
                            std::to_string(test_sets[j].front().bins()));
      }
      const auto labels = labels_of(test_sets[j]);
      const auto preds = predict_all(models[i], test_sets[j]);
      const auto m = metrics(preds, labels, label_space_of(labels));
      const auto conf = confusion(preds, labels);
      const fs::path conf_csv = out_dir / ("confusion_" + model_ids[i] + "_" + named_sets[j].id + ".csv");
      write_confusion_csv(conf, conf_csv);
      run.output(conf_csv);
      cells.push_back({{"model", model_ids[i]},
                       {"dataset", named_sets[j].id},
                       {"metrics", json::parse(metrics_json(m))},
                       {"confusion", json::parse(confusion_json(conf))}});
      std::printf("%-20s %-20s macro-F1 %.4f  accuracy %.4f  n %zu\n", model_ids[i].c_str(),
                  named_sets[j].id.c_str(), m.macro_f1, m.accuracy, m.n);
    }
  }
  report["cells"] = cells;

  CrossMatrix cm;
  cm.model_ids = model_ids;
  for (const auto& s : named_sets) cm.dataset_ids.push_back(s.id);
  for (std::size_t i = 0; i < models.size(); ++i) {
    std::vector<double> row;
    for (std::size_t j = 0; j < test_sets.size(); ++j) row.push_back(cells[i * test_sets.size() + j]["metrics"]["macro_f1"]);
    cm.f1.push_back(std::move(row));
  }
  const fs::path cross_csv = out_dir / "cross_matrix.csv";
  write_cross_csv(cm, cross_csv);
  run.output(cross_csv);
  report["cross_matrix"] = {{"models", cm.model_ids}, {"datasets", cm.dataset_ids}, {"f1", cm.f1}};
  if (models.size() >= 2 && test_sets.size() >= 2) {
    // Summarized from the exported CSV so the report and a later recomputation agree bit for bit.
    report["summary"] = json::parse(summary_json(summarize(read_cross_csv(cross_csv).f1)));
  }
  write_file(a.out, report.dump(2) + "\n");
  run.output(a.out);
  run.write(manifest_path_for(a.out));
  return 0;
}

// --- explain ---------------------------------------------------------------------

struct ExplainArgs {
  fs::path model;
  std::vector<fs::path> data;
  std::string cls = "all";
  std::string partition = "test";
  std::string order = "confidence";
  fs::path out;
};

std::vector<int> parse_classes(const std::string& text) {
  if (text == "all") {
    std::vector<int> all(kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) all[static_cast<std::size_t>(c)] = c;
    return all;
  }
  std::vector<int> out;
  for (const auto& part : split(text, ',')) {
    const auto c = parse_class(trim(part));
    if (!c) throw UsageError("unknown class `" + trim(part) + "`");
    out.push_back(to_index(*c));
  }
  return out;
}

void write_occlusion_csv(const SaliencyStack& stack, const std::vector<HrtfSample>& samples, const fs::path& path) {
  std::string text = "sample_index,channel";
  for (std::size_t k = 0; k < stack.bins(); ++k) text += ",b" + std::to_string(k);
  text += "\n";
  for (const auto& r : stack.rows) {
    const auto [ipsi, contra] = occlusion_render(samples[r.provenance.index], r);
    for (const auto& [name, values] : {std::pair{"ipsi", &ipsi}, std::pair{"contra", &contra}}) {
      text += std::to_string(r.provenance.index) + "," + name;
      for (double v : *values) text += "," + format_double(v);
      text += "\n";
    }
  }
  write_file(path, text);
}

int cmd_explain(const ExplainArgs& a, const Common& c) {
  RunManifest run("explain", c);
  const auto model = load_model(a.model);
  run.input(a.model);
  std::vector<Prepared> prepared;
  std::vector<std::vector<HrtfSample>> sets;
  for (const auto& d : a.data) {
    prepared.push_back(load_prepared(d));
    sets.push_back(partition(prepared.back(), a.partition));
    run.input(d / kSamplesFile);
  }
  ensure_dir(a.out);
  const AxisSpec axis = sets.front().front().freq_axis;
  json classes = json::object();
  for (const int cls : parse_classes(a.cls)) {
    const std::string code(class_code(class_from_index(cls)));
    std::vector<SaliencyStack> stacks;
    json cls_doc = json::object();
    for (std::size_t d = 0; d < sets.size(); ++d) {
      auto stack = aggregate(sets[d], model, prepared[d].dataset_id, cls);
      if (stack.empty()) {
        warn("class " + code + " has no correctly classified samples in `" + prepared[d].dataset_id + "`");
      }
      cls_doc[prepared[d].dataset_id] = stack.size();
      auto ordered = stack;
      if (a.order == "polar") {
        std::stable_sort(ordered.rows.begin(), ordered.rows.end(), [&](const SaliencyMap& x, const SaliencyMap& y) {
          return sets[d][x.provenance.index].direction.interaural.polar_deg <
                 sets[d][y.provenance.index].direction.interaural.polar_deg;
        });
      }
      const std::string stem = "stack_" + code + "_" + prepared[d].dataset_id;
      write_stack_csv(ordered, a.out / (stem + ".csv"));
      write_stack(ordered, a.out / (stem + ".bin"));
      write_occlusion_csv(ordered, sets[d], a.out / ("occlusion_" + code + "_" + prepared[d].dataset_id + ".csv"));
      run.output(a.out / (stem + ".csv"));
      stacks.push_back(std::move(stack));
    }
    bool any = false;
    for (const auto& s : stacks) any = any || !s.empty();
    if (any) {
      const auto msc = equalize_and_msc(stacks);
      write_msc_csv(msc, axis, a.out / ("msc_" + code + ".csv"));
      run.output(a.out / ("msc_" + code + ".csv"));
      classes[code] = {{"rows", cls_doc}, {"rows_per_dataset", msc.rows_per_dataset}};
    } else {
      classes[code] = {{"rows", cls_doc}, {"rows_per_dataset", 0}};
    }
  }
  run.extra()["classes"] = classes;
  run.extra()["order"] = a.order;
  run.write(a.out / "run_manifest.json");
  return 0;
}

// --- prototype -------------------------------------------------------------------

struct PrototypeArgs {
  fs::path model;
  std::vector<fs::path> data;
  double variance = 0.90;
  std::string partition = "test";
  std::size_t top_subjects = 3;
  fs::path out;
};

void write_curve_csv(const fs::path& path, const AxisSpec& axis, const std::vector<std::string>& names,
                     const std::vector<const std::vector<double>*>& cols) {
  std::string text = "hz";
  for (const auto& n : names) text += "," + n;
  text += "\n";
  for (std::size_t k = 0; k < axis.size(); ++k) {
    text += format_double(axis.bin_center_hz[k]);
    for (const auto* c : cols) text += "," + format_double((*c)[k]);
    text += "\n";
  }
  write_file(path, text);
}

int cmd_prototype(const PrototypeArgs& a, const Common& c) {
  RunManifest run("prototype", c);
  run.extra()["variance"] = a.variance;
  const auto model = load_model(a.model);
  run.input(a.model);
  std::vector<Prepared> prepared;
  std::vector<std::vector<HrtfSample>> sets;
  for (const auto& d : a.data) {
    prepared.push_back(load_prepared(d));
    sets.push_back(partition(prepared.back(), a.partition));
    run.input(d / kSamplesFile);
  }
  ensure_dir(a.out);
  const AxisSpec axis = sets.front().front().freq_axis;
  json doc = json::object();
  for (int cls = 0; cls < kNumClasses; ++cls) {
    const std::string code(class_code(class_from_index(cls)));
    std::vector<SaliencyStack> stacks;
    for (std::size_t d = 0; d < sets.size(); ++d) stacks.push_back(aggregate(sets[d], model, prepared[d].dataset_id, cls));
    bool any = false;
    for (const auto& s : stacks) any = any || !s.empty();
    if (!any) {
      warn("class " + code + ": no correctly classified samples, no prototype");
      continue;
    }
    const auto msc = equalize_and_msc(stacks);
    std::vector<HrtfSample> members;
    for (const auto& st : msc.equalized) {
      const auto d = static_cast<std::size_t>(
          std::find(msc.dataset_ids.begin(), msc.dataset_ids.end(), st.dataset_id) - msc.dataset_ids.begin());
      std::size_t set_index = 0;
      for (std::size_t k = 0; k < prepared.size(); ++k) {
        if (prepared[k].dataset_id == msc.dataset_ids[d]) set_index = k;
      }
      for (const auto& r : st.rows) members.push_back(sets[set_index][r.provenance.index]);
    }
    const auto proto = prototype(members, model, cls, a.variance);
    const auto nearest = nearest_sample(members, proto);
    write_curve_csv(a.out / ("prototype_" + code + ".csv"), axis, {"ipsi", "contra", "saliency", "msc"},
                    {&proto.ipsi, &proto.contra, &proto.saliency.values, &msc.msc});
    run.output(a.out / ("prototype_" + code + ".csv"));
    const auto& ns = members[nearest];
    doc[code] = {{"members", members.size()},
                 {"components", proto.components},
                 {"variance_kept", proto.variance_kept},
                 {"predicted_class", std::string(class_code(class_from_index(proto.predicted_class)))},
                 {"confidence", proto.confidence},
                 {"nearest", {{"subject_id", ns.subject_id},
                              {"dataset_id", ns.dataset_id},
                              {"azimuth_deg", ns.direction.vertical.azimuth_deg},
                              {"elevation_deg", ns.direction.vertical.elevation_deg}}}};
  }

  json sagittal = json::array();
  for (std::size_t d = 0; d < sets.size(); ++d) {
    const auto ranked = rank_subjects_by_confidence(sets[d], model);
    for (std::size_t r = 0; r < std::min(a.top_subjects, ranked.size()); ++r) {
      const auto subject = select_subjects(sets[d], {ranked[r].first});
      std::vector<SagittalRow> rows;
      try {
        rows = sagittal_map(subject, model);
      } catch (const DataError&) {
        warn("subject " + ranked[r].first + " has no directions near the median plane");
        continue;
      }
      std::string text = "polar_deg,class,predicted,confidence";
      for (std::size_t k = 0; k < axis.size(); ++k) text += "," + format_double(axis.bin_center_hz[k]);
      text += "\n";
      for (const auto& row : rows) {
        text += format_double(row.polar_deg) + "," +
                std::string(class_code(subject[row.sample_index].label())) + "," +
                std::string(class_code(class_from_index(row.saliency.predicted_class))) + "," +
                format_double(row.saliency.confidence);
        for (double v : row.saliency.values) text += "," + format_double(v);
        text += "\n";
      }
      const fs::path path = a.out / ("sagittal_" + prepared[d].dataset_id + "_" + ranked[r].first + ".csv");
      write_file(path, text);
      run.output(path);
      sagittal.push_back({{"dataset_id", prepared[d].dataset_id},
                          {"subject_id", ranked[r].first},
                          {"mean_confidence", ranked[r].second},
                          {"rows", rows.size()}});
    }
  }
  const json out = {{"prototypes", doc}, {"sagittal", sagittal}};
  write_file(a.out / "prototypes.json", out.dump(2) + "\n");
  run.output(a.out / "prototypes.json");
  run.write(a.out / "run_manifest.json");
  return 0;
}

// --- synth -----------------------------------------------------------------------

struct SynthArgs {
  fs::path spec;
  std::optional<int> subjects;
  fs::path out;
};

int cmd_synth(const SynthArgs& a, const Common& c) {
  RunManifest run("synth", c);
  const auto seed = resolve_seed(c);
  run.seed("synth", seed);
  SynthSpec spec = a.spec.empty() ? SynthSpec{} : SynthSpec::parse(read_file(a.spec));
  if (!a.spec.empty()) run.input(a.spec);
  if (a.subjects) spec.n_subjects = *a.subjects;
  spec.validate();
  const std::string text = spec.serialize();
  run.fingerprint(sha256_hex(text));

  const auto out = generate(spec, seed);
  ensure_dir(a.out);
  std::vector<ManifestEntry> entries;
  for (const auto& rec : out.subjects) {
    const fs::path name = rec.subject_id + ".hrd";
    write_subject(rec, a.out / name);
    entries.push_back({rec.subject_id, name, rec.dataset_id});
  }
  write_manifest(entries, a.out / kManifestFile);
  write_ground_truth(out.truth, a.out / "ground_truth.csv");
  write_file(a.out / "synth_spec.kv", text);
  for (const char* f : {kManifestFile, "ground_truth.csv", "synth_spec.kv"}) run.output(a.out / f);
  run.extra()["negative_control"] = out.negative_control;
  run.extra()["subjects"] = out.subjects.size();
  run.extra()["directions_per_subject"] = spec.grid().size();
  run.write(a.out / "run_manifest.json");
  if (out.negative_control) warn("notch depth is zero: negative-control data set (no planted cues)");
  info(c, "wrote " + std::to_string(out.subjects.size()) + " subjects x " + std::to_string(spec.grid().size()) +
              " directions to " + a.out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hrtfxai: HRTF elevation classification and saliency toolkit"};
  app.set_version_flag("--version", std::string(HRTFXAI_VERSION));
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool with_seed) {
    if (with_seed) {
      sub->add_option_function<std::uint64_t>(
             "--seed", [&](const std::uint64_t& v) { common.seed = v; }, "Random seed (falls back to HRTFXAI_SEED, then 0)")
          ->type_name("N");
    }
    sub->add_option("--threads", common.threads, "Cap on worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("-q,--quiet", common.quiet, "Only print results and errors");
  };

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Validate HRD1 files listed in a manifest and summarise them");
  s_ingest->add_option("--manifest", ingest.manifest, "CSV of subject_id,path,dataset_id")->required()->check(CLI::ExistingFile);
  s_ingest->add_option("--out", ingest.out, "Output directory")->required();
  add_common(s_ingest, false);

  PreprocessArgs pre;
  auto* s_pre = app.add_subcommand("preprocess", "Turn ingested HRIRs into model-ready magnitude spectra");
  auto* preset_opt = s_pre->add_option("--preset", pre.preset, "raw | optimized | perceptual");
  s_pre->add_option("--config", pre.config, "Key-value preprocessing config instead of a preset")
      ->check(CLI::ExistingFile)
      ->excludes(preset_opt);
  s_pre->add_option("--in", pre.in, "Ingested directory (with manifest.csv)")->required()->check(CLI::ExistingDirectory);
  s_pre->add_option("--out", pre.out, "Output directory")->required();
  add_common(s_pre, false);

  SplitArgs sp;
  auto* s_split = app.add_subcommand("split", "Partition the subjects of a preprocessed directory");
  s_split->add_option("--data", sp.data, "Preprocessed directory")->required()->check(CLI::ExistingDirectory);
  s_split->add_option("--train-frac", sp.train, "Training fraction")->capture_default_str();
  s_split->add_option("--val-frac", sp.val, "Validation fraction")->capture_default_str();
  s_split->add_option("--test-frac", sp.test, "Test fraction")->capture_default_str();
  add_common(s_split, true);

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "Train the CNN on one dataset or a combined sample");
  s_train->add_option("--data", tr.data, "Preprocessed, split directories")->required()->check(CLI::ExistingDirectory);
  s_train->add_option_function<double>(
      "--combined-frac", [&](const double& v) { tr.combined_frac = v; }, "Fraction of each dataset's training samples");
  s_train->add_option("--out", tr.out, "Model file")->required();
  s_train->add_option("--epochs", tr.epochs, "Maximum epochs")->capture_default_str()->check(CLI::PositiveNumber);
  s_train->add_option("--batch-size", tr.batch, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  s_train->add_option("--learning-rate", tr.lr, "Initial Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(s_train, true);

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "Metrics, confusion matrices and the cross-dataset matrix");
  s_eval->add_option("--model", ev.models, "Model file(s)")->required()->check(CLI::ExistingFile);
  s_eval->add_option("--test", ev.tests, "Preprocessed directories")->required()->check(CLI::ExistingDirectory);
  s_eval->add_option("--partition", ev.partition, "Subjects to evaluate on")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  s_eval->add_option("--out", ev.out, "Report JSON")->required();
  add_common(s_eval, false);

  ExplainArgs ex;
  auto* s_explain = app.add_subcommand("explain", "Saliency stacks, mean saliency contours and occlusion renders");
  s_explain->add_option("--model", ex.model, "Model file")->required()->check(CLI::ExistingFile);
  s_explain->add_option("--data", ex.data, "Preprocessed directories")->required()->check(CLI::ExistingDirectory);
  s_explain->add_option("--class", ex.cls, "Class code/name, comma list, or `all`")->capture_default_str();
  s_explain->add_option("--partition", ex.partition, "Subjects to explain")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  s_explain->add_option("--order", ex.order, "Row order of exported stacks")
      ->check(CLI::IsMember({"confidence", "polar"}))
      ->capture_default_str();
  s_explain->add_option("--out", ex.out, "Output directory")->required();
  add_common(s_explain, false);

  PrototypeArgs pr;
  auto* s_proto = app.add_subcommand("prototype", "Per-class prototype HRTFs and sagittal saliency maps");
  s_proto->add_option("--model", pr.model, "Model file")->required()->check(CLI::ExistingFile);
  s_proto->add_option("--data", pr.data, "Preprocessed directories")->required()->check(CLI::ExistingDirectory);
  s_proto->add_option("--variance", pr.variance, "Fraction of variance kept by the PCA")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  s_proto->add_option("--partition", pr.partition, "Subjects to use")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  s_proto->add_option("--top-subjects", pr.top_subjects, "Sagittal maps for this many most confident subjects")
      ->capture_default_str();
  s_proto->add_option("--out", pr.out, "Output directory")->required();
  add_common(s_proto, false);

  SynthArgs sy;
  auto* s_synth = app.add_subcommand("synth", "Generate synthetic HRIRs with planted cues");
  s_synth->add_option("--spec", sy.spec, "Key-value synth spec (defaults when omitted)")->check(CLI::ExistingFile);
  s_synth->add_option_function<int>(
      "--subjects", [&](const int& v) { sy.subjects = v; }, "Override the number of subjects");
  s_synth->add_option("--out", sy.out, "Output directory")->required();
  add_common(s_synth, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*s_ingest) return cmd_ingest(ingest, common);
    if (*s_pre) {
      if (pre.preset.empty() && pre.config.empty()) throw UsageError("preprocess needs --preset or --config");
      return cmd_preprocess(pre, common);
    }
    if (*s_split) return cmd_split(sp, common);
    if (*s_train) return cmd_train(tr, common);
    if (*s_eval) return cmd_eval(ev, common);
    if (*s_explain) {
      parse_classes(ex.cls);
      return cmd_explain(ex, common);
    }
    if (*s_proto) return cmd_prototype(pr, common);
    if (*s_synth) return cmd_synth(sy, common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
