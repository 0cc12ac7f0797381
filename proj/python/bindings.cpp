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

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hrtfxai/coords.hpp"
#include "hrtfxai/dataset.hpp"
#include "hrtfxai/dsp.hpp"
#include "hrtfxai/error.hpp"
#include "hrtfxai/eval.hpp"
#include "hrtfxai/model.hpp"
#include "hrtfxai/synth.hpp"
#include "hrtfxai/util.hpp"
#include "hrtfxai/xai.hpp"

namespace py = pybind11;
using namespace hrtfxai;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(const std::vector<double>& v) {
  return py::array_t<double>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())}, v.data());
}

std::vector<double> from_numpy(const DoubleArray& a, const char* what) {
  if (a.ndim() != 1) throw UsageError(std::string(what) + " must be one-dimensional");
  return {a.data(), a.data() + a.size()};
}

py::dict metrics_dict(const ClassMetrics& m) {
  py::dict d;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  d["support"] = m.support;
  d["label_space"] = m.label_space;
  d["macro_precision"] = m.macro_precision;
  d["macro_recall"] = m.macro_recall;
  d["macro_f1"] = m.macro_f1;
  d["accuracy"] = m.accuracy;
  d["n"] = m.n;
  return d;
}

py::dict saliency_dict(const SaliencyMap& s) {
  py::dict d;
  d["values"] = to_numpy(s.values);
  d["raw_cam"] = to_numpy(s.raw_cam);
  d["class_id"] = s.class_id;
  d["predicted_class"] = s.predicted_class;
  d["confidence"] = s.confidence;
  d["no_positive_evidence"] = s.no_positive_evidence;
  return d;
}

}  // namespace

PYBIND11_MODULE(hrtfxai, m) {
  m.doc() = "HRTF elevation classification with class activation map saliency";
  m.attr("__version__") = HRTFXAI_VERSION;
  m.attr("NUM_CLASSES") = kNumClasses;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", data.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  // Coordinates and labels.
  py::enum_<ElevationClass>(m, "ElevationClass")
      .value("FrontDown", ElevationClass::FrontDown)
      .value("FrontLevel", ElevationClass::FrontLevel)
      .value("FrontUp", ElevationClass::FrontUp)
      .value("Up", ElevationClass::Up)
      .value("BackUp", ElevationClass::BackUp)
      .value("BackLevel", ElevationClass::BackLevel)
      .value("BackDown", ElevationClass::BackDown)
      .value("LateralUp", ElevationClass::LateralUp)
      .value("LateralDown", ElevationClass::LateralDown)
      .def_property_readonly("code", [](ElevationClass c) { return std::string(class_code(c)); });
  m.def("class_code", [](int i) { return std::string(class_code(class_from_index(i))); });
  m.def("class_name", [](int i) { return std::string(class_name(class_from_index(i))); });
  m.def("parse_class", [](const std::string& t) {
    const auto c = parse_class(t);
    if (!c) throw UsageError("unknown class `" + t + "`");
    return *c;
  });

  py::class_<VerticalPolar>(m, "VerticalPolar")
      .def(py::init([](double az, double el) { return VerticalPolar{az, el}; }), py::arg("azimuth_deg"),
           py::arg("elevation_deg"))
      .def_readwrite("azimuth_deg", &VerticalPolar::azimuth_deg)
      .def_readwrite("elevation_deg", &VerticalPolar::elevation_deg)
      .def("__repr__", [](const VerticalPolar& v) {
        return "VerticalPolar(" + format_double(v.azimuth_deg) + ", " + format_double(v.elevation_deg) + ")";
      });
  py::class_<InterauralPolar>(m, "InterauralPolar")
      .def(py::init([](double lat, double pol) { return InterauralPolar{lat, pol}; }), py::arg("lateral_deg"),
           py::arg("polar_deg"))
      .def_readwrite("lateral_deg", &InterauralPolar::lateral_deg)
      .def_readwrite("polar_deg", &InterauralPolar::polar_deg)
      .def("__repr__", [](const InterauralPolar& i) {
        return "InterauralPolar(" + format_double(i.lateral_deg) + ", " + format_double(i.polar_deg) + ")";
      });
  m.def("vertical_to_interaural", &vertical_to_interaural_deg, py::arg("azimuth_deg"), py::arg("elevation_deg"));
  m.def("interaural_to_vertical", &interaural_to_vertical);
  m.def("classify", &classify);
  m.def("classify_vertical", [](double az, double el) { return classify(vertical_to_interaural_deg(az, el)); },
        py::arg("azimuth_deg"), py::arg("elevation_deg"));

  py::class_<Direction>(m, "Direction")
      .def_readonly("interaural", &Direction::interaural)
      .def_readonly("vertical", &Direction::vertical)
      .def_readonly("label", &Direction::label);

  // Preprocessing.
  py::class_<PreprocConfig>(m, "PreprocConfig")
      .def_static("preset", &PreprocConfig::preset)
      .def_static("parse", &PreprocConfig::parse)
      .def_readwrite("fft_size", &PreprocConfig::fft_size)
      .def_readwrite("target_rate_hz", &PreprocConfig::target_rate_hz)
      .def("validate", &PreprocConfig::validate)
      .def("serialize", &PreprocConfig::serialize)
      .def("fingerprint", &PreprocConfig::fingerprint)
      .def("output_bins", &PreprocConfig::output_bins);

  py::class_<HrtfSample>(m, "HrtfSample")
      .def_property_readonly("ipsi", [](const HrtfSample& s) { return to_numpy(s.ipsi); })
      .def_property_readonly("contra", [](const HrtfSample& s) { return to_numpy(s.contra); })
      .def_property_readonly("freq_hz", [](const HrtfSample& s) { return to_numpy(s.freq_axis.bin_center_hz); })
      .def_readonly("direction", &HrtfSample::direction)
      .def_readonly("subject_id", &HrtfSample::subject_id)
      .def_readonly("dataset_id", &HrtfSample::dataset_id)
      .def_readonly("preproc", &HrtfSample::preproc)
      .def_property_readonly("label", [](const HrtfSample& s) { return to_index(s.label()); })
      .def("bins", &HrtfSample::bins);

  // Datasets.
  py::class_<SubjectRecord>(m, "SubjectRecord")
      .def_readwrite("subject_id", &SubjectRecord::subject_id)
      .def_readwrite("dataset_id", &SubjectRecord::dataset_id)
      .def_readonly("sample_rate_hz", &SubjectRecord::sample_rate_hz)
      .def_readonly("n_samples", &SubjectRecord::n_samples)
      .def("n_directions", &SubjectRecord::n_directions)
      .def_property_readonly("positions",
                             [](const SubjectRecord& r) {
                               std::vector<VerticalPolar> out;
                               for (const auto& d : r.directions) out.push_back(d.position);
                               return out;
                             })
      .def_property_readonly("irs", [](const SubjectRecord& r) {
        py::array_t<float> out({static_cast<py::ssize_t>(r.n_directions()), py::ssize_t{2},
                                static_cast<py::ssize_t>(r.n_samples)});
        std::copy(r.irs.begin(), r.irs.end(), out.mutable_data());
        return out;
      });
  m.def("read_subject", &read_subject, py::arg("path"));
  m.def("write_subject", &write_subject, py::arg("record"), py::arg("path"));
  m.def("preprocess_records", &preprocess_records, py::arg("records"), py::arg("config"));
  m.def("read_samples", &read_samples, py::arg("path"));
  m.def("write_samples", &write_samples, py::arg("samples"), py::arg("preproc_text"), py::arg("path"));
  m.def("select_subjects", &select_subjects, py::arg("samples"), py::arg("subject_ids"));
  m.def(
      "split_subjects",
      [](std::vector<std::string> ids, double train, double val, double test, std::uint64_t seed) {
        const auto s = split_subjects(std::move(ids), SplitSpec{train, val, test, seed});
        return py::make_tuple(s.train, s.val, s.test);
      },
      py::arg("subject_ids"), py::arg("train_frac") = 0.8, py::arg("val_frac") = 0.1, py::arg("test_frac") = 0.1,
      py::arg("seed") = 0);

  // Synthetic data.
  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init<>())
      .def_static("parse", &SynthSpec::parse)
      .def_readwrite("n_subjects", &SynthSpec::n_subjects)
      .def_readwrite("dataset_id", &SynthSpec::dataset_id)
      .def_readwrite("notch_depth_db", &SynthSpec::notch_depth_db)
      .def_readwrite("subject_jitter", &SynthSpec::subject_jitter)
      .def("validate", &SynthSpec::validate)
      .def("serialize", &SynthSpec::serialize)
      .def("grid", &SynthSpec::grid)
      .def("notch_center_hz", &SynthSpec::notch_center_hz);
  py::class_<CueRecord>(m, "CueRecord")
      .def_readonly("subject_id", &CueRecord::subject_id)
      .def_readonly("direction_index", &CueRecord::direction_index)
      .def_readonly("center_hz", &CueRecord::center_hz)
      .def_readonly("width_oct", &CueRecord::width_oct);
  py::class_<SynthOutput>(m, "SynthOutput")
      .def_readonly("subjects", &SynthOutput::subjects)
      .def_readonly("truth", &SynthOutput::truth)
      .def_readonly("negative_control", &SynthOutput::negative_control);
  m.def("generate", &generate, py::arg("spec"), py::arg("seed"));
  m.def(
      "saliency_localization_score",
      [](const DoubleArray& sal, const std::vector<double>& cues, const DoubleArray& axis_hz) {
        AxisSpec axis;
        axis.bin_center_hz = from_numpy(axis_hz, "axis_hz");
        const auto v = from_numpy(sal, "saliency");
        return saliency_localization_score(v, cues, axis).score;
      },
      py::arg("saliency"), py::arg("cue_centers_hz"), py::arg("axis_hz"));

  // Model.
  py::class_<CnnModel>(m, "CnnModel")
      .def_static("create", &CnnModel::create, py::arg("seed"), py::arg("input_bins") = 257)
      .def_static("load", &load_model, py::arg("path"))
      .def("save", [](const CnnModel& self, const std::filesystem::path& p) { save_model(self, p); })
      .def_property_readonly("input_bins", &CnnModel::input_bins)
      .def_property_readonly("parameter_count", &CnnModel::parameter_count)
      .def("layer_parameter_counts", &CnnModel::layer_parameter_counts)
      .def_property_readonly("params", [](const CnnModel& self) {
        return to_numpy(std::vector<double>(self.params().begin(), self.params().end()));
      })
      .def(
          "probabilities",
          [](const CnnModel& self, const DoubleArray& ipsi, const DoubleArray& contra) {
            auto x = from_numpy(ipsi, "ipsi");
            const auto c = from_numpy(contra, "contra");
            if (c.size() != x.size()) throw ShapeMismatch("ipsi and contra lengths differ");
            const auto bins = x.size();
            x.insert(x.end(), c.begin(), c.end());
            return to_numpy(self.forward(x, bins).probs);
          },
          py::arg("ipsi"), py::arg("contra"))
      .def("predict", [](const CnnModel& self, const HrtfSample& s) {
        const auto p = predict(self, s);
        return py::make_tuple(p.cls, p.confidence);
      });

  m.def(
      "train",
      [](const std::vector<HrtfSample>& train_set, const std::vector<HrtfSample>& val_set, std::uint64_t seed,
         int max_epochs, std::size_t batch_size, double learning_rate) {
        TrainConfig cfg;
        cfg.seed = seed;
        cfg.max_epochs = max_epochs;
        cfg.batch_size = batch_size;
        cfg.adam.learning_rate = learning_rate;
        TrainResult r = [&] {
          py::gil_scoped_release release;
          return train(train_set, val_set, cfg);
        }();
        py::list epochs;
        for (const auto& e : r.history.epochs) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["train_loss"] = e.train_loss;
          d["val_loss"] = e.val_loss;
          d["val_accuracy"] = e.val_accuracy;
          d["learning_rate"] = e.learning_rate;
          epochs.append(d);
        }
        py::dict history;
        history["epochs"] = epochs;
        history["best_epoch"] = r.history.best_epoch;
        history["stop_epoch"] = r.history.stop_epoch;
        history["early_stopped"] = r.history.early_stopped;
        return py::make_tuple(std::move(r.model), history);
      },
      py::arg("train_set"), py::arg("val_set"), py::arg("seed") = 0, py::arg("max_epochs") = 200,
      py::arg("batch_size") = 32, py::arg("learning_rate") = 1e-4);

  // Evaluation.
  m.def("predict_all", &predict_all, py::arg("model"), py::arg("samples"));
  m.def("labels_of", &labels_of, py::arg("samples"));
  m.def(
      "metrics",
      [](const std::vector<int>& preds, const std::vector<int>& labels, bool observed_only) {
        std::optional<LabelSpace> space;
        if (observed_only) space = label_space_of(labels);
        return metrics_dict(metrics(preds, labels, space));
      },
      py::arg("preds"), py::arg("labels"), py::arg("observed_label_space") = false);
  m.def(
      "confusion",
      [](const std::vector<int>& preds, const std::vector<int>& labels) {
        const auto c = confusion(preds, labels);
        py::array_t<std::int64_t> out({py::ssize_t{kNumClasses}, py::ssize_t{kNumClasses}});
        auto v = out.mutable_unchecked<2>();
        for (int i = 0; i < kNumClasses; ++i)
          for (int j = 0; j < kNumClasses; ++j) v(i, j) = static_cast<std::int64_t>(c.counts[i][j]);
        return out;
      },
      py::arg("preds"), py::arg("labels"));
  m.def(
      "summarize",
      [](const std::vector<std::vector<double>>& f1) {
        const auto s = summarize(f1);
        py::dict d;
        d["in_domain"] = s.in_domain;
        d["best"] = s.best;
        d["median"] = s.median;
        d["average"] = s.average;
        d["worst"] = s.worst;
        return d;
      },
      py::arg("f1"));

  // Saliency.
  m.def(
      "saliency",
      [](const CnnModel& model, const HrtfSample& s, std::optional<int> cls) {
        return saliency_dict(cls ? saliency(model, s, *cls) : saliency_predicted(model, s));
      },
      py::arg("model"), py::arg("sample"), py::arg("class_id") = py::none());
  m.def(
      "cam",
      [](const CnnModel& model, const DoubleArray& ipsi, const DoubleArray& contra, int cls) {
        auto x = from_numpy(ipsi, "ipsi");
        const auto c = from_numpy(contra, "contra");
        if (c.size() != x.size()) throw ShapeMismatch("ipsi and contra lengths differ");
        const auto bins = x.size();
        x.insert(x.end(), c.begin(), c.end());
        return to_numpy(cam(model.forward(x, bins), model, cls));
      },
      py::arg("model"), py::arg("ipsi"), py::arg("contra"), py::arg("class_id"));
  m.def(
      "mean_saliency_contour",
      [](const CnnModel& model, const std::vector<std::vector<HrtfSample>>& sets,
         const std::vector<std::string>& dataset_ids, int cls) {
        if (sets.size() != dataset_ids.size()) throw UsageError("one dataset id per sample set is required");
        std::vector<SaliencyStack> stacks;
        for (std::size_t i = 0; i < sets.size(); ++i) stacks.push_back(aggregate(sets[i], model, dataset_ids[i], cls));
        const auto msc = equalize_and_msc(stacks);
        py::dict d;
        d["msc"] = to_numpy(msc.msc);
        d["rows_per_dataset"] = msc.rows_per_dataset;
        d["dataset_ids"] = msc.dataset_ids;
        return d;
      },
      py::arg("model"), py::arg("sample_sets"), py::arg("dataset_ids"), py::arg("class_id"));
}
