# Copyright 2026 The hrtfxai Authors
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import hrtfxai


def test_classify_front_and_lateral():
    assert hrtfxai.classify_vertical(0.0, 0.0) == hrtfxai.ElevationClass.FrontLevel
    assert hrtfxai.classify_vertical(0.0, 90.0) == hrtfxai.ElevationClass.Up
    assert hrtfxai.classify_vertical(90.0, 10.0) == hrtfxai.ElevationClass.LateralUp
    assert hrtfxai.ElevationClass.BackDown.code == "BD"
    assert hrtfxai.parse_class("fu") == hrtfxai.ElevationClass.FrontUp
    with pytest.raises(hrtfxai.UsageError):
        hrtfxai.parse_class("Sideways")


def test_coordinate_round_trip():
    ip = hrtfxai.vertical_to_interaural(30.0, 20.0)
    vp = hrtfxai.interaural_to_vertical(ip)
    assert math.isclose(vp.azimuth_deg, 30.0, abs_tol=1e-9)
    assert math.isclose(vp.elevation_deg, 20.0, abs_tol=1e-9)
    assert ip.lateral_deg < 0  # sources on the left have negative lateral angle


def test_presets():
    assert hrtfxai.PreprocConfig.preset("optimized").output_bins() == 257
    assert hrtfxai.PreprocConfig.preset("perceptual").output_bins() == 255
    with pytest.raises(hrtfxai.UsageError):
        hrtfxai.PreprocConfig.preset("bogus")


def test_model_shapes_and_cam():
    model = hrtfxai.CnnModel.create(seed=1)
    assert model.parameter_count == 47401
    assert model.layer_parameter_counts() == [2112, 32800, 8224, 4112, 153]
    rng = np.random.default_rng(0)
    ipsi, contra = rng.random(257), rng.random(257)
    probs = model.probabilities(ipsi, contra)
    assert probs.shape == (9,)
    assert math.isclose(probs.sum(), 1.0, rel_tol=1e-12)
    cam = hrtfxai.cam(model, ipsi, contra, 3)
    assert cam.ndim == 1 and cam.size > 0
    with pytest.raises(hrtfxai.FormatError):
        model.probabilities(ipsi, contra[:-1])


def test_synth_preprocess_train_explain(tmp_path):
    spec = hrtfxai.SynthSpec()
    spec.n_subjects = 4
    out = hrtfxai.generate(spec, 5)
    assert len(out.subjects) == 4
    assert len(out.truth) == 4 * len(spec.grid())
    assert not out.negative_control

    path = tmp_path / "s.hrd"
    hrtfxai.write_subject(out.subjects[0], path)
    back = hrtfxai.read_subject(path)
    assert back.irs.shape == (len(spec.grid()), 2, spec_ir_length(out))
    np.testing.assert_array_equal(back.irs, out.subjects[0].irs)

    cfg = hrtfxai.PreprocConfig.preset("optimized")
    samples = hrtfxai.preprocess_records(out.subjects, cfg)
    assert samples[0].bins() == 257
    train_ids, val_ids, test_ids = hrtfxai.split_subjects(
        sorted({s.subject_id for s in samples}), seed=2)
    assert (len(train_ids), len(val_ids), len(test_ids)) == (2, 1, 1)
    train = hrtfxai.select_subjects(samples, train_ids)
    val = hrtfxai.select_subjects(samples, val_ids)
    model, history = hrtfxai.train(train, val, seed=3, max_epochs=2)
    assert len(history["epochs"]) == 2

    preds = hrtfxai.predict_all(model, val)
    labels = hrtfxai.labels_of(val)
    m = hrtfxai.metrics(preds, labels)
    assert 0.0 <= m["macro_f1"] <= 1.0
    assert hrtfxai.confusion(preds, labels).sum() == len(val)

    sal = hrtfxai.saliency(model, val[0])
    assert sal["values"].shape == (257,)
    assert sal["values"].min() >= 0.0 and sal["values"].max() <= 1.0

    model.save(tmp_path / "m.bin")
    again = hrtfxai.CnnModel.load(tmp_path / "m.bin")
    np.testing.assert_array_equal(again.params, model.params)


def test_summary_of_cross_matrix():
    s = hrtfxai.summarize([[0.9, 0.5], [0.4, 0.8]])
    assert math.isclose(s["in_domain"], 0.85)
    assert hrtfxai.summarize([[0.7]])["best"] is None


def test_corrupt_file_raises_data_error(tmp_path):
    bad = tmp_path / "bad.hrd"
    bad.write_bytes(b"NOTMAGIC" + b"\0" * 16)
    with pytest.raises(hrtfxai.DataError):
        hrtfxai.read_subject(bad)


def spec_ir_length(out):
    return out.subjects[0].n_samples
