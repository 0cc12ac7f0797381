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
#include <numeric>

#include "hrtfxai/error.hpp"
#include "hrtfxai/model.hpp"
#include "hrtfxai/util.hpp"

using namespace hrtfxai;

namespace {

std::vector<double> random_input(std::size_t bins, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(2 * bins);
  for (auto& v : x) v = rng.uniform(0.0, 2.0);
  return x;
}

// Direct evaluation of one 'same'-padded conv output from the flat params.
double naive_conv(const CnnModel& m, std::size_t layer, const std::vector<double>& in, std::size_t len,
                  std::size_t o, std::size_t t) {
  const auto& spec = kConvLayers[layer];
  const auto& wb = m.blocks()[2 * layer];
  const auto& bb = m.blocks()[2 * layer + 1];
  double acc = m.params()[bb.offset + o];
  const long left = static_cast<long>((spec.kernel - 1) / 2);
  for (std::size_t i = 0; i < spec.in_channels; ++i) {
    for (std::size_t j = 0; j < spec.kernel; ++j) {
      const long src = static_cast<long>(t) + static_cast<long>(j) - left;
      if (src < 0 || src >= static_cast<long>(len)) continue;
      acc += m.params()[wb.offset + (o * spec.in_channels + i) * spec.kernel + j] *
             in[i * len + static_cast<std::size_t>(src)];
    }
  }
  return std::max(0.0, acc);
}

std::vector<HrtfSample> toy_set(std::size_t n, std::size_t bins, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<HrtfSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i % 3);
    HrtfSample s;
    s.ipsi.assign(bins, 0.2);
    s.contra.assign(bins, 0.2);
    for (std::size_t k = 0; k < bins; ++k) {
      if (k / (bins / 3) == static_cast<std::size_t>(cls)) s.ipsi[k] = 1.0;
      s.ipsi[k] += 0.05 * rng.uniform();
      s.contra[k] += 0.05 * rng.uniform();
    }
    const double polar[3] = {-45.0, 0.0, 45.0};
    s.direction = Direction::from_vertical(interaural_to_vertical({0.0, polar[cls]}));
    s.subject_id = "T" + std::to_string(i);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(Model, ParameterCountsPerLayer) {
  const auto m = CnnModel::create(1);
  const auto counts = m.layer_parameter_counts();
  EXPECT_EQ(counts[0], 2112u);
  EXPECT_EQ(counts[1], 32800u);
  EXPECT_EQ(counts[2], 8224u);
  EXPECT_EQ(counts[3], 4112u);
  EXPECT_EQ(counts[4], 153u);
  EXPECT_EQ(m.parameter_count(), 47401u);
}

TEST(Model, BlockLayoutIsContiguous) {
  const auto m = CnnModel::create(1);
  std::size_t offset = 0;
  for (const auto& b : m.blocks()) {
    EXPECT_EQ(b.offset, offset);
    offset += b.size;
  }
  EXPECT_EQ(offset, m.parameter_count());
  EXPECT_EQ(m.blocks().front().name, "conv1.weight");
  EXPECT_EQ(m.blocks().back().name, "dense.bias");
}

TEST(Model, InitIsSeededHeUniformWithZeroBias) {
  const auto a = CnnModel::create(3), b = CnnModel::create(3), c = CnnModel::create(4);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
  for (const auto& blk : a.blocks()) {
    const auto p = a.params().subspan(blk.offset, blk.size);
    if (blk.shape.size() == 1) {
      for (double v : p) EXPECT_EQ(v, 0.0);
    } else {
      std::size_t fan_in = 1;
      for (std::size_t d = 1; d < blk.shape.size(); ++d) fan_in *= blk.shape[d];
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (double v : p) EXPECT_LE(std::abs(v), limit);
    }
  }
}

TEST(Model, ShapesFollowFloorPooling) {
  const auto m = CnnModel::create(1);
  const auto t = m.forward(random_input(257, 1), 257);
  EXPECT_EQ(t.conv_len[0], 257u);
  EXPECT_EQ(t.pool_len[0], 128u);
  EXPECT_EQ(t.pool_len[1], 64u);
  EXPECT_EQ(t.pool_len[2], 32u);
  EXPECT_EQ(t.last_conv_length(), 32u);
  EXPECT_EQ(t.logits.size(), 9u);

  const auto m255 = CnnModel::create(1, 255);
  EXPECT_EQ(m255.forward(random_input(255, 2), 255).last_conv_length(), 31u);
  EXPECT_THROW(m.forward(random_input(8, 1), 8), UsageError);
  EXPECT_THROW(CnnModel::create(1, 15), UsageError);
}

TEST(Model, ConvMatchesNaiveSamePadding) {
  const auto m = CnnModel::create(9, 40);
  const auto x = random_input(40, 9);
  const auto t = m.forward(x, 40);
  for (std::size_t o = 0; o < 64; o += 7) {
    for (std::size_t p = 0; p < 40; ++p) EXPECT_NEAR(t.conv[0][o * 40 + p], naive_conv(m, 0, x, 40, o, p), 1e-12);
  }
  for (std::size_t o = 0; o < 32; o += 5) {
    for (std::size_t p = 0; p < 20; ++p) {
      EXPECT_NEAR(t.conv[1][o * 20 + p], naive_conv(m, 1, t.pool[0], 20, o, p), 1e-12);
    }
  }
}

TEST(Model, MaxPoolTakesPairMaximum) {
  const auto m = CnnModel::create(2, 33);
  const auto t = m.forward(random_input(33, 5), 33);
  const std::size_t len = t.conv_len[0], half = t.pool_len[0];
  EXPECT_EQ(half, 16u);
  for (std::size_t c = 0; c < 64; ++c) {
    for (std::size_t i = 0; i < half; ++i) {
      EXPECT_EQ(t.pool[0][c * half + i], std::max(t.conv[0][c * len + 2 * i], t.conv[0][c * len + 2 * i + 1]));
    }
  }
}

TEST(Model, SoftmaxSumsToOneAndIsStable) {
  std::vector<double> logits = {1000.0, 999.0, -1000.0, 0, 0, 0, 0, 0, 0};
  std::vector<double> p(9);
  softmax(logits, p);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  EXPECT_NEAR(p[0] / p[1], std::exp(1.0), 1e-9);
  const auto m = CnnModel::create(5);
  for (int s = 0; s < 10; ++s) {
    const auto t = m.forward(random_input(257, static_cast<std::uint64_t>(s)), 257);
    EXPECT_NEAR(std::accumulate(t.probs.begin(), t.probs.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(Model, PredictTiesGoToLowestIndex) {
  std::vector<double> probs = {0.1, 0.3, 0.3, 0.3, 0, 0, 0, 0, 0};
  EXPECT_EQ(predict_from_probs(probs).cls, 1);
  EXPECT_DOUBLE_EQ(predict_from_probs(probs).confidence, 0.3);
}

TEST(Model, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (std::size_t bins : {32u, 257u}) {
      const auto m = CnnModel::create(seed, bins);
      const auto x = random_input(bins, seed + 100);
      const auto r = gradient_check(m, x, bins, static_cast<int>(seed % 9), 1e-4, 12, seed);
      EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << " bins " << bins << " worst " << r.worst_block;
      EXPECT_GT(r.checked, 60u);
    }
  }
}

TEST(Model, BatchedPassesMatchPerSample) {
  const auto m = CnnModel::create(7, 64);
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(random_input(64, static_cast<std::uint64_t>(i + 20)));
  std::vector<const std::vector<double>*> ptrs;
  for (auto& x : xs) ptrs.push_back(&x);
  std::vector<ForwardTrace> traces;
  m.forward_batch(ptrs, 64, traces);
  const std::vector<int> targets = {0, 3, 8, 4, 4};

  std::vector<double> g_single(m.parameter_count(), 0.0), g_batch(m.parameter_count(), 0.0);
  double loss_single = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto t = m.forward(xs[i], 64);
    for (std::size_t c = 0; c < 9; ++c) EXPECT_NEAR(t.logits[c], traces[i].logits[c], 1e-12);
    loss_single += m.backward(t, targets[i], g_single);
  }
  const double loss_batch = m.backward_batch(traces, targets, g_batch);
  EXPECT_NEAR(loss_single, loss_batch, 1e-12);
  for (std::size_t p = 0; p < g_single.size(); ++p) {
    ASSERT_NEAR(g_single[p], g_batch[p], 1e-12 * std::max(1.0, std::abs(g_single[p]))) << p;
  }
}

TEST(ModelFile, RoundTripIsBitExact) {
  auto m = CnnModel::create(11, 100);
  m.metadata["preproc"] = "abc";
  const std::string bytes = encode_model(m);
  EXPECT_EQ(bytes.substr(0, 8), "HRTFCNN1");
  const auto back = decode_model(bytes);
  EXPECT_EQ(back.input_bins(), 100u);
  EXPECT_EQ(back.metadata.at("preproc"), "abc");
  EXPECT_TRUE(std::equal(m.params().begin(), m.params().end(), back.params().begin()));
  EXPECT_EQ(encode_model(back), bytes);
}

TEST(ModelFile, CorruptInputsRaiseDistinctErrors) {
  const std::string bytes = encode_model(CnnModel::create(1));
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_model(bad_magic), MagicMismatch);
  EXPECT_THROW(decode_model(bytes.substr(0, bytes.size() - 8)), TruncatedPayload);
  EXPECT_THROW(decode_model(bytes + "extra"), FormatError);
  EXPECT_THROW(CnnModel::from_params(std::vector<double>(10), 257), ShapeMismatch);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam adam(2, AdamConfig{});
  std::vector<double> p = {1.0, -1.0};
  std::vector<double> g = {0.5, -2.0};
  adam.step(p, g);
  // With bias correction the first update is lr * g / (|g| + eps).
  EXPECT_NEAR(p[0], 1.0 - 1e-4 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -1.0 + 1e-4 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Plateau, FrozenLossHalvesEveryFifteenEpochs) {
  PlateauScheduler sched(0.5, 15, 1e-4);
  std::vector<int> reductions;
  for (int epoch = 1; epoch <= 50; ++epoch) {
    if (sched.update(1.0)) reductions.push_back(epoch);
  }
  EXPECT_EQ(reductions, (std::vector<int>{16, 31, 46}));
}

TEST(Plateau, TinyImprovementCountsAsNone) {
  PlateauScheduler sched(0.5, 2, 1e-4);
  EXPECT_FALSE(sched.update(1.0));
  EXPECT_FALSE(sched.update(0.99999));
  EXPECT_TRUE(sched.update(0.99998));
  EXPECT_FALSE(sched.update(0.5));
}

TEST(Train, LearnsToySetDeterministically) {
  const auto tr = toy_set(60, 48, 1);
  const auto va = toy_set(15, 48, 2);
  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.adam.learning_rate = 3e-3;
  cfg.seed = 4;
  const auto a = train(tr, va, cfg);
  const auto b = train(tr, va, cfg);
  EXPECT_EQ(encode_model(a.model), encode_model(b.model));
  EXPECT_EQ(evaluate_loss(a.model, va).second, 1.0);
  EXPECT_EQ(a.history.epochs.size(), static_cast<std::size_t>(a.history.stop_epoch));
}

TEST(Train, EarlyStopsAndRestoresBestWeights) {
  auto tr = toy_set(30, 32, 3);
  // Flat inputs: nothing to learn, validation loss stalls.
  for (auto& s : tr) {
    std::fill(s.ipsi.begin(), s.ipsi.end(), 0.5);
    std::fill(s.contra.begin(), s.contra.end(), 0.5);
  }
  TrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.early_stop_patience = 5;
  cfg.plateau_patience = 2;
  cfg.adam.learning_rate = 1e-2;
  const auto r = train(tr, tr, cfg);
  EXPECT_TRUE(r.history.early_stopped);
  EXPECT_LT(r.history.stop_epoch, 200);
  const double restored = evaluate_loss(r.model, tr).first;
  double best = 1e9;
  for (const auto& e : r.history.epochs) best = std::min(best, e.val_loss);
  EXPECT_DOUBLE_EQ(restored, best);
  EXPECT_FALSE(r.history.lr_reductions.empty());
}

TEST(Train, RejectsEmptySets) {
  const auto tr = toy_set(6, 32, 1);
  EXPECT_THROW(train(tr, {}, TrainConfig{}), DataError);
  EXPECT_THROW(train({}, tr, TrainConfig{}), DataError);
}
