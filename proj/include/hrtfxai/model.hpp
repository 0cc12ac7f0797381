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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hrtfxai/dsp.hpp"

namespace hrtfxai {

inline constexpr std::size_t kInputChannels = 2;
inline constexpr std::size_t kMinInputBins = 16;
inline constexpr std::size_t kLastConvChannels = 16;

struct ConvLayerSpec {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t kernel;
  bool pool_after;
};

// conv1..conv4 of the elevation network. Every conv is stride 1, zero
// 'same' padding (left = (k-1)/2), ReLU.
inline constexpr std::array<ConvLayerSpec, 4> kConvLayers = {{
    {2, 64, 16, true},
    {64, 32, 16, true},
    {32, 32, 8, true},
    {32, 16, 8, false},
}};

// Location of one named parameter block inside the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Everything the backward pass and CAM need from one forward evaluation.
struct ForwardTrace {
  std::size_t input_bins = 0;
  std::vector<double> input;                       // [2 x B], ipsi then contra
  std::array<std::vector<double>, 4> conv;         // post-ReLU [C x L]
  std::array<std::size_t, 4> conv_len{};
  std::array<std::vector<double>, 3> pool;         // [C x L/2]
  std::array<std::vector<std::uint32_t>, 3> pool_arg;
  std::array<std::size_t, 3> pool_len{};
  std::vector<double> gap;                         // 16
  std::vector<double> logits;                      // 9
  std::vector<double> probs;                       // 9

  // A_k(x): [16 x L] activations of the last conv layer.
  std::span<const double> last_conv() const { return conv[3]; }
  std::size_t last_conv_length() const { return conv_len[3]; }
  int predicted_class() const;
  double confidence() const;
};

class CnnModel {
 public:
  // He-uniform weights, zero biases.
  static CnnModel create(std::uint64_t seed, std::size_t input_bins = 257);
  // Adopts a flat parameter vector; throws ShapeMismatch on a size mismatch.
  static CnnModel from_params(std::vector<double> params, std::size_t input_bins);

  std::size_t input_bins() const { return input_bins_; }
  void set_input_bins(std::size_t b) { input_bins_ = b; }

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::size_t parameter_count() const { return params_.size(); }
  // Trainable parameters per layer: conv1, conv2, conv3, conv4, dense.
  std::array<std::size_t, 5> layer_parameter_counts() const;

  double dense_weight(int cls, std::size_t channel) const;
  double dense_bias(int cls) const;

  // `x` is [2 x bins], ipsilateral channel first.
  ForwardTrace forward(std::span<const double> x, std::size_t bins) const;
  ForwardTrace forward(const HrtfSample& s) const;
  void forward_into(ForwardTrace& trace, std::span<const double> x, std::size_t bins) const;

  // Adds d(cross-entropy)/d(params) for `target` into `grad` (same layout as
  // params()) and returns the loss.
  double backward(const ForwardTrace& trace, int target, std::span<double> grad) const;

  // Mini-batch variants: one GEMM per layer over all samples. Equal to the
  // per-sample calls up to floating-point summation order.
  void forward_batch(std::span<const std::vector<double>* const> inputs, std::size_t bins,
                     std::vector<ForwardTrace>& traces) const;
  double backward_batch(std::span<const ForwardTrace> traces, std::span<const int> targets,
                        std::span<double> grad) const;

  std::map<std::string, std::string> metadata;

 private:
  CnnModel();
  void finish_head(ForwardTrace& t) const;
  double head_backward(const ForwardTrace& t, int target, std::span<double> grad, std::vector<double>& dy) const;

  std::size_t input_bins_ = 257;
  std::vector<double> params_;
  std::vector<ParamBlock> blocks_;
  std::size_t dense_w_offset_ = 0;
  std::size_t dense_b_offset_ = 0;
};

// Packs a sample into the [2 x B] network input.
std::vector<double> pack_input(const HrtfSample& s);

inline constexpr std::string_view kModelMagic = "HRTFCNN1";
std::string encode_model(const CnnModel& m);
CnnModel decode_model(std::string_view bytes, const std::string& source = "<memory>");
void save_model(const CnnModel& m, const std::filesystem::path& path);
CnnModel load_model(const std::filesystem::path& path);

struct Prediction {
  int cls = 0;
  double confidence = 0.0;
};
// Argmax of the softmax; ties go to the lowest class index.
Prediction predict(const CnnModel& m, const HrtfSample& s);
Prediction predict_from_probs(std::span<const double> probs);
void softmax(std::span<const double> logits, std::span<double> probs);

// --- training ----------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t n, AdamConfig cfg);
  void step(std::span<double> params, std::span<const double> grad);
  double learning_rate() const { return cfg_.learning_rate; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
  std::uint64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

// Halves the learning rate after `patience` epochs without a relative
// improvement of at least `threshold` in validation loss.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor, int patience, double threshold);
  // Returns true when the learning rate should be reduced after this epoch.
  bool update(double val_loss);

 private:
  double factor_;
  int patience_;
  double threshold_;
  double best_;
  int wait_ = 0;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 32;
  int max_epochs = 200;
  double plateau_factor = 0.5;
  int plateau_patience = 15;
  double plateau_threshold = 1e-4;
  int early_stop_patience = 30;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<int> lr_reductions;  // epochs after which the rate was halved
  int best_epoch = 0;
  int stop_epoch = 0;
  bool early_stopped = false;
};

struct TrainResult {
  CnnModel model;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch Adam on categorical cross-entropy with plateau LR schedule and
// early stopping; returns the weights of the best validation epoch. An epoch
// counts as progress for early stopping under the same relative threshold as
// the plateau rule.
// Deterministic for a given seed.
TrainResult train(const std::vector<HrtfSample>& train_set, const std::vector<HrtfSample>& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Central-difference check of backward(). Up to `per_block` randomly chosen
// entries of every parameter block are perturbed by +-step; when a
// perturbation flips a ReLU or max-pool decision the step is shrunk, and the
// entry is skipped if it still does. Error per entry is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_block;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};
GradCheckReport gradient_check(const CnnModel& model, std::span<const double> x, std::size_t bins, int target,
                               double step = 1e-4, std::size_t per_block = 24, std::uint64_t seed = 0);

// Mean cross-entropy and accuracy of `m` over `samples`.
std::pair<double, double> evaluate_loss(const CnnModel& m, const std::vector<HrtfSample>& samples);

}  // namespace hrtfxai
