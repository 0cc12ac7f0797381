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

#include "hrtfxai/model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hrtfxai/error.hpp"
#include "hrtfxai/util.hpp"
#include "json.hpp"

namespace hrtfxai {

namespace {

constexpr std::size_t kDenseIn = kLastConvChannels;
constexpr std::size_t kDenseOut = kNumClasses;

std::size_t pad_left(std::size_t kernel) { return (kernel - 1) / 2; }

// Copies [C x L] into a zero-padded [C x (L + K - 1)] buffer.
void pad_rows(const double* src, std::size_t channels, std::size_t len, std::size_t kernel,
              std::vector<double>& dst) {
  const std::size_t lp = len + kernel - 1;
  const std::size_t left = pad_left(kernel);
  dst.assign(channels * lp, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    std::copy_n(src + c * len, len, dst.data() + c * lp + left);
  }
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

// C[m x n] (+)= op(A) * op(B); all matrices row-major and densely packed.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, bool accumulate, double* c) {
  const auto mi = static_cast<Eigen::Index>(m), ni = static_cast<Eigen::Index>(n), ki = static_cast<Eigen::Index>(k);
  RowMap cm(c, mi, ni);
  auto product = [&](const auto& am) {
    if (trans_b) {
      if (!accumulate) cm.noalias() = am * ConstRowMap(b, ni, ki).transpose();
      else cm.noalias() += am * ConstRowMap(b, ni, ki).transpose();
    } else {
      if (!accumulate) cm.noalias() = am * ConstRowMap(b, ki, ni);
      else cm.noalias() += am * ConstRowMap(b, ki, ni);
    }
  };
  if (trans_a) product(ConstRowMap(a, ki, mi).transpose());
  else product(ConstRowMap(a, mi, ki));
}

// cols[(i * K + j) * len + t] = xp[i][t + j]
void im2col(const std::vector<double>& xp, const ConvLayerSpec& spec, std::size_t len, std::vector<double>& cols) {
  const std::size_t lp = len + spec.kernel - 1;
  cols.resize(spec.in_channels * spec.kernel * len);
  for (std::size_t i = 0; i < spec.in_channels; ++i) {
    for (std::size_t j = 0; j < spec.kernel; ++j) {
      std::copy_n(xp.data() + i * lp + j, len, cols.data() + (i * spec.kernel + j) * len);
    }
  }
}

// Batched im2col from unpadded [C x len] rows with 'same' zero padding:
// cols[(i * K + j) * (n * len) + s * len + t] = x_s[i][t + j - left].
void im2col_batch(const std::vector<const std::vector<double>*>& xs, const ConvLayerSpec& spec, std::size_t len,
                  std::vector<double>& cols) {
  const std::size_t n = xs.size();
  const std::size_t width = n * len;
  const auto left = static_cast<std::ptrdiff_t>(pad_left(spec.kernel));
  cols.resize(spec.in_channels * spec.kernel * width);
  const auto slen = static_cast<std::ptrdiff_t>(len);
  for (std::size_t s = 0; s < n; ++s) {
    const double* x = xs[s]->data();
    for (std::size_t i = 0; i < spec.in_channels; ++i) {
      for (std::size_t j = 0; j < spec.kernel; ++j) {
        double* dst = cols.data() + (i * spec.kernel + j) * width + s * len;
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - left;
        const std::ptrdiff_t t0 = std::clamp<std::ptrdiff_t>(-shift, 0, slen);
        const std::ptrdiff_t t1 = std::clamp<std::ptrdiff_t>(slen - shift, t0, slen);
        std::fill(dst, dst + t0, 0.0);
        std::copy(x + i * len + t0 + shift, x + i * len + t1 + shift, dst + t0);
        std::fill(dst + t1, dst + len, 0.0);
      }
    }
  }
}

// Position-major variant for the batched forward pass:
// rows[(s * len + t)][i * K + j] = x_s[i][t + j - left], zero outside the signal.
void im2col_batch_rows(const std::vector<const std::vector<double>*>& xs, const ConvLayerSpec& spec, std::size_t len,
                       std::vector<double>& rows) {
  const std::size_t n = xs.size();
  const std::size_t width = spec.in_channels * spec.kernel;
  const auto left = static_cast<std::ptrdiff_t>(pad_left(spec.kernel));
  const auto slen = static_cast<std::ptrdiff_t>(len);
  const auto k = static_cast<std::ptrdiff_t>(spec.kernel);
  rows.resize(n * len * width);
  for (std::size_t s = 0; s < n; ++s) {
    const double* x = xs[s]->data();
    for (std::ptrdiff_t t = 0; t < slen; ++t) {
      double* dst = rows.data() + (s * len + static_cast<std::size_t>(t)) * width;
      const std::ptrdiff_t start = t - left;
      const std::ptrdiff_t j0 = std::clamp<std::ptrdiff_t>(-start, 0, k);
      const std::ptrdiff_t j1 = std::clamp<std::ptrdiff_t>(slen - start, j0, k);
      for (std::size_t i = 0; i < spec.in_channels; ++i) {
        double* d = dst + i * spec.kernel;
        const double* src = x + i * len + start;
        std::fill(d, d + j0, 0.0);
        std::copy(src + j0, src + j1, d + j0);
        std::fill(d + j1, d + k, 0.0);
      }
    }
  }
}

// y[o][t] = relu(b[o] + sum_i sum_j w[o][i][j] * xp[i][t + j])
void conv_forward(const std::vector<double>& xp, const ConvLayerSpec& spec, std::size_t len,
                  const double* w, const double* b, std::vector<double>& cols, std::vector<double>& y) {
  const std::size_t rows = spec.in_channels * spec.kernel;
  im2col(xp, spec, len, cols);
  y.resize(spec.out_channels * len);
  gemm(false, false, spec.out_channels, len, rows, w, cols.data(), false, y.data());
  for (std::size_t o = 0; o < spec.out_channels; ++o) {
    double* yo = y.data() + o * len;
    for (std::size_t t = 0; t < len; ++t) yo[t] = std::max(0.0, yo[t] + b[o]);
  }
}

// Accumulates weight/bias gradients and, when `dxp` is non-null, the
// gradient w.r.t. the padded input.
void conv_backward(const std::vector<double>& xp, const ConvLayerSpec& spec, std::size_t len,
                   const double* w, const std::vector<double>& dy, double* dw, double* db,
                   std::vector<double>& cols, std::vector<double>* dxp) {
  const std::size_t lp = len + spec.kernel - 1;
  const std::size_t rows = spec.in_channels * spec.kernel;
  for (std::size_t o = 0; o < spec.out_channels; ++o) {
    const double* dyo = dy.data() + o * len;
    db[o] += std::accumulate(dyo, dyo + len, 0.0);
  }
  im2col(xp, spec, len, cols);
  gemm(false, true, spec.out_channels, rows, len, dy.data(), cols.data(), true, dw);
  if (!dxp) return;
  gemm(true, false, rows, len, spec.out_channels, w, dy.data(), false, cols.data());
  dxp->assign(spec.in_channels * lp, 0.0);
  for (std::size_t i = 0; i < spec.in_channels; ++i) {
    double* dst = dxp->data() + i * lp;
    for (std::size_t j = 0; j < spec.kernel; ++j) {
      const double* src = cols.data() + (i * spec.kernel + j) * len;
      for (std::size_t t = 0; t < len; ++t) dst[t + j] += src[t];
    }
  }
}

void maxpool_forward(const std::vector<double>& in, std::size_t channels, std::size_t len,
                     std::vector<double>& out, std::vector<std::uint32_t>& arg) {
  const std::size_t half = len / 2;
  out.resize(channels * half);
  arg.resize(channels * half);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = in.data() + c * len;
    for (std::size_t i = 0; i < half; ++i) {
      const bool second = src[2 * i + 1] > src[2 * i];
      out[c * half + i] = second ? src[2 * i + 1] : src[2 * i];
      arg[c * half + i] = static_cast<std::uint32_t>(2 * i + (second ? 1 : 0));
    }
  }
}

}  // namespace

// --- ForwardTrace --------------------------------------------------------------

int ForwardTrace::predicted_class() const { return predict_from_probs(probs).cls; }
double ForwardTrace::confidence() const { return predict_from_probs(probs).confidence; }

void softmax(std::span<const double> logits, std::span<double> probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - mx);
    sum += probs[c];
  }
  for (auto& p : probs) p /= sum;
}

Prediction predict_from_probs(std::span<const double> probs) {
  Prediction p;
  p.cls = 0;
  p.confidence = probs[0];
  for (std::size_t c = 1; c < probs.size(); ++c) {
    if (probs[c] > p.confidence) {
      p.cls = static_cast<int>(c);
      p.confidence = probs[c];
    }
  }
  return p;
}

// --- CnnModel ----------------------------------------------------------------

CnnModel::CnnModel() {
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    const std::size_t size =
        std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    blocks_.push_back(ParamBlock{std::move(name), std::move(shape), offset, size});
    offset += size;
  };
  for (std::size_t l = 0; l < kConvLayers.size(); ++l) {
    const auto& s = kConvLayers[l];
    const std::string base = "conv" + std::to_string(l + 1);
    add(base + ".weight", {s.out_channels, s.in_channels, s.kernel});
    add(base + ".bias", {s.out_channels});
  }
  add("dense.weight", {kDenseOut, kDenseIn});
  add("dense.bias", {kDenseOut});
  dense_w_offset_ = blocks_[8].offset;
  dense_b_offset_ = blocks_[9].offset;
  params_.assign(offset, 0.0);
}

CnnModel CnnModel::create(std::uint64_t seed, std::size_t input_bins) {
  if (input_bins < kMinInputBins) {
    throw UsageError("model input needs at least " + std::to_string(kMinInputBins) + " bins");
  }
  CnnModel m;
  m.input_bins_ = input_bins;
  Rng rng(seed);
  for (std::size_t b = 0; b < m.blocks_.size(); b += 2) {
    const auto& wb = m.blocks_[b];
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < wb.shape.size(); ++d) fan_in *= wb.shape[d];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < wb.size; ++i) m.params_[wb.offset + i] = rng.uniform(-limit, limit);
  }
  return m;
}

CnnModel CnnModel::from_params(std::vector<double> params, std::size_t input_bins) {
  CnnModel m;
  if (params.size() != m.params_.size()) {
    throw ShapeMismatch("model expects " + std::to_string(m.params_.size()) + " parameters, got " +
                        std::to_string(params.size()));
  }
  m.params_ = std::move(params);
  m.input_bins_ = input_bins;
  return m;
}

std::array<std::size_t, 5> CnnModel::layer_parameter_counts() const {
  std::array<std::size_t, 5> out{};
  for (std::size_t l = 0; l < 5; ++l) out[l] = blocks_[2 * l].size + blocks_[2 * l + 1].size;
  return out;
}

double CnnModel::dense_weight(int cls, std::size_t channel) const {
  return params_[dense_w_offset_ + static_cast<std::size_t>(cls) * kDenseIn + channel];
}

double CnnModel::dense_bias(int cls) const {
  return params_[dense_b_offset_ + static_cast<std::size_t>(cls)];
}

ForwardTrace CnnModel::forward(std::span<const double> x, std::size_t bins) const {
  ForwardTrace t;
  forward_into(t, x, bins);
  return t;
}

ForwardTrace CnnModel::forward(const HrtfSample& s) const {
  const auto x = pack_input(s);
  return forward(x, s.bins());
}

void CnnModel::finish_head(ForwardTrace& t) const {
  const std::size_t last_len = t.conv_len[3];
  t.gap.assign(kDenseIn, 0.0);
  for (std::size_t k = 0; k < kDenseIn; ++k) {
    const double* a = t.conv[3].data() + k * last_len;
    t.gap[k] = std::accumulate(a, a + last_len, 0.0) / static_cast<double>(last_len);
  }
  t.logits.assign(kDenseOut, 0.0);
  for (std::size_t c = 0; c < kDenseOut; ++c) {
    double acc = params_[dense_b_offset_ + c];
    for (std::size_t k = 0; k < kDenseIn; ++k) acc += params_[dense_w_offset_ + c * kDenseIn + k] * t.gap[k];
    t.logits[c] = acc;
  }
  t.probs.assign(kDenseOut, 0.0);
  softmax(t.logits, t.probs);
}

void CnnModel::forward_into(ForwardTrace& t, std::span<const double> x, std::size_t bins) const {
  if (bins < kMinInputBins) {
    throw UsageError("input has " + std::to_string(bins) + " bins; the network needs at least " +
                     std::to_string(kMinInputBins));
  }
  if (x.size() != kInputChannels * bins) throw UsageError("input must be [2 x bins]");
  t.input_bins = bins;
  t.input.assign(x.begin(), x.end());

  std::vector<double> xp;
  std::vector<double> cols;
  const std::vector<double>* layer_in = &t.input;
  std::size_t len = bins;
  for (std::size_t l = 0; l < kConvLayers.size(); ++l) {
    const auto& spec = kConvLayers[l];
    pad_rows(layer_in->data(), spec.in_channels, len, spec.kernel, xp);
    conv_forward(xp, spec, len, params_.data() + blocks_[2 * l].offset,
                 params_.data() + blocks_[2 * l + 1].offset, cols, t.conv[l]);
    t.conv_len[l] = len;
    if (spec.pool_after) {
      maxpool_forward(t.conv[l], spec.out_channels, len, t.pool[l], t.pool_arg[l]);
      len /= 2;
      t.pool_len[l] = len;
      layer_in = &t.pool[l];
    }
  }

  finish_head(t);
}

// Loss and gradient of the dense head; leaves d(loss)/d(conv4 pre-ReLU) in dy.
double CnnModel::head_backward(const ForwardTrace& t, int target, std::span<double> grad,
                               std::vector<double>& dy) const {
  if (target < 0 || target >= kNumClasses) throw UsageError("target class out of range");
  const auto tgt = static_cast<std::size_t>(target);
  const double loss = -std::log(std::max(t.probs[tgt], std::numeric_limits<double>::min()));

  // Dense head.
  std::vector<double> dlogits(t.probs);
  dlogits[tgt] -= 1.0;
  std::vector<double> dgap(kDenseIn, 0.0);
  for (std::size_t c = 0; c < kDenseOut; ++c) {
    grad[dense_b_offset_ + c] += dlogits[c];
    for (std::size_t k = 0; k < kDenseIn; ++k) {
      grad[dense_w_offset_ + c * kDenseIn + k] += dlogits[c] * t.gap[k];
      dgap[k] += params_[dense_w_offset_ + c * kDenseIn + k] * dlogits[c];
    }
  }

  // GAP and ReLU of conv4.
  const std::size_t len = t.conv_len[3];
  dy.assign(kDenseIn * len, 0.0);
  for (std::size_t k = 0; k < kDenseIn; ++k) {
    const double g = dgap[k] / static_cast<double>(len);
    for (std::size_t x = 0; x < len; ++x) {
      dy[k * len + x] = t.conv[3][k * len + x] > 0.0 ? g : 0.0;
    }
  }

  return loss;
}

double CnnModel::backward(const ForwardTrace& t, int target, std::span<double> grad) const {
  if (target < 0 || target >= kNumClasses) throw UsageError("target class out of range");
  if (grad.size() != params_.size()) throw UsageError("gradient buffer has the wrong size");
  std::vector<double> dy;
  const double loss = head_backward(t, target, grad, dy);

  std::vector<double> xp;
  std::vector<double> dxp;
  std::vector<double> cols;
  for (std::size_t l = kConvLayers.size(); l-- > 0;) {
    const auto& spec = kConvLayers[l];
    const std::vector<double>& layer_in = (l == 0) ? t.input : t.pool[l - 1];
    const std::size_t len = t.conv_len[l];
    pad_rows(layer_in.data(), spec.in_channels, len, spec.kernel, xp);
    conv_backward(xp, spec, len, params_.data() + blocks_[2 * l].offset, dy,
                  grad.data() + blocks_[2 * l].offset, grad.data() + blocks_[2 * l + 1].offset, cols,
                  l == 0 ? nullptr : &dxp);
    if (l == 0) break;

    // Crop padding, route through the previous max-pool and ReLU.
    const std::size_t pooled = t.pool_len[l - 1];
    const std::size_t prev_len = t.conv_len[l - 1];
    const std::size_t lp = len + spec.kernel - 1;
    const std::size_t left = pad_left(spec.kernel);
    const std::size_t channels = spec.in_channels;
    std::vector<double> dprev(channels * prev_len, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t i = 0; i < pooled; ++i) {
        const double g = dxp[c * lp + left + i];
        const std::size_t src = c * prev_len + t.pool_arg[l - 1][c * pooled + i];
        if (t.conv[l - 1][src] > 0.0) dprev[src] += g;
      }
    }
    dy.swap(dprev);
  }
  return loss;
}

void CnnModel::forward_batch(std::span<const std::vector<double>* const> inputs, std::size_t bins,
                             std::vector<ForwardTrace>& traces) const {
  if (bins < kMinInputBins) {
    throw UsageError("input has " + std::to_string(bins) + " bins; the network needs at least " +
                     std::to_string(kMinInputBins));
  }
  const std::size_t n = inputs.size();
  traces.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (inputs[s]->size() != kInputChannels * bins) throw UsageError("input must be [2 x bins]");
    traces[s].input_bins = bins;
    traces[s].input.assign(inputs[s]->begin(), inputs[s]->end());
  }
  std::vector<const std::vector<double>*> layer_in(n);
  for (std::size_t s = 0; s < n; ++s) layer_in[s] = &traces[s].input;
  // Batch buffers reach tens of megabytes; reusing them avoids an mmap and
  // page-fault storm on every call.
  thread_local std::vector<double> cols, y;
  std::size_t len = bins;
  for (std::size_t l = 0; l < kConvLayers.size(); ++l) {
    const auto& spec = kConvLayers[l];
    const std::size_t rows = spec.in_channels * spec.kernel;
    im2col_batch_rows(layer_in, spec, len, cols);
    // y is position-major: y[(s * len + t) * out_channels + o].
    y.resize(n * len * spec.out_channels);
    gemm(false, true, n * len, spec.out_channels, rows, cols.data(), params_.data() + blocks_[2 * l].offset, false,
         y.data());
    const double* b = params_.data() + blocks_[2 * l + 1].offset;
    const std::size_t outs = spec.out_channels;
    for (std::size_t s = 0; s < n; ++s) {
      auto& t = traces[s];
      t.conv[l].resize(outs * len);
      const double* ys = y.data() + s * len * outs;
      for (std::size_t o = 0; o < outs; ++o) {
        double* dst = t.conv[l].data() + o * len;
        for (std::size_t x = 0; x < len; ++x) dst[x] = std::max(0.0, ys[x * outs + o] + b[o]);
      }
      t.conv_len[l] = len;
      if (spec.pool_after) {
        maxpool_forward(t.conv[l], spec.out_channels, len, t.pool[l], t.pool_arg[l]);
        t.pool_len[l] = len / 2;
        layer_in[s] = &t.pool[l];
      }
    }
    if (spec.pool_after) len /= 2;
  }
  for (auto& t : traces) finish_head(t);
}

double CnnModel::backward_batch(std::span<const ForwardTrace> traces, std::span<const int> targets,
                                std::span<double> grad) const {
  const std::size_t n = traces.size();
  if (targets.size() != n) throw UsageError("backward_batch: one target per trace");
  if (grad.size() != params_.size()) throw UsageError("gradient buffer has the wrong size");
  if (n == 0) return 0.0;

  double loss = 0.0;
  std::size_t len = traces[0].conv_len[3];
  thread_local std::vector<double> dy, dprev, cols, dy_one;
  dy.assign(kDenseIn * n * len, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    loss += head_backward(traces[s], targets[s], grad, dy_one);
    for (std::size_t k = 0; k < kDenseIn; ++k) {
      std::copy_n(dy_one.data() + k * len, len, dy.data() + k * n * len + s * len);
    }
  }

  std::vector<const std::vector<double>*> layer_in(n);
  for (std::size_t l = kConvLayers.size(); l-- > 0;) {
    const auto& spec = kConvLayers[l];
    len = traces[0].conv_len[l];
    const std::size_t rows = spec.in_channels * spec.kernel;
    const std::size_t width = n * len;
    for (std::size_t s = 0; s < n; ++s) layer_in[s] = (l == 0) ? &traces[s].input : &traces[s].pool[l - 1];

    double* db = grad.data() + blocks_[2 * l + 1].offset;
    for (std::size_t o = 0; o < spec.out_channels; ++o) {
      const double* row = dy.data() + o * width;
      db[o] += std::accumulate(row, row + width, 0.0);
    }
    im2col_batch(layer_in, spec, len, cols);
    gemm(false, true, spec.out_channels, rows, width, dy.data(), cols.data(), true,
         grad.data() + blocks_[2 * l].offset);
    if (l == 0) break;

    gemm(true, false, rows, width, spec.out_channels, params_.data() + blocks_[2 * l].offset, dy.data(), false,
         cols.data());
    // col2im into the pooled input, then route through max-pool and ReLU.
    const std::size_t prev_len = traces[0].conv_len[l - 1];
    const std::size_t channels = spec.in_channels;
    const auto left = static_cast<std::ptrdiff_t>(pad_left(spec.kernel));
    dprev.assign(channels * n * prev_len, 0.0);
    std::vector<double> dpool(len);
    for (std::size_t s = 0; s < n; ++s) {
      const auto& t = traces[s];
      for (std::size_t c = 0; c < channels; ++c) {
        std::fill(dpool.begin(), dpool.end(), 0.0);
        for (std::size_t j = 0; j < spec.kernel; ++j) {
          const double* src = cols.data() + (c * spec.kernel + j) * width + s * len;
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - left;
          const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(len),
                                                             static_cast<std::ptrdiff_t>(len) - shift);
          for (std::ptrdiff_t x = t0; x < t1; ++x) dpool[static_cast<std::size_t>(x + shift)] += src[x];
        }
        const std::uint32_t* arg = t.pool_arg[l - 1].data() + c * len;
        const double* act = t.conv[l - 1].data() + c * prev_len;
        double* dst = dprev.data() + c * n * prev_len + s * prev_len;
        for (std::size_t i = 0; i < len; ++i) {
          if (act[arg[i]] > 0.0) dst[arg[i]] += dpool[i];
        }
      }
    }
    dy.swap(dprev);
  }
  return loss;
}

std::vector<double> pack_input(const HrtfSample& s) {
  if (s.ipsi.size() != s.contra.size()) throw DataError("sample channels differ in length");
  std::vector<double> x;
  x.reserve(2 * s.bins());
  x.insert(x.end(), s.ipsi.begin(), s.ipsi.end());
  x.insert(x.end(), s.contra.begin(), s.contra.end());
  return x;
}

Prediction predict(const CnnModel& m, const HrtfSample& s) {
  return predict_from_probs(m.forward(s).probs);
}

// --- persistence -------------------------------------------------------------

std::string encode_model(const CnnModel& m) {
  nlohmann::json manifest;
  manifest["format"] = std::string(kModelMagic);
  manifest["input_bins"] = m.input_bins();
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < kConvLayers.size(); ++l) {
    const auto& s = kConvLayers[l];
    layers.push_back({{"name", "conv" + std::to_string(l + 1)},
                      {"type", "conv1d"},
                      {"in_channels", s.in_channels},
                      {"out_channels", s.out_channels},
                      {"kernel", s.kernel},
                      {"padding", "same"},
                      {"activation", "relu"},
                      {"maxpool", s.pool_after ? 2 : 0}});
  }
  layers.push_back({{"name", "gap"}, {"type", "global_average_pool"}});
  layers.push_back({{"name", "dense"}, {"type", "dense"}, {"in", kDenseIn}, {"out", kDenseOut},
                    {"activation", "softmax"}});
  manifest["layers"] = std::move(layers);
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : m.blocks()) blocks.push_back({{"name", b.name}, {"shape", b.shape}});
  manifest["blocks"] = std::move(blocks);
  manifest["metadata"] = m.metadata;

  std::string payload;
  payload.reserve(m.parameter_count() * 8);
  for (const double v : m.params()) le::put_f64(payload, v);
  return make_frame(kModelMagic, manifest.dump(), payload);
}

CnnModel decode_model(std::string_view bytes, const std::string& source) {
  const Frame frame = parse_frame(bytes, kModelMagic, source);
  CnnModel reference = CnnModel::create(0, kMinInputBins);
  std::size_t input_bins = 0;
  std::map<std::string, std::string> metadata;
  try {
    const auto manifest = nlohmann::json::parse(frame.json);
    input_bins = manifest.at("input_bins").get<std::size_t>();
    const auto& blocks = manifest.at("blocks");
    if (blocks.size() != reference.blocks().size()) {
      throw ShapeMismatch(source + ": expected " + std::to_string(reference.blocks().size()) +
                          " parameter blocks, found " + std::to_string(blocks.size()));
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& want = reference.blocks()[i];
      const auto name = blocks[i].at("name").get<std::string>();
      const auto shape = blocks[i].at("shape").get<std::vector<std::size_t>>();
      if (name != want.name || shape != want.shape) {
        throw ShapeMismatch(source + ": parameter block " + std::to_string(i) + " (" + name +
                            ") does not match the network layout");
      }
    }
    if (manifest.contains("metadata")) {
      metadata = manifest["metadata"].get<std::map<std::string, std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": corrupt model manifest: " + e.what());
  }
  const std::size_t n = reference.parameter_count();
  if (frame.payload.size() < n * 8) throw TruncatedPayload(source + ": truncated parameter payload");
  if (frame.payload.size() > n * 8) throw FormatError(source + ": trailing bytes after parameters");
  std::vector<double> params(n);
  for (std::size_t i = 0; i < n; ++i) {
    params[i] = le::get_f64(frame.payload.data() + 8 * i);
    if (!std::isfinite(params[i])) throw NonFiniteValue(source + ": non-finite parameter");
  }
  CnnModel m = CnnModel::from_params(std::move(params), input_bins);
  m.metadata = std::move(metadata);
  return m;
}

void save_model(const CnnModel& m, const std::filesystem::path& path) {
  write_file(path, encode_model(m));
}

CnnModel load_model(const std::filesystem::path& path) {
  return decode_model(read_file(path), path.string());
}

// --- optimisation ------------------------------------------------------------

Adam::Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double mhat = m_[i] / b1t;
    const double vhat = v_[i] / b2t;
    params[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
  }
}

PlateauScheduler::PlateauScheduler(double factor, int patience, double threshold)
    : factor_(factor), patience_(patience), threshold_(threshold),
      best_(std::numeric_limits<double>::infinity()) {}

bool PlateauScheduler::update(double val_loss) {
  if (val_loss < best_ * (1.0 - threshold_)) {
    best_ = val_loss;
    wait_ = 0;
    return false;
  }
  if (++wait_ >= patience_) {
    wait_ = 0;
    return true;
  }
  return false;
}

std::pair<double, double> evaluate_loss(const CnnModel& m, const std::vector<HrtfSample>& samples) {
  if (samples.empty()) return {0.0, 0.0};
  ForwardTrace trace;
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    const auto x = pack_input(s);
    m.forward_into(trace, x, s.bins());
    const auto label = static_cast<std::size_t>(to_index(s.label()));
    loss -= std::log(std::max(trace.probs[label], std::numeric_limits<double>::min()));
    if (trace.predicted_class() == to_index(s.label())) ++correct;
  }
  const double n = static_cast<double>(samples.size());
  return {loss / n, static_cast<double>(correct) / n};
}

TrainResult train(const std::vector<HrtfSample>& train_set, const std::vector<HrtfSample>& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw DataError("train: empty training set");
  if (val_set.empty()) throw DataError("train: empty validation set");
  if (cfg.batch_size == 0 || cfg.max_epochs <= 0 || cfg.plateau_patience < 1 ||
      cfg.early_stop_patience < 1 || !(cfg.adam.learning_rate > 0.0)) {
    throw UsageError("train: invalid training configuration");
  }
  const std::size_t bins = train_set.front().bins();
  for (const auto* set : {&train_set, &val_set}) {
    for (const auto& s : *set) {
      if (s.bins() != bins) throw DataError("train: samples have inconsistent bin counts");
    }
  }

  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;
  inputs.reserve(train_set.size());
  for (const auto& s : train_set) {
    inputs.push_back(pack_input(s));
    labels.push_back(to_index(s.label()));
  }

  TrainResult result{CnnModel::create(cfg.seed, bins), {}};
  CnnModel& model = result.model;
  Adam adam(model.parameter_count(), cfg.adam);
  PlateauScheduler plateau(cfg.plateau_factor, cfg.plateau_patience, cfg.plateau_threshold);
  // Shuffling uses its own stream so that init and order are independent.
  Rng rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(model.parameter_count());
  std::vector<double> best_params(model.params().begin(), model.params().end());
  double best_val = std::numeric_limits<double>::infinity();
  double progress_ref = std::numeric_limits<double>::infinity();
  int last_progress = 0;
  std::vector<ForwardTrace> traces;
  std::vector<const std::vector<double>*> batch_inputs;
  std::vector<int> batch_labels;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      batch_inputs.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch_inputs.push_back(&inputs[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      model.forward_batch(batch_inputs, bins, traces);
      const double batch_loss = model.backward_batch(traces, batch_labels, grad);
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("train: non-finite loss in epoch " + std::to_string(epoch) +
                             " at batch starting " + std::to_string(start));
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& g : grad) g *= inv;
      adam.step(model.params(), grad);
      loss_sum += batch_loss;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    std::tie(rec.val_loss, rec.val_accuracy) = evaluate_loss(model, val_set);
    rec.learning_rate = adam.learning_rate();
    if (!std::isfinite(rec.val_loss)) {
      throw NumericalError("train: non-finite validation loss in epoch " + std::to_string(epoch));
    }
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.history.best_epoch = epoch;
      std::copy(model.params().begin(), model.params().end(), best_params.begin());
    }
    if (rec.val_loss < progress_ref * (1.0 - cfg.plateau_threshold)) {
      progress_ref = rec.val_loss;
      last_progress = epoch;
    }
    if (plateau.update(rec.val_loss)) {
      adam.set_learning_rate(adam.learning_rate() * cfg.plateau_factor);
      result.history.lr_reductions.push_back(epoch);
    }
    result.history.stop_epoch = epoch;
    if (epoch - last_progress >= cfg.early_stop_patience) {
      result.history.early_stopped = true;
      break;
    }
  }

  std::copy(best_params.begin(), best_params.end(), model.params().begin());
  return result;
}

namespace {

bool same_pattern(const ForwardTrace& a, const ForwardTrace& b) {
  for (std::size_t l = 0; l < 4; ++l) {
    for (std::size_t i = 0; i < a.conv[l].size(); ++i) {
      if ((a.conv[l][i] > 0.0) != (b.conv[l][i] > 0.0)) return false;
    }
  }
  for (std::size_t l = 0; l < 3; ++l) {
    if (a.pool_arg[l] != b.pool_arg[l]) return false;
  }
  return true;
}

double target_loss(const ForwardTrace& t, int target) {
  return -std::log(std::max(t.probs[static_cast<std::size_t>(target)], std::numeric_limits<double>::min()));
}

}  // namespace

GradCheckReport gradient_check(const CnnModel& model, std::span<const double> x, std::size_t bins, int target,
                               double step, std::size_t per_block, std::uint64_t seed) {
  const ForwardTrace base = model.forward(x, bins);
  std::vector<double> analytic(model.parameter_count(), 0.0);
  model.backward(base, target, analytic);

  GradCheckReport report;
  CnnModel probe = model;
  Rng rng(seed);
  ForwardTrace plus, minus;
  for (const auto& block : model.blocks()) {
    std::vector<std::size_t> picks(block.size);
    std::iota(picks.begin(), picks.end(), block.offset);
    if (picks.size() > per_block) {
      rng.shuffle(picks);
      picks.resize(per_block);
    }
    for (const std::size_t p : picks) {
      const double original = model.params()[p];
      bool ok = false;
      double numeric = 0.0;
      for (double h = step; h >= step * 1e-3; h *= 0.1) {
        probe.params()[p] = original + h;
        probe.forward_into(plus, x, bins);
        probe.params()[p] = original - h;
        probe.forward_into(minus, x, bins);
        probe.params()[p] = original;
        if (same_pattern(plus, base) && same_pattern(minus, base)) {
          numeric = (target_loss(plus, target) - target_loss(minus, target)) / (2.0 * h);
          ok = true;
          break;
        }
      }
      if (!ok) {
        ++report.skipped;
        continue;
      }
      const double a = analytic[p];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_block = block.name;
      }
    }
  }
  return report;
}

}  // namespace hrtfxai
