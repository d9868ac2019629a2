// Copyright 2026 The skipdepth Authors
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

#ifndef SKIPDEPTH_MODEL_H_
#define SKIPDEPTH_MODEL_H_

// Toy decoder-only transformer: learned absolute positions, pre-norm blocks
// (attention + GELU MLP), final layer norm and an LM head tied to the token
// embedding. Every forward entry point takes a per-token layer mask; a
// skipped layer leaves the residual stream untouched and writes no KV.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skipdepth/kv_cache.h"
#include "skipdepth/schedule.h"

namespace skipdepth {

struct ModelConfig {
  int n_layers = 8;
  int d_model = 64;
  int n_heads = 4;
  int d_ff = 256;
  int vocab_size = 256;
  int max_seq_len = 128;
  uint64_t seed = 0;

  int head_dim() const { return d_model / n_heads; }
  void Validate() const;

  std::string ToJson() const;
  static ModelConfig FromJson(const std::string& text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Row-major float matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c) {}

  std::span<float> row(int r) {
    return {data.data() + static_cast<size_t>(r) * cols,
            static_cast<size_t>(cols)};
  }
  std::span<const float> row(int r) const {
    return {data.data() + static_cast<size_t>(r) * cols,
            static_cast<size_t>(cols)};
  }
};

using HiddenState = Matrix;  // [sequence x d_model]
using Logits = Matrix;       // [sequence x vocab_size]

template <typename T>
struct LayerTensors {
  std::span<T> ln1_gain, ln1_bias;
  std::span<T> wq, bq, wk, bk, wv, bv, wo, bo;  // [d x d], [d]
  std::span<T> ln2_gain, ln2_bias;
  std::span<T> w_up, b_up;      // [d x d_ff], [d_ff]
  std::span<T> w_down, b_down;  // [d_ff x d], [d]
};

// All parameters in one flat buffer. Tensor order (also the on-disk order):
//   token_embedding [V x d], position_embedding [T x d],
//   per layer: ln1_gain, ln1_bias, wq, bq, wk, bk, wv, bv, wo, bo,
//              ln2_gain, ln2_bias, w_up, b_up, w_down, b_down,
//   final_norm_gain, final_norm_bias.
// Projections are stored [in x out] and applied as y = x W + b.
// The same shape doubles as a gradient buffer.
class Weights {
 public:
  Weights() = default;
  explicit Weights(const ModelConfig& config);  // zero-filled

  const ModelConfig& config() const { return config_; }
  size_t size() const { return data_.size(); }
  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  std::span<const float> token_embedding() const;
  std::span<float> token_embedding();
  std::span<const float> position_embedding() const;
  std::span<float> position_embedding();
  LayerTensors<const float> layer(int l) const;
  LayerTensors<float> layer(int l);
  std::span<const float> final_norm_gain() const;
  std::span<float> final_norm_gain();
  std::span<const float> final_norm_bias() const;
  std::span<float> final_norm_bias();

  // Offset of layer l's parameters and their count, for tests that probe or
  // zero a single block.
  size_t LayerOffset(int l) const;
  size_t LayerSize() const;

  friend bool operator==(const Weights&, const Weights&) = default;

 private:
  ModelConfig config_;
  std::vector<float> data_;
};

// Deterministic in config.seed; uniform with std 0.02, unit norm gains.
Weights InitWeights(const ModelConfig& config);

// Token + position embedding into `out`.
void Embed(const Weights& w, int token, int position, std::span<float> out);

// One row of a layer invocation: a hidden vector updated in place, the cache
// that holds its sequence, and the slot it occupies there.
struct RowRef {
  float* hidden;
  KVCache* cache;
  int slot;
};

// Runs block `layer` on every row. All rows first write their K/V at
// (layer, slot); each row then attends over the valid, non-pad slots
// <= its own slot in its own cache.
void LayerForward(const Weights& w, int layer, std::span<const RowRef> rows);

// Convenience form: rows of `h` occupy `slots` of one cache.
void LayerForward(const Weights& w, int layer, HiddenState& h, KVCache& cache,
                  std::span<const int> slots);

// Full sequence forward under per-token masks; logits at every position.
// When `cache_out` is set it receives the KV entries the pass wrote.
Logits ForwardMasked(const Weights& w, std::span<const int> tokens,
                     std::span<const LayerMask> masks,
                     KVCache* cache_out = nullptr);

// Final layer norm then projection onto the tied embedding.
Logits LmHead(const Weights& w, const HiddenState& h);
void LmHeadRow(const Weights& w, std::span<const float> h,
               std::span<float> logits);

// Max softmax probability of a logits row.
double Confidence(std::span<const float> logits);
void LogSoftmax(std::span<const float> logits, std::span<double> out);

}  // namespace skipdepth

#endif  // SKIPDEPTH_MODEL_H_
