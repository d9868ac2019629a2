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

#include "skipdepth/model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "json.hpp"
#include "kernels.h"
#include "skipdepth/errors.h"

namespace skipdepth {

void ModelConfig::Validate() const {
  if (n_layers < 1 || d_model < 1 || n_heads < 1 || d_ff < 1 ||
      vocab_size < 1) {
    throw InvalidArgument("model config: dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw InvalidArgument("model config: d_model must be divisible by n_heads");
  }
  if (max_seq_len < 2) {
    throw InvalidArgument("model config: max_seq_len must be >= 2");
  }
}

std::string ModelConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["n_layers"] = n_layers;
  j["d_model"] = d_model;
  j["n_heads"] = n_heads;
  j["d_ff"] = d_ff;
  j["vocab_size"] = vocab_size;
  j["max_seq_len"] = max_seq_len;
  j["seed"] = seed;
  return j.dump();
}

ModelConfig ModelConfig::FromJson(const std::string& text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.d_ff = j.value("d_ff", 4 * c.d_model);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("model config JSON: ") + e.what());
  }
  c.Validate();
  return c;
}

// --- Weights layout --------------------------------------------------------

namespace {

size_t EmbeddingSize(const ModelConfig& c) {
  return static_cast<size_t>(c.vocab_size) * c.d_model;
}
size_t PositionSize(const ModelConfig& c) {
  return static_cast<size_t>(c.max_seq_len) * c.d_model;
}
size_t PerLayerSize(const ModelConfig& c) {
  const size_t d = c.d_model;
  const size_t f = c.d_ff;
  return 2 * d + 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d);
}

template <typename T>
LayerTensors<T> BindLayer(std::span<T> base, const ModelConfig& c) {
  const size_t d = c.d_model;
  const size_t f = c.d_ff;
  size_t at = 0;
  auto take = [&](size_t n) {
    auto s = base.subspan(at, n);
    at += n;
    return s;
  };
  LayerTensors<T> t;
  t.ln1_gain = take(d);
  t.ln1_bias = take(d);
  t.wq = take(d * d);
  t.bq = take(d);
  t.wk = take(d * d);
  t.bk = take(d);
  t.wv = take(d * d);
  t.bv = take(d);
  t.wo = take(d * d);
  t.bo = take(d);
  t.ln2_gain = take(d);
  t.ln2_bias = take(d);
  t.w_up = take(d * f);
  t.b_up = take(f);
  t.w_down = take(f * d);
  t.b_down = take(d);
  return t;
}

}  // namespace

Weights::Weights(const ModelConfig& config) : config_(config) {
  config_.Validate();
  data_.assign(EmbeddingSize(config_) + PositionSize(config_) +
                   PerLayerSize(config_) * config_.n_layers +
                   2 * static_cast<size_t>(config_.d_model),
               0.0f);
}

size_t Weights::LayerOffset(int l) const {
  return EmbeddingSize(config_) + PositionSize(config_) +
         PerLayerSize(config_) * static_cast<size_t>(l);
}
size_t Weights::LayerSize() const { return PerLayerSize(config_); }

std::span<const float> Weights::token_embedding() const {
  return std::span<const float>(data_).first(EmbeddingSize(config_));
}
std::span<float> Weights::token_embedding() {
  return std::span<float>(data_).first(EmbeddingSize(config_));
}
std::span<const float> Weights::position_embedding() const {
  return std::span<const float>(data_).subspan(EmbeddingSize(config_),
                                               PositionSize(config_));
}
std::span<float> Weights::position_embedding() {
  return std::span<float>(data_).subspan(EmbeddingSize(config_),
                                         PositionSize(config_));
}
LayerTensors<const float> Weights::layer(int l) const {
  return BindLayer(
      std::span<const float>(data_).subspan(LayerOffset(l), LayerSize()),
      config_);
}
LayerTensors<float> Weights::layer(int l) {
  return BindLayer(std::span<float>(data_).subspan(LayerOffset(l), LayerSize()),
                   config_);
}
std::span<const float> Weights::final_norm_gain() const {
  return std::span<const float>(data_).subspan(LayerOffset(config_.n_layers),
                                               config_.d_model);
}
std::span<float> Weights::final_norm_gain() {
  return std::span<float>(data_).subspan(LayerOffset(config_.n_layers),
                                         config_.d_model);
}
std::span<const float> Weights::final_norm_bias() const {
  return std::span<const float>(data_).subspan(
      LayerOffset(config_.n_layers) + config_.d_model, config_.d_model);
}
std::span<float> Weights::final_norm_bias() {
  return std::span<float>(data_).subspan(
      LayerOffset(config_.n_layers) + config_.d_model, config_.d_model);
}

Weights InitWeights(const ModelConfig& config) {
  Weights w(config);
  std::mt19937_64 rng(config.seed);
  // Uniform on [-a, a] has std a / sqrt(3).
  const float a = 0.02f * std::sqrt(3.0f);
  auto fill = [&](std::span<float> t) {
    for (float& v : t) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = static_cast<float>((2.0 * u - 1.0) * a);
    }
  };
  auto ones = [](std::span<float> t) { std::fill(t.begin(), t.end(), 1.0f); };

  fill(w.token_embedding());
  fill(w.position_embedding());
  for (int l = 0; l < config.n_layers; ++l) {
    auto t = w.layer(l);
    ones(t.ln1_gain);
    ones(t.ln2_gain);
    fill(t.wq);
    fill(t.wk);
    fill(t.wv);
    fill(t.wo);
    fill(t.w_up);
    fill(t.w_down);
  }
  ones(w.final_norm_gain());
  return w;
}

// --- KV cache ---------------------------------------------------------------

KVCache::KVCache(int n_layers, int capacity, int d_model)
    : n_layers_(n_layers),
      capacity_(capacity),
      d_model_(d_model),
      keys_(static_cast<size_t>(n_layers) * capacity * d_model),
      values_(keys_.size()),
      valid_(static_cast<size_t>(n_layers) * capacity),
      pad_(static_cast<size_t>(capacity)) {}

std::span<float> KVCache::Key(int layer, int slot) {
  return {keys_.data() + Offset(layer, slot), static_cast<size_t>(d_model_)};
}
std::span<const float> KVCache::Key(int layer, int slot) const {
  return {keys_.data() + Offset(layer, slot), static_cast<size_t>(d_model_)};
}
std::span<float> KVCache::Value(int layer, int slot) {
  return {values_.data() + Offset(layer, slot), static_cast<size_t>(d_model_)};
}
std::span<const float> KVCache::Value(int layer, int slot) const {
  return {values_.data() + Offset(layer, slot), static_cast<size_t>(d_model_)};
}

std::vector<int> KVCache::LayersAt(int slot) const {
  std::vector<int> out;
  for (int l = 0; l < n_layers_; ++l) {
    if (Has(l, slot)) out.push_back(l);
  }
  return out;
}

int KVCache::EntryCount() const {
  return static_cast<int>(std::count(valid_.begin(), valid_.end(), 1));
}

// --- Forward ----------------------------------------------------------------

void Embed(const Weights& w, int token, int position, std::span<float> out) {
  const auto& c = w.config();
  if (position < 0 || position >= c.max_seq_len) {
    throw SequenceOverflow("position " + std::to_string(position) +
                           " exceeds max_seq_len " +
                           std::to_string(c.max_seq_len));
  }
  if (token < 0 || token >= c.vocab_size) {
    throw InvalidArgument("token id out of range: " + std::to_string(token));
  }
  const size_t d = c.d_model;
  const float* te = w.token_embedding().data() + static_cast<size_t>(token) * d;
  const float* pe =
      w.position_embedding().data() + static_cast<size_t>(position) * d;
  for (size_t i = 0; i < d; ++i) out[i] = te[i] + pe[i];
}

void LayerForward(const Weights& w, int layer, std::span<const RowRef> rows) {
  if (rows.empty()) return;
  const auto& c = w.config();
  if (layer < 0 || layer >= c.n_layers) {
    throw InvalidArgument("layer index out of range");
  }
  const int d = c.d_model;
  const int f = c.d_ff;
  const int hd = c.head_dim();
  const int n = static_cast<int>(rows.size());
  const auto t = w.layer(layer);
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

  std::vector<float> x(static_cast<size_t>(n) * d);
  std::vector<float> q(x.size()), k(x.size()), v(x.size()), att(x.size());
  std::vector<float> proj(x.size());

  for (int r = 0; r < n; ++r) {
    kernels::LayerNormRow(rows[r].hidden, d, t.ln1_gain.data(),
                          t.ln1_bias.data(), &x[static_cast<size_t>(r) * d],
                          nullptr);
  }
  kernels::MatMulBias(x.data(), n, d, t.wq.data(), t.bq.data(), d, q.data());
  kernels::MatMulBias(x.data(), n, d, t.wk.data(), t.bk.data(), d, k.data());
  kernels::MatMulBias(x.data(), n, d, t.wv.data(), t.bv.data(), d, v.data());

  for (int r = 0; r < n; ++r) {
    KVCache& cache = *rows[r].cache;
    const int slot = rows[r].slot;
    if (slot < 0 || slot >= cache.capacity()) {
      throw SequenceOverflow("cache slot out of range");
    }
    std::copy_n(&k[static_cast<size_t>(r) * d], d,
                cache.Key(layer, slot).begin());
    std::copy_n(&v[static_cast<size_t>(r) * d], d,
                cache.Value(layer, slot).begin());
    cache.MarkValid(layer, slot);
  }

  std::vector<int> visible;
  std::vector<float> scores;
  for (int r = 0; r < n; ++r) {
    const KVCache& cache = *rows[r].cache;
    const int slot = rows[r].slot;
    visible.clear();
    for (int s = 0; s <= slot; ++s) {
      if (!cache.IsPad(s) && cache.Has(layer, s)) visible.push_back(s);
    }
    scores.resize(visible.size());
    float* out = &att[static_cast<size_t>(r) * d];
    std::fill_n(out, d, 0.0f);
    for (int h = 0; h < c.n_heads; ++h) {
      const float* qh = &q[static_cast<size_t>(r) * d + h * hd];
      float max_score = -std::numeric_limits<float>::infinity();
      for (size_t j = 0; j < visible.size(); ++j) {
        const float* kh = cache.Key(layer, visible[j]).data() + h * hd;
        float dot = 0.0f;
        for (int i = 0; i < hd; ++i) dot += qh[i] * kh[i];
        scores[j] = dot * scale;
        max_score = std::max(max_score, scores[j]);
      }
      float denom = 0.0f;
      for (float& s : scores) {
        s = std::exp(s - max_score);
        denom += s;
      }
      float* oh = out + h * hd;
      for (size_t j = 0; j < visible.size(); ++j) {
        const float p = scores[j] / denom;
        const float* vh = cache.Value(layer, visible[j]).data() + h * hd;
        for (int i = 0; i < hd; ++i) oh[i] += p * vh[i];
      }
    }
  }

  kernels::MatMulBias(att.data(), n, d, t.wo.data(), t.bo.data(), d,
                      proj.data());
  for (int r = 0; r < n; ++r) {
    float* h = rows[r].hidden;
    for (int i = 0; i < d; ++i) h[i] += proj[static_cast<size_t>(r) * d + i];
    kernels::LayerNormRow(h, d, t.ln2_gain.data(), t.ln2_bias.data(),
                          &x[static_cast<size_t>(r) * d], nullptr);
  }

  std::vector<float> up(static_cast<size_t>(n) * f);
  kernels::MatMulBias(x.data(), n, d, t.w_up.data(), t.b_up.data(), f,
                      up.data());
  for (float& u : up) u = kernels::Gelu(u);
  kernels::MatMulBias(up.data(), n, f, t.w_down.data(), t.b_down.data(), d,
                      proj.data());
  for (int r = 0; r < n; ++r) {
    float* h = rows[r].hidden;
    for (int i = 0; i < d; ++i) h[i] += proj[static_cast<size_t>(r) * d + i];
  }
}

void LayerForward(const Weights& w, int layer, HiddenState& h, KVCache& cache,
                  std::span<const int> slots) {
  if (static_cast<int>(slots.size()) != h.rows) {
    throw InvalidArgument("one slot per hidden row required");
  }
  std::vector<RowRef> rows;
  rows.reserve(slots.size());
  for (int r = 0; r < h.rows; ++r) {
    rows.push_back({h.row(r).data(), &cache, slots[static_cast<size_t>(r)]});
  }
  LayerForward(w, layer, rows);
}

Logits ForwardMasked(const Weights& w, std::span<const int> tokens,
                     std::span<const LayerMask> masks, KVCache* cache_out) {
  const auto& c = w.config();
  if (tokens.size() != masks.size()) {
    throw InvalidArgument("need one mask per token");
  }
  for (const auto& m : masks) {
    if (m.size() != c.n_layers) {
      throw InvalidArgument("mask length must equal n_layers");
    }
  }
  const int len = static_cast<int>(tokens.size());
  if (len > c.max_seq_len) throw SequenceOverflow("sequence too long");

  HiddenState h(len, c.d_model);
  for (int t = 0; t < len; ++t) Embed(w, tokens[t], t, h.row(t));

  KVCache cache(c.n_layers, std::max(len, 1), c.d_model);
  std::vector<RowRef> rows;
  for (int l = 0; l < c.n_layers; ++l) {
    rows.clear();
    for (int t = 0; t < len; ++t) {
      if (masks[t][l]) rows.push_back({h.row(t).data(), &cache, t});
    }
    LayerForward(w, l, rows);
  }
  if (cache_out) *cache_out = std::move(cache);
  return LmHead(w, h);
}

void LmHeadRow(const Weights& w, std::span<const float> h,
               std::span<float> logits) {
  const auto& c = w.config();
  const int d = c.d_model;
  std::vector<float> x(static_cast<size_t>(d));
  kernels::LayerNormRow(h.data(), d, w.final_norm_gain().data(),
                        w.final_norm_bias().data(), x.data(), nullptr);
  const float* emb = w.token_embedding().data();
  for (int v = 0; v < c.vocab_size; ++v) {
    const float* e = emb + static_cast<size_t>(v) * d;
    float dot = 0.0f;
    for (int i = 0; i < d; ++i) dot += x[i] * e[i];
    logits[v] = dot;
  }
}

Logits LmHead(const Weights& w, const HiddenState& h) {
  Logits out(h.rows, w.config().vocab_size);
  for (int r = 0; r < h.rows; ++r) LmHeadRow(w, h.row(r), out.row(r));
  return out;
}

double Confidence(std::span<const float> logits) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (float z : logits) denom += std::exp(z - max_logit);
  return 1.0 / denom;
}

void LogSoftmax(std::span<const float> logits, std::span<double> out) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (float z : logits) denom += std::exp(z - max_logit);
  const double log_denom = std::log(denom);
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = (logits[i] - max_logit) - log_denom;
  }
}

}  // namespace skipdepth
