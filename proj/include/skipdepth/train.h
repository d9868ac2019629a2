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

#ifndef SKIPDEPTH_TRAIN_H_
#define SKIPDEPTH_TRAIN_H_

// Response-only cross-entropy fine-tuning with masked depth. Prompt positions
// always run every layer; response positions run the plan's layers.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skipdepth/corpus.h"
#include "skipdepth/model.h"
#include "skipdepth/schedule.h"

namespace skipdepth {

struct TrainConfig {
  double learning_rate = 3e-4;
  int epochs = 1;
  double warmup_fraction = 0.03;
  int batch_size = 8;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
  // LayerDrop: each layer is dropped per example with this probability.
  double layerdrop_rate = 0.0;
  // Keep prompt positions at full depth even when LayerDrop is active.
  bool deep_encoding = true;
  // Weight of the mean intermediate-exit cross-entropy (early-exit heads).
  double exit_aux_weight = 0.0;
  std::optional<SkipPlan> plan;  // none = full depth
  uint64_t seed = 0;

  void Validate(int n_layers) const;
};

// Per-position masks over Example::InputTokens(): full for the prompt,
// `plan` (or full) for response positions.
std::vector<LayerMask> TrainingMasks(const Example& ex,
                                     const std::optional<SkipPlan>& plan,
                                     int n_layers);

struct LossValue {
  double sum = 0.0;    // -sum log p(y_i | ...)
  int tokens = 0;
  bool clamped = false;  // some log-probability underflowed and was clamped
  double mean() const { return tokens ? sum / tokens : 0.0; }
};

inline constexpr double kMinLogProb = -1e9;

// Response positions only. `logits` rows cover Example::InputTokens() (a
// trailing extra row is ignored).
LossValue CrossEntropyLoss(const Logits& logits, const Example& ex);

// Loss of one example under `masks` and, when `grads` is non-null, its exact
// gradient accumulated into `grads` (a Weights-shaped buffer).
LossValue ComputeGradients(const Weights& w, const Example& ex,
                           std::span<const LayerMask> masks, Weights* grads,
                           double exit_aux_weight = 0.0);

// Mean per-token response loss over a corpus under `plan`.
double HeldOutLoss(const Weights& w, std::span<const Example> corpus,
                   const std::optional<SkipPlan>& plan);

struct TrainResult {
  Weights weights;
  double initial_loss = 0.0;  // held-out, before training
  double heldout_loss = 0.0;  // held-out, after training
  std::vector<double> epoch_losses;  // training mean per epoch
};

// Adam (0.9, 0.999, 1e-8) with linear warmup. Deterministic in
// (corpus order, config, seed). Throws TrainingDiverged on a NaN loss.
TrainResult Finetune(const Weights& init, std::span<const Example> train,
                     std::span<const Example> heldout,
                     const TrainConfig& config);

struct GreedySearchResult {
  SkipPlan plan;
  std::vector<int> removed;    // in removal order
  std::vector<double> losses;  // held-out loss after each removal
  int evaluations = 0;
};

// Repeatedly removes the layer whose absence raises held-out loss the least.
// Layers 0 and N-1 are kept while the budget allows; ties remove the higher
// index.
GreedySearchResult GreedyLayerSearch(const Weights& w,
                                     std::span<const Example> heldout,
                                     int target_m);

struct LossRow {
  std::string strategy;
  double ratio = 1.0;
  double loss = 0.0;
  SkipPlan plan;
};

struct LossReport {
  std::vector<LossRow> rows;

  double Loss(const std::string& strategy, double ratio) const;
  std::string ToCsv() const;  // header: strategy,ratio,loss
};

// Fine-tunes `base` once per (ratio, strategy) with identical seeds and
// reports held-out loss under that strategy's plan. Strategies: skip-top,
// skip-bottom, unified, greedy.
LossReport StrategyLossSweep(const Weights& base,
                             std::span<const Example> train,
                             std::span<const Example> heldout,
                             std::span<const double> ratios,
                             const TrainConfig& config);

}  // namespace skipdepth

#endif  // SKIPDEPTH_TRAIN_H_
