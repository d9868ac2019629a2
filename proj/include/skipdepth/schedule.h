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

#ifndef SKIPDEPTH_SCHEDULE_H_
#define SKIPDEPTH_SCHEDULE_H_

// Layer-retention plans for the skipping strategies and their conversion to
// per-token execution masks.

#include <span>
#include <string>
#include <vector>

#include "skipdepth/trace.h"

namespace skipdepth {

// How the unified plan picks interior layers.
//  kModulo: layer i is a candidate iff i % round(ratio) == 0.
//  kUniformStride: stride = floor(N / (M - 1)) from index 0.
enum class RetentionRule { kModulo, kUniformStride };

// How the layer budget M is derived from N / ratio.
enum class BudgetRounding { kFloor, kRound };

RetentionRule ParseRetentionRule(const std::string& name);
const char* RetentionRuleName(RetentionRule rule);

struct SkipPlan {
  int n_layers = 0;
  double target_ratio = 1.0;
  std::vector<int> retained;  // strictly increasing

  bool Contains(int layer) const;
  // Throws InvalidArgument if the ordering/range invariants do not hold.
  void Validate() const;

  std::string ToJson() const;  // single line
  static SkipPlan FromJson(const std::string& text);

  friend bool operator==(const SkipPlan&, const SkipPlan&) = default;
};

struct PositionalSchedule {
  int max_positions = 1;
  int min_active = 1;
  int max_active = 1;

  void Validate(int n_layers) const;
};

class LayerMask {
 public:
  LayerMask() = default;
  explicit LayerMask(int n_layers, bool value = false)
      : bits_(static_cast<size_t>(n_layers), value) {}

  static LayerMask All(int n_layers) { return LayerMask(n_layers, true); }

  int size() const { return static_cast<int>(bits_.size()); }
  bool operator[](int layer) const { return bits_[static_cast<size_t>(layer)]; }
  void Set(int layer, bool value = true) {
    bits_[static_cast<size_t>(layer)] = value;
  }
  int Popcount() const;
  bool IsFull() const { return Popcount() == size(); }
  std::vector<int> Layers() const;

  friend bool operator==(const LayerMask&, const LayerMask&) = default;

 private:
  std::vector<bool> bits_;
};

SkipPlan FullPlan(int n_layers);

// Evenly spread retention: {0, N-1} plus interior layers chosen by `rule`,
// stopping as soon as the budget is met.
SkipPlan UnifiedRetainedLayers(int n_layers, double ratio,
                               RetentionRule rule = RetentionRule::kModulo,
                               BudgetRounding rounding = BudgetRounding::kFloor);

// Budget M for a ratio; floor(N / r) by default.
int RetainedBudget(int n_layers, double ratio,
                   BudgetRounding rounding = BudgetRounding::kFloor);

SkipPlan TopRetainedLayers(int n_layers, int m);
SkipPlan BottomRetainedLayers(int n_layers, int m);

// Number of active (topmost) layers for the token at `position`.
int SkipDecodeActiveCount(int position, const PositionalSchedule& sched);
LayerMask SkipDecodeMask(int n_layers, int position,
                         const PositionalSchedule& sched);

LayerMask PlanToMask(const SkipPlan& plan);

// Mean executed-layer count over all decode-step records. Prefill excluded.
double MeanActivatedLayers(std::span<const GenerationTrace> traces);

}  // namespace skipdepth

#endif  // SKIPDEPTH_SCHEDULE_H_
