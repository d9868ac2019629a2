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

#include "skipdepth/schedule.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "skipdepth/errors.h"

namespace skipdepth {

RetentionRule ParseRetentionRule(const std::string& name) {
  if (name == "modulo") return RetentionRule::kModulo;
  if (name == "uniform-stride") return RetentionRule::kUniformStride;
  throw InvalidArgument("unknown retention rule: " + name);
}

const char* RetentionRuleName(RetentionRule rule) {
  return rule == RetentionRule::kModulo ? "modulo" : "uniform-stride";
}

bool SkipPlan::Contains(int layer) const {
  return std::binary_search(retained.begin(), retained.end(), layer);
}

void SkipPlan::Validate() const {
  if (n_layers < 1) throw InvalidArgument("plan: n_layers must be positive");
  if (!(target_ratio > 0.0)) {
    throw InvalidArgument("plan: target_ratio must be positive");
  }
  if (retained.empty()) throw InvalidArgument("plan: retained is empty");
  for (size_t i = 0; i < retained.size(); ++i) {
    if (retained[i] < 0 || retained[i] >= n_layers) {
      throw InvalidArgument("plan: layer index out of range");
    }
    if (i > 0 && retained[i] <= retained[i - 1]) {
      throw InvalidArgument("plan: retained must be strictly increasing");
    }
  }
}

std::string SkipPlan::ToJson() const {
  nlohmann::ordered_json j;
  j["n_layers"] = n_layers;
  j["target_ratio"] = target_ratio;
  j["retained"] = retained;
  return j.dump();
}

SkipPlan SkipPlan::FromJson(const std::string& text) {
  SkipPlan plan;
  try {
    const auto j = nlohmann::json::parse(text);
    plan.n_layers = j.at("n_layers").get<int>();
    plan.target_ratio = j.at("target_ratio").get<double>();
    plan.retained = j.at("retained").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("plan JSON: ") + e.what());
  }
  plan.Validate();
  return plan;
}

void PositionalSchedule::Validate(int n_layers) const {
  if (max_positions < 1 || min_active < 1 || max_active < min_active ||
      max_active > n_layers) {
    throw InvalidArgument(
        "skipdecode schedule needs 1 <= min_active <= max_active <= n_layers "
        "and max_positions >= 1");
  }
}

int LayerMask::Popcount() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.end(), true));
}

std::vector<int> LayerMask::Layers() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (bits_[static_cast<size_t>(i)]) out.push_back(i);
  }
  return out;
}

SkipPlan FullPlan(int n_layers) {
  if (n_layers < 1) throw InvalidArgument("n_layers must be positive");
  SkipPlan plan{n_layers, 1.0, {}};
  for (int i = 0; i < n_layers; ++i) plan.retained.push_back(i);
  return plan;
}

int RetainedBudget(int n_layers, double ratio, BudgetRounding rounding) {
  const double exact = static_cast<double>(n_layers) / ratio;
  return rounding == BudgetRounding::kFloor
             ? static_cast<int>(std::floor(exact))
             : static_cast<int>(std::lround(exact));
}

SkipPlan UnifiedRetainedLayers(int n_layers, double ratio, RetentionRule rule,
                               BudgetRounding rounding) {
  if (n_layers < 2) throw InvalidArgument("unified plan needs n_layers >= 2");
  if (!(ratio >= 1.0) || ratio > n_layers) {
    throw InvalidArgument("unified plan needs 1 <= ratio <= n_layers");
  }
  if (ratio == 1.0) return FullPlan(n_layers);

  const int budget = std::min(RetainedBudget(n_layers, ratio, rounding), n_layers);
  if (budget < 2) return SkipPlan{n_layers, ratio, {n_layers - 1}};

  std::set<int> kept{0, n_layers - 1};
  int stride = rule == RetentionRule::kModulo
                   ? static_cast<int>(std::lround(ratio))
                   : n_layers / (budget - 1);
  stride = std::max(stride, 1);
  // A single ascending pass can come up short for fractional ratios; retry
  // with a finer stride until the budget is met (stride 1 always fills it).
  for (; static_cast<int>(kept.size()) < budget && stride >= 1; --stride) {
    for (int i = 1; i <= n_layers - 2; ++i) {
      if (static_cast<int>(kept.size()) == budget) break;
      if (i % stride == 0) kept.insert(i);
    }
  }
  return SkipPlan{n_layers, ratio, {kept.begin(), kept.end()}};
}

SkipPlan TopRetainedLayers(int n_layers, int m) {
  if (m < 1 || m > n_layers) {
    throw InvalidArgument("skip-top needs 1 <= m <= n_layers");
  }
  SkipPlan plan{n_layers, static_cast<double>(n_layers) / m, {}};
  for (int i = 0; i < m; ++i) plan.retained.push_back(i);
  return plan;
}

SkipPlan BottomRetainedLayers(int n_layers, int m) {
  if (m < 1 || m > n_layers) {
    throw InvalidArgument("skip-bottom needs 1 <= m <= n_layers");
  }
  SkipPlan plan{n_layers, static_cast<double>(n_layers) / m, {}};
  for (int i = n_layers - m; i < n_layers; ++i) plan.retained.push_back(i);
  return plan;
}

int SkipDecodeActiveCount(int position, const PositionalSchedule& sched) {
  if (position < 0) throw InvalidArgument("position must be non-negative");
  const double progress =
      static_cast<double>(std::min(position, sched.max_positions)) /
      sched.max_positions;
  const double span = sched.max_active - sched.min_active;
  return static_cast<int>(std::lround(sched.max_active - span * progress));
}

LayerMask SkipDecodeMask(int n_layers, int position,
                         const PositionalSchedule& sched) {
  const int count = std::min(SkipDecodeActiveCount(position, sched), n_layers);
  LayerMask mask(n_layers);
  for (int i = n_layers - count; i < n_layers; ++i) mask.Set(i);
  return mask;
}

LayerMask PlanToMask(const SkipPlan& plan) {
  LayerMask mask(plan.n_layers);
  for (int layer : plan.retained) mask.Set(layer);
  return mask;
}

double MeanActivatedLayers(std::span<const GenerationTrace> traces) {
  if (traces.empty()) throw InvalidArgument("no traces");
  double sum = 0.0;
  size_t count = 0;
  for (const auto& trace : traces) {
    for (const auto& rec : trace.tokens) {
      sum += static_cast<double>(rec.executed.size());
      ++count;
    }
  }
  if (count == 0) throw InvalidArgument("traces hold no response tokens");
  return sum / static_cast<double>(count);
}

}  // namespace skipdepth
