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

#ifndef SKIPDEPTH_ENGINE_H_
#define SKIPDEPTH_ENGINE_H_

// Autoregressive decoding with a KV cache. The prompt always runs at full
// depth; response tokens follow the configured strategy.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skipdepth/kv_cache.h"
#include "skipdepth/model.h"
#include "skipdepth/schedule.h"
#include "skipdepth/trace.h"

namespace skipdepth {

enum class StrategyKind {
  kFull,
  kUnified,
  kSkipTop,
  kSkipBottom,
  kSkipDecode,
  kEarlyExit,
};

struct Strategy {
  StrategyKind kind = StrategyKind::kFull;
  double ratio = 1.0;  // unified
  RetentionRule rule = RetentionRule::kModulo;
  int keep = 0;        // skip-top / skip-bottom: layers retained
  PositionalSchedule schedule;  // skipdecode
  double threshold = 1.0;       // early exit

  static Strategy Full() { return {}; }
  static Strategy Unified(double ratio,
                          RetentionRule rule = RetentionRule::kModulo);
  static Strategy SkipTop(int keep);
  static Strategy SkipBottom(int keep);
  static Strategy SkipDecode(PositionalSchedule schedule);
  static Strategy EarlyExit(double threshold);

  // Accepts "full", "unified:R", "unified:R:uniform-stride", "skip-top:M",
  // "skip-bottom:M", "skipdecode", "skipdecode:MIN:MAX:POSITIONS",
  // "early-exit:THRESHOLD". A bare "skipdecode" decays from n_layers to one
  // layer over 128 positions.
  static Strategy Parse(const std::string& text, int n_layers);
  std::string Name() const;

  // Same layers for every input at a given response position.
  bool InputIndependent() const { return kind != StrategyKind::kEarlyExit; }
  // Fixed plan for full/unified/skip-top/skip-bottom; nullopt otherwise.
  std::optional<SkipPlan> Plan(int n_layers) const;
  // Mask for the decode step on response token `response_index` (0-based).
  // Not defined for early exit.
  LayerMask MaskAt(int n_layers, int response_index) const;

  void Validate(int n_layers) const;

  friend bool operator==(const Strategy& a, const Strategy& b);
};

struct DecodeConfig {
  Strategy strategy;
  int beam_size = 1;  // 1 = greedy
  int max_new_tokens = 32;
  int eos_token = -1;  // < 0 disables

  void Validate(int n_layers) const;
};

// Cache plus the bookkeeping needed to resume early-exited tokens. Slots
// [0, pad) are left padding; slot s holds position s - pad.
struct DecodeState {
  DecodeState() = default;
  DecodeState(const ModelConfig& config, int capacity, int pad = 0);

  KVCache cache;
  int pad = 0;
  int length = 0;         // slots in use, including padding
  int prompt_length = 0;  // real prompt tokens
  // Early exit: layers completed per slot and the residual stream there.
  std::vector<int> depth;
  std::vector<float> resume;

  int next_position() const { return length - pad; }
};

// Full-depth pass over the prompts of every state (each state may carry its
// own left padding). Returns the last prompt position's logits per state and
// appends the prompt's executed layers to `traces` when provided.
std::vector<std::vector<float>> PrefillBatch(
    const Weights& w, std::span<DecodeState* const> states,
    std::span<const std::vector<int>> prompts,
    std::span<GenerationTrace* const> traces = {});
std::vector<float> Prefill(const Weights& w, std::span<const int> prompt,
                           DecodeState& state,
                           GenerationTrace* trace = nullptr);

struct StepOutput {
  std::vector<float> logits;
  TokenRecord record;
};

// One token per state, all under the same mask. Each executed layer requires
// every earlier non-pad slot to already hold an entry at that layer;
// otherwise ConsistencyError.
std::vector<StepOutput> DecodeStepBatch(const Weights& w,
                                        std::span<DecodeState* const> states,
                                        std::span<const int> tokens,
                                        const LayerMask& mask);
StepOutput DecodeStep(const Weights& w, DecodeState& state, int token,
                      const LayerMask& mask);

struct ExitOutput {
  std::vector<float> logits;
  int exit_layer = 0;
  TokenRecord record;  // executed = 0..exit_layer; recomputed_layers counted
};

// Runs layers bottom-up, evaluating the shared LM head after each, and stops
// at the first layer whose confidence reaches `threshold` (or the top).
// Earlier tokens that exited below a layer this token needs get their missing
// layers recomputed first. Threshold 0 is clamped to the smallest positive
// value; thresholds outside [0, 1] are rejected.
ExitOutput EarlyExitStep(const Weights& w, DecodeState& state, int token,
                         double threshold);

struct GenerationRequest {
  std::vector<int> prompt;
  std::optional<Strategy> strategy;  // must match the batch config if set
};

struct Generation {
  std::vector<int> tokens;
  GenerationTrace trace;
};

// Greedy when beam_size is 1, beam search otherwise.
Generation Generate(const Weights& w, std::span<const int> prompt,
                    const DecodeConfig& config);

// Beam search at any width, including 1. Hypotheses are ranked by summed
// log-probability; finished ones by the length-normalized score. Ties go to
// the lower parent index, then the lower token id.
Generation BeamSearch(const Weights& w, std::span<const int> prompt,
                      const DecodeConfig& config);

// Greedy decoding of several requests in lockstep with left padding. Output
// per request matches Generate on it alone.
std::vector<Generation> BatchGenerate(
    const Weights& w, std::span<const GenerationRequest> requests,
    const DecodeConfig& config);

// Greedy argmax; ties go to the lowest token id.
int Argmax(std::span<const float> logits);

// Counts prompt tokens seen by prefill or training and how many of them ran
// fewer than all layers.
struct PromptDepthAudit {
  uint64_t prompt_tokens = 0;
  uint64_t violations = 0;
};
PromptDepthAudit PromptAuditSnapshot();
void ResetPromptAudit();
void RecordPromptDepth(int executed_layers, int n_layers);

}  // namespace skipdepth

#endif  // SKIPDEPTH_ENGINE_H_
