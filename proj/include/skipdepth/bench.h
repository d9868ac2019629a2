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

#ifndef SKIPDEPTH_BENCH_H_
#define SKIPDEPTH_BENCH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "skipdepth/engine.h"
#include "skipdepth/model.h"

namespace skipdepth {

struct BenchConfig {
  std::vector<int> batch_sizes = {1, 2, 8};
  std::vector<Strategy> strategies;
  int n_requests = 8;
  int prompt_length = 32;
  int max_new_tokens = 64;
  int warmup_iterations = 1;
  int repetitions = 5;
  int workers = 1;
  uint64_t seed = 0;

  void Validate() const;
};

struct BenchCell {
  std::string strategy;
  int batch_size = 1;
  bool supported = true;
  std::string error;  // construction/run failure; other cells still run
  double tokens_per_second = 0.0;  // median over repetitions
  double tps_min = 0.0;
  double tps_max = 0.0;
  double activated_mean = 0.0;
  double realized_speedup = 0.0;  // NaN without a full-model cell
  std::vector<double> samples;    // tokens/second per repetition

  bool measured() const { return supported && error.empty(); }
};

struct BenchReport {
  std::vector<BenchCell> cells;
  int workers = 1;
  int repetitions = 0;

  const BenchCell* Find(const std::string& strategy, int batch_size) const;
};

// Synthetic fixed-length prompts, identical for every cell.
std::vector<std::vector<int>> BenchPrompts(int n, int length, int vocab_size,
                                           uint64_t seed);

BenchReport RunBenchmark(const BenchConfig& config, const Weights& w);

// tokens/s of `strategy` over tokens/s of "full" at the same batch size.
// Throws NotMeasured when either cell is missing or unsupported.
double RealizedSpeedup(const BenchReport& report, const std::string& strategy,
                       int batch_size);

enum class ReportFormat { kCsv, kMarkdown };

// Columns: strategy, batch_size, tokens_per_second, activated_mean,
// realized_speedup, supported, repetitions, tps_min, tps_max, workers.
// Unsupported cells print N/A in every measured column.
std::string EmitReport(const BenchReport& report, ReportFormat format);

}  // namespace skipdepth

#endif  // SKIPDEPTH_BENCH_H_
