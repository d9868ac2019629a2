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

#include "skipdepth/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "skipdepth/errors.h"
#include "skipdepth/schedule.h"

namespace skipdepth {

void BenchConfig::Validate() const {
  if (batch_sizes.empty() || strategies.empty()) {
    throw InvalidArgument("bench needs batch sizes and strategies");
  }
  for (int b : batch_sizes) {
    if (b < 1) throw InvalidArgument("batch sizes must be positive");
  }
  if (n_requests < 1 || prompt_length < 1 || max_new_tokens < 1 ||
      warmup_iterations < 0 || workers < 1) {
    throw InvalidArgument("bench sizes must be positive");
  }
  if (repetitions < 3) {
    throw InvalidArgument("bench needs at least 3 repetitions for a median");
  }
}

const BenchCell* BenchReport::Find(const std::string& strategy,
                                   int batch_size) const {
  for (const auto& cell : cells) {
    if (cell.strategy == strategy && cell.batch_size == batch_size) return &cell;
  }
  return nullptr;
}

std::vector<std::vector<int>> BenchPrompts(int n, int length, int vocab_size,
                                           uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> prompts(static_cast<size_t>(n));
  for (auto& p : prompts) {
    for (int i = 0; i < length; ++i) {
      p.push_back(static_cast<int>(rng() % static_cast<uint64_t>(vocab_size)));
    }
  }
  return prompts;
}

namespace {

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

GenerationTrace RunOne(const Weights& w, const std::vector<int>& prompt,
                       const DecodeConfig& decode, size_t* generated) {
  Generation g = Generate(w, prompt, decode);
  *generated += g.tokens.size();
  return std::move(g.trace);
}

// Runs the whole request set once; returns generated tokens and the traces in
// request order. Batches are dealt round-robin to `workers` threads.
size_t RunWorkload(const Weights& w, const std::vector<std::vector<int>>& prompts,
                   const DecodeConfig& decode, int batch_size, int workers,
                   std::vector<GenerationTrace>* traces) {
  const size_t n_batches =
      (prompts.size() + static_cast<size_t>(batch_size) - 1) / batch_size;
  std::vector<GenerationTrace> out(prompts.size());
  std::vector<size_t> generated(static_cast<size_t>(workers), 0);
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));

  auto work = [&](int id) {
    try {
      for (size_t b = static_cast<size_t>(id); b < n_batches;
           b += static_cast<size_t>(workers)) {
        const size_t start = b * static_cast<size_t>(batch_size);
        const size_t end =
            std::min(prompts.size(), start + static_cast<size_t>(batch_size));
        size_t& count = generated[static_cast<size_t>(id)];
        if (!decode.strategy.InputIndependent()) {
          for (size_t i = start; i < end; ++i) {
            out[i] = RunOne(w, prompts[i], decode, &count);
          }
          continue;
        }
        std::vector<GenerationRequest> batch;
        for (size_t i = start; i < end; ++i) batch.push_back({prompts[i], {}});
        auto gens = BatchGenerate(w, batch, decode);
        for (size_t i = start; i < end; ++i) {
          count += gens[i - start].tokens.size();
          out[i] = std::move(gens[i - start].trace);
        }
      }
    } catch (...) {
      errors[static_cast<size_t>(id)] = std::current_exception();
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (int id = 0; id < workers; ++id) threads.emplace_back(work, id);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (traces) *traces = std::move(out);
  size_t total = 0;
  for (size_t g : generated) total += g;
  return total;
}

}  // namespace

BenchReport RunBenchmark(const BenchConfig& config, const Weights& w) {
  config.Validate();
  const auto& c = w.config();
  const auto prompts = BenchPrompts(config.n_requests, config.prompt_length,
                                    c.vocab_size, config.seed);
  BenchReport report;
  report.workers = config.workers;
  report.repetitions = config.repetitions;

  for (const Strategy& strategy : config.strategies) {
    for (int batch : config.batch_sizes) {
      BenchCell cell;
      cell.strategy = strategy.Name();
      cell.batch_size = batch;
      if (!strategy.InputIndependent() && batch > 1) {
        cell.supported = false;
        report.cells.push_back(std::move(cell));
        continue;
      }
      try {
        DecodeConfig decode;
        decode.strategy = strategy;
        decode.max_new_tokens = config.max_new_tokens;
        decode.Validate(c.n_layers);
        for (int i = 0; i < config.warmup_iterations; ++i) {
          RunWorkload(w, prompts, decode, batch, config.workers, nullptr);
        }
        std::vector<GenerationTrace> traces;
        for (int rep = 0; rep < config.repetitions; ++rep) {
          const auto start = std::chrono::steady_clock::now();
          const size_t tokens = RunWorkload(w, prompts, decode, batch, config.workers, &traces);
          const double secs = std::chrono::duration<double>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
          cell.samples.push_back(static_cast<double>(tokens) /
                                 std::max(secs, 1e-12));
        }
        cell.tokens_per_second = Median(cell.samples);
        cell.tps_min = *std::min_element(cell.samples.begin(), cell.samples.end());
        cell.tps_max = *std::max_element(cell.samples.begin(), cell.samples.end());
        cell.activated_mean = MeanActivatedLayers(traces);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      report.cells.push_back(std::move(cell));
    }
  }

  const std::string full = Strategy::Full().Name();
  for (auto& cell : report.cells) {
    const BenchCell* base = report.Find(full, cell.batch_size);
    cell.realized_speedup =
        cell.measured() && base && base->measured()
            ? cell.tokens_per_second / base->tokens_per_second
            : std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

double RealizedSpeedup(const BenchReport& report, const std::string& strategy,
                       int batch_size) {
  const BenchCell* cell = report.Find(strategy, batch_size);
  const BenchCell* base = report.Find(Strategy::Full().Name(), batch_size);
  if (!cell || !cell->measured()) {
    throw NotMeasured(strategy + " at batch " + std::to_string(batch_size) +
                      " was not measured");
  }
  if (!base || !base->measured()) {
    throw NotMeasured("full model at batch " + std::to_string(batch_size) +
                      " was not measured");
  }
  return cell->tokens_per_second / base->tokens_per_second;
}

namespace {

std::string Num(double v) {
  if (std::isnan(v)) return "N/A";
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::vector<std::string> CellFields(const BenchCell& cell, int workers,
                                    int repetitions) {
  const bool ok = cell.measured();
  const std::string na = "N/A";
  return {cell.strategy,
          std::to_string(cell.batch_size),
          ok ? Num(cell.tokens_per_second) : na,
          ok ? Num(cell.activated_mean) : na,
          ok ? Num(cell.realized_speedup) : na,
          !cell.supported ? "no" : (cell.error.empty() ? "yes" : "error"),
          ok ? std::to_string(repetitions) : na,
          ok ? Num(cell.tps_min) : na,
          ok ? Num(cell.tps_max) : na,
          std::to_string(workers)};
}

const std::vector<std::string> kColumns = {
    "strategy",  "batch_size",  "tokens_per_second", "activated_mean",
    "realized_speedup", "supported", "repetitions", "tps_min",
    "tps_max",   "workers"};

}  // namespace

std::string EmitReport(const BenchReport& report, ReportFormat format) {
  std::ostringstream os;
  auto emit_row = [&](const std::vector<std::string>& fields) {
    if (format == ReportFormat::kCsv) {
      for (size_t i = 0; i < fields.size(); ++i) {
        os << (i ? "," : "") << fields[i];
      }
      os << '\n';
    } else {
      os << '|';
      for (const auto& f : fields) os << ' ' << f << " |";
      os << '\n';
    }
  };
  emit_row(kColumns);
  if (format == ReportFormat::kMarkdown) {
    emit_row(std::vector<std::string>(kColumns.size(), "---"));
  }
  for (const auto& cell : report.cells) {
    emit_row(CellFields(cell, report.workers, report.repetitions));
  }
  return os.str();
}

}  // namespace skipdepth
