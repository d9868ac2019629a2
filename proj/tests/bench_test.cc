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

#include <cmath>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "skipdepth/errors.h"
#include "test_util.h"

namespace skipdepth {
namespace {

std::vector<std::vector<std::string>> ParseCsv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

std::vector<std::vector<std::string>> ParseMarkdown(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    size_t pos = 1;
    while (pos < line.size()) {
      const size_t bar = line.find('|', pos);
      std::string f = line.substr(pos, bar - pos);
      f = f.substr(1, f.size() - 2);
      fields.push_back(f);
      pos = bar + 1;
    }
    if (fields.front() != "---") rows.push_back(fields);
  }
  return rows;
}

BenchCell Measured(const std::string& name, int batch, double tps) {
  BenchCell c;
  c.strategy = name;
  c.batch_size = batch;
  c.tokens_per_second = tps;
  c.tps_min = tps * 0.9;
  c.tps_max = tps * 1.1;
  c.activated_mean = 4;
  c.samples = {tps};
  return c;
}

TEST(EmitReportTest, EmptyReportIsHeaderOnly) {
  const BenchReport empty;
  EXPECT_EQ(EmitReport(empty, ReportFormat::kCsv),
            "strategy,batch_size,tokens_per_second,activated_mean,"
            "realized_speedup,supported,repetitions,tps_min,tps_max,workers\n");
  const auto md = ParseMarkdown(EmitReport(empty, ReportFormat::kMarkdown));
  ASSERT_EQ(md.size(), 1u);
  EXPECT_EQ(md[0], ParseCsv(EmitReport(empty, ReportFormat::kCsv))[0]);
}

TEST(EmitReportTest, MarkdownAndCsvCarryTheSameValues) {
  BenchReport r;
  r.repetitions = 5;
  r.cells.push_back(Measured("full", 1, 100));
  r.cells.push_back(Measured("unified:2", 1, 180.5));
  r.cells[1].realized_speedup = 1.805;
  BenchCell na;
  na.strategy = "early-exit:0.9";
  na.batch_size = 2;
  na.supported = false;
  r.cells.push_back(na);
  BenchCell broken;
  broken.strategy = "unified:99";
  broken.error = "ratio too large";
  r.cells.push_back(broken);
  const auto csv = ParseCsv(EmitReport(r, ReportFormat::kCsv));
  const auto md = ParseMarkdown(EmitReport(r, ReportFormat::kMarkdown));
  EXPECT_EQ(csv, md);
  ASSERT_EQ(csv.size(), 5u);
  EXPECT_EQ(csv[2][2], "180.5");
  EXPECT_EQ(csv[2][4], "1.805");
  EXPECT_EQ(csv[2][5], "yes");
  EXPECT_EQ(csv[3][5], "no");
  EXPECT_EQ(csv[4][5], "error");
  for (int col : {2, 3, 4, 6, 7, 8}) {
    EXPECT_EQ(csv[3][col], "N/A");
    EXPECT_EQ(csv[4][col], "N/A");
  }
  EXPECT_EQ(EmitReport(r, ReportFormat::kCsv), EmitReport(r, ReportFormat::kCsv));
}

TEST(RealizedSpeedupTest, RatioAgainstFullModel) {
  BenchReport r;
  r.cells.push_back(Measured("full", 1, 100));
  r.cells.push_back(Measured("unified:2", 1, 150));
  BenchCell na;
  na.strategy = "early-exit:0.9";
  na.batch_size = 1;
  na.supported = false;
  r.cells.push_back(na);
  EXPECT_DOUBLE_EQ(RealizedSpeedup(r, "full", 1), 1.0);
  EXPECT_DOUBLE_EQ(RealizedSpeedup(r, "unified:2", 1), 1.5);
  EXPECT_THROW(RealizedSpeedup(r, "unified:2", 2), NotMeasured);
  EXPECT_THROW(RealizedSpeedup(r, "early-exit:0.9", 1), NotMeasured);
  EXPECT_THROW(RealizedSpeedup(r, "skip-top:3", 1), NotMeasured);
  BenchReport no_full;
  no_full.cells.push_back(Measured("unified:2", 1, 150));
  EXPECT_THROW(RealizedSpeedup(no_full, "unified:2", 1), NotMeasured);
}

TEST(RunBenchmarkTest, SmallGrid) {
  const Weights w = InitWeights(testing::TinyConfig(6, 2));
  BenchConfig cfg;
  cfg.batch_sizes = {1, 2};
  cfg.strategies = {Strategy::Full(), Strategy::Unified(2), Strategy::Unified(3),
                    Strategy::EarlyExit(0.5), Strategy::Unified(99)};
  cfg.n_requests = 3;
  cfg.prompt_length = 4;
  cfg.max_new_tokens = 6;
  cfg.repetitions = 3;
  ResetPromptAudit();
  const auto report = RunBenchmark(cfg, w);
  ASSERT_EQ(report.cells.size(), 10u);
  EXPECT_EQ(report.repetitions, 3);

  for (int b : {1, 2}) {
    const auto* full = report.Find("full", b);
    ASSERT_NE(full, nullptr);
    EXPECT_TRUE(full->measured());
    EXPECT_GT(full->tokens_per_second, 0.0);
    EXPECT_EQ(full->samples.size(), 3u);
    EXPECT_LE(full->tps_min, full->tokens_per_second);
    EXPECT_GE(full->tps_max, full->tokens_per_second);
    EXPECT_EQ(full->activated_mean, 6.0);
    EXPECT_DOUBLE_EQ(full->realized_speedup, 1.0);
    EXPECT_EQ(report.Find("unified:2", b)->activated_mean, 3.0);
    EXPECT_EQ(report.Find("unified:3", b)->activated_mean, 2.0);
    const auto* bad = report.Find("unified:99", b);
    EXPECT_FALSE(bad->measured());
    EXPECT_FALSE(bad->error.empty());
    EXPECT_TRUE(std::isnan(bad->realized_speedup));
  }
  EXPECT_TRUE(report.Find("early-exit:0.5", 1)->measured());
  EXPECT_FALSE(report.Find("early-exit:0.5", 2)->supported);
  const auto csv = ParseCsv(EmitReport(report, ReportFormat::kCsv));
  for (const auto& row : csv) {
    if (row[0] == "early-exit:0.5" && row[1] == "2") {
      EXPECT_EQ(row[2], "N/A");
      EXPECT_EQ(row[5], "no");
    }
  }
  // Every prompt token, warmup included, ran at full depth.
  const auto audit = PromptAuditSnapshot();
  EXPECT_GT(audit.prompt_tokens, 0u);
  EXPECT_EQ(audit.violations, 0u);
}

TEST(RunBenchmarkTest, WorkersSplitTheRequestsWithoutChangingResults) {
  const Weights w = InitWeights(testing::TinyConfig(4, 2));
  BenchConfig cfg;
  cfg.batch_sizes = {1, 2};
  cfg.strategies = {Strategy::SkipDecode({6, 1, 4}), Strategy::EarlyExit(0.2)};
  cfg.n_requests = 5;
  cfg.prompt_length = 3;
  cfg.max_new_tokens = 8;
  cfg.repetitions = 3;
  const auto one = RunBenchmark(cfg, w);
  cfg.workers = 3;
  const auto three = RunBenchmark(cfg, w);
  EXPECT_EQ(three.workers, 3);
  ASSERT_EQ(one.cells.size(), three.cells.size());
  for (size_t i = 0; i < one.cells.size(); ++i) {
    EXPECT_EQ(one.cells[i].activated_mean, three.cells[i].activated_mean);
    EXPECT_EQ(one.cells[i].supported, three.cells[i].supported);
  }
  const auto csv = ParseCsv(EmitReport(three, ReportFormat::kCsv));
  EXPECT_EQ(csv[1][9], "3");
}

TEST(BenchConfigTest, Validation) {
  BenchConfig cfg;
  cfg.strategies = {Strategy::Full()};
  EXPECT_NO_THROW(cfg.Validate());
  cfg.repetitions = 2;
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
  cfg.repetitions = 5;
  cfg.batch_sizes = {0};
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
  cfg.batch_sizes = {1};
  cfg.strategies.clear();
  EXPECT_THROW(cfg.Validate(), InvalidArgument);
}

TEST(BenchPromptsTest, DeterministicAndInRange) {
  const auto a = BenchPrompts(4, 32, 20, 9);
  EXPECT_EQ(a, BenchPrompts(4, 32, 20, 9));
  EXPECT_NE(a, BenchPrompts(4, 32, 20, 10));
  for (const auto& p : a) {
    EXPECT_EQ(p.size(), 32u);
    for (int t : p) EXPECT_TRUE(t >= 0 && t < 20);
  }
}

}  // namespace
}  // namespace skipdepth
