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

#include "skipdepth/train.h"

#include <cmath>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "skipdepth/engine.h"
#include "skipdepth/errors.h"
#include "test_util.h"

namespace skipdepth {
namespace {

using testing::RandomTokens;
using testing::TinyConfig;

std::vector<std::vector<bool>> ToBools(std::span<const LayerMask> masks,
                                       int n_layers) {
  std::vector<std::vector<bool>> out;
  for (const auto& m : masks) {
    std::vector<bool> row;
    for (int l = 0; l < n_layers; ++l) row.push_back(m[l]);
    out.push_back(row);
  }
  return out;
}

std::vector<Example> CopyCorpus(int n, uint64_t seed, int vocab = 24) {
  CorpusOptions o;
  o.task = TaskKind::kCopy;
  o.n_examples = n;
  o.min_length = 3;
  o.max_length = 6;
  o.vocab_size = vocab;
  o.seed = seed;
  return MakeCorpus(o);
}

TEST(CrossEntropyTest, CertainPredictionHasZeroLoss) {
  const Example ex{{1, 2}, {3, 4, 5}};
  Logits logits(4, 8);
  for (int i = 0; i < 3; ++i) logits.row(1 + i)[ex.response[i]] = 1e4f;
  const auto loss = CrossEntropyLoss(logits, ex);
  EXPECT_EQ(loss.tokens, 3);
  EXPECT_EQ(loss.sum, 0.0);
  EXPECT_FALSE(loss.clamped);
}

TEST(CrossEntropyTest, UniformLogitsGiveLogVocab) {
  const Example ex{{7, 8, 9}, {1, 2, 3, 4}};
  const Logits logits(6, 256);
  const auto loss = CrossEntropyLoss(logits, ex);
  EXPECT_EQ(loss.tokens, 4);
  EXPECT_NEAR(loss.mean(), std::log(256.0), 1e-12);
  EXPECT_NEAR(loss.mean(), 5.545, 1e-3);
}

TEST(CrossEntropyTest, MatchesBruteForceGather) {
  std::mt19937 rng(17);
  std::normal_distribution<float> n(0.0f, 3.0f);
  for (int trial = 0; trial < 20; ++trial) {
    const int vocab = 5 + static_cast<int>(rng() % 20);
    const Example ex{RandomTokens(1 + rng() % 5, vocab, rng()),
                     RandomTokens(1 + rng() % 5, vocab, rng())};
    const int len = static_cast<int>(ex.prompt.size() + ex.response.size() - 1);
    Logits logits(len, vocab);
    for (float& v : logits.data) v = n(rng);
    double expect = 0;
    for (size_t i = 0; i < ex.response.size(); ++i) {
      const auto row = logits.row(static_cast<int>(ex.prompt.size() - 1 + i));
      double z = 0;
      for (float v : row) z += std::exp(static_cast<double>(v));
      expect -= std::log(std::exp(static_cast<double>(row[ex.response[i]])) / z);
    }
    EXPECT_NEAR(CrossEntropyLoss(logits, ex).sum, expect, 1e-9);
  }
}

TEST(CrossEntropyTest, PromptPositionsContributeNothing) {
  const Example ex{{1, 2, 3, 4}, {5, 6}};
  Logits logits(5, 10);
  std::mt19937 rng(1);
  for (float& v : logits.data) v = static_cast<float>(rng() % 100) / 10.0f;
  const double base = CrossEntropyLoss(logits, ex).sum;
  for (int r = 0; r < 3; ++r) {
    for (float& v : logits.row(r)) v = -50.0f;
  }
  EXPECT_EQ(CrossEntropyLoss(logits, ex).sum, base);
}

TEST(CrossEntropyTest, ZeroProbabilityIsClampedAndFlagged) {
  const Example ex{{1}, {2}};
  Logits logits(1, 4);
  logits.row(0)[2] = -std::numeric_limits<float>::infinity();
  const auto loss = CrossEntropyLoss(logits, ex);
  EXPECT_TRUE(loss.clamped);
  EXPECT_EQ(loss.sum, -kMinLogProb);
}

TEST(ComputeGradientsTest, LossMatchesInferenceForward) {
  const Weights w = InitWeights(TinyConfig(6, 4));
  const Example ex{RandomTokens(5, 24, 1), RandomTokens(4, 24, 2)};
  for (const auto& plan :
       {std::optional<SkipPlan>{}, std::optional(UnifiedRetainedLayers(6, 2)),
        std::optional(TopRetainedLayers(6, 2))}) {
    const auto masks = TrainingMasks(ex, plan, 6);
    const auto logits = ForwardMasked(w, ex.InputTokens(), masks);
    EXPECT_NEAR(ComputeGradients(w, ex, masks, nullptr).sum,
                CrossEntropyLoss(logits, ex).sum, 1e-4);
  }
}

TEST(ComputeGradientsTest, TrainingMasksKeepPromptFull) {
  const Example ex{{1, 2, 3}, {4, 5, 6}};
  const auto plan = UnifiedRetainedLayers(8, 2);
  const auto masks = TrainingMasks(ex, plan, 8);
  ASSERT_EQ(masks.size(), 5u);
  for (int t = 0; t < 3; ++t) EXPECT_TRUE(masks[t].IsFull());
  for (int t = 3; t < 5; ++t) EXPECT_EQ(masks[t].Layers(), plan.retained);
}

// Central differences of an independent double-precision loss at the f32
// weights perturbed by +-h, against the analytic f32 gradient.
void FiniteDifferenceCheck(const Weights& w, const Example& ex,
                           const std::vector<LayerMask>& masks, double aux,
                           uint64_t seed) {
  const int n_layers = w.config().n_layers;
  const auto bools = ToBools(masks, n_layers);
  Weights g(w.config());
  ComputeGradients(w, ex, masks, &g, aux);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < 20; ++i) {
    const size_t idx = rng() % w.size();
    Weights p = w;
    const float orig = p.data()[idx];
    const float up = orig + 1e-3f;
    const float down = orig - 1e-3f;
    p.data()[idx] = up;
    const double lp = testing::ReferenceLoss(p, ex.prompt, ex.response, bools, aux);
    p.data()[idx] = down;
    const double lm = testing::ReferenceLoss(p, ex.prompt, ex.response, bools, aux);
    const double fd = (lp - lm) / (static_cast<double>(up) - down);
    const double analytic = g.data()[idx];
    EXPECT_LT(std::abs(analytic - fd) / (std::abs(analytic) + 1e-8), 1e-2)
        << "parameter " << idx << " analytic " << analytic << " fd " << fd;
  }
}

TEST(ComputeGradientsTest, FiniteDifferencesFullDepth) {
  for (uint64_t seed = 1; seed <= 4; ++seed) {
    Weights w = InitWeights(TinyConfig(4, seed));
    testing::Roughen(w, 0.3, seed);
    const Example ex{RandomTokens(4, 24, seed), RandomTokens(4, 24, seed + 9)};
    FiniteDifferenceCheck(w, ex, TrainingMasks(ex, std::nullopt, 4), 0.0, seed);
  }
}

TEST(ComputeGradientsTest, FiniteDifferencesSkippedLayers) {
  for (uint64_t seed = 1; seed <= 4; ++seed) {
    Weights w = InitWeights(TinyConfig(6, seed));
    testing::Roughen(w, 0.3, seed);
    const Example ex{RandomTokens(3, 24, seed), RandomTokens(5, 24, seed + 9)};
    for (const auto& plan : {UnifiedRetainedLayers(6, 2), TopRetainedLayers(6, 3),
                             BottomRetainedLayers(6, 2)}) {
      FiniteDifferenceCheck(w, ex, TrainingMasks(ex, plan, 6), 0.0, seed);
    }
  }
}

TEST(ComputeGradientsTest, FiniteDifferencesWithExitHeads) {
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    Weights w = InitWeights(TinyConfig(4, seed));
    testing::Roughen(w, 0.3, seed);
    const Example ex{RandomTokens(4, 24, seed), RandomTokens(3, 24, seed + 9)};
    FiniteDifferenceCheck(w, ex, TrainingMasks(ex, std::nullopt, 4), 0.5, seed);
    FiniteDifferenceCheck(w, ex, TrainingMasks(ex, UnifiedRetainedLayers(4, 2), 4),
                          0.5, seed + 50);
  }
}

TEST(ComputeGradientsTest, UnusedWeightsGetZeroGradient) {
  const Weights w = InitWeights(TinyConfig(4, 2));
  const Example ex{{1, 2}, {3, 4}};
  auto masks = TrainingMasks(ex, std::nullopt, 4);
  for (auto& m : masks) m.Set(2, false);
  Weights g(w.config());
  ComputeGradients(w, ex, masks, &g);
  const size_t off = g.LayerOffset(2);
  for (size_t i = off; i < off + g.LayerSize(); ++i) {
    ASSERT_EQ(g.data()[i], 0.0f) << i;
  }
  // Positions past the sequence are never read.
  const int d = w.config().d_model;
  for (size_t i = 3 * d; i < g.position_embedding().size(); ++i) {
    ASSERT_EQ(g.position_embedding()[i], 0.0f);
  }
  for (float v : g.layer(1).bk) EXPECT_EQ(v, 0.0f);
}

TEST(ComputeGradientsTest, SingleResponseTokenReachesTheHead) {
  const Weights w = InitWeights(TinyConfig(2, 2));
  const Example ex{{1, 2, 3}, {4}};
  Weights g(w.config());
  const auto loss =
      ComputeGradients(w, ex, TrainingMasks(ex, std::nullopt, 2), &g);
  EXPECT_EQ(loss.tokens, 1);
  double norm = 0;
  for (float v : g.final_norm_gain()) norm += std::abs(v);
  EXPECT_GT(norm, 0.0);
  double emb = 0;
  const int d = w.config().d_model;
  for (int i = 0; i < d; ++i) emb += std::abs(g.token_embedding()[4 * d + i]);
  EXPECT_GT(emb, 0.0);
}

TEST(ComputeGradientsTest, RejectsMismatchedMasks) {
  const Weights w = InitWeights(TinyConfig(4, 2));
  const Example ex{{1, 2}, {3, 4}};
  auto masks = TrainingMasks(ex, std::nullopt, 4);
  masks.pop_back();
  EXPECT_THROW(ComputeGradients(w, ex, masks, nullptr), InvalidArgument);
  masks = std::vector<LayerMask>(3, LayerMask::All(3));
  EXPECT_THROW(ComputeGradients(w, ex, masks, nullptr), InvalidArgument);
  Weights wrong(TinyConfig(3, 2));
  EXPECT_THROW(ComputeGradients(w, ex, TrainingMasks(ex, std::nullopt, 4), &wrong),
               InvalidArgument);
}

TEST(FinetuneTest, OneEpochReducesHeldOutLossOnCopyTask) {
  const Weights init = InitWeights(TinyConfig(4, 3));
  const auto train = CopyCorpus(96, 1);
  const auto heldout = CopyCorpus(24, 2);
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.seed = 5;
  const auto r = Finetune(init, train, heldout, cfg);
  EXPECT_LT(r.heldout_loss, r.initial_loss);
  EXPECT_EQ(r.epoch_losses.size(), 1u);
  EXPECT_NEAR(r.initial_loss, HeldOutLoss(init, heldout, std::nullopt), 1e-12);
}

TEST(FinetuneTest, SameSeedSameWeights) {
  const Weights init = InitWeights(TinyConfig(4, 3));
  const auto train = CopyCorpus(32, 1);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 11;
  cfg.layerdrop_rate = 0.2;
  const auto a = Finetune(init, train, {}, cfg);
  const auto b = Finetune(init, train, {}, cfg);
  EXPECT_TRUE(a.weights == b.weights);
  cfg.seed = 12;
  EXPECT_FALSE(Finetune(init, train, {}, cfg).weights == a.weights);
}

TEST(FinetuneTest, LayerDropDeepEncodingKeepsPromptsAtFullDepth) {
  const Weights init = InitWeights(TinyConfig(4, 3));
  const auto train = CopyCorpus(24, 1);
  TrainConfig cfg;
  cfg.layerdrop_rate = 0.4;
  cfg.seed = 3;
  ResetPromptAudit();
  Finetune(init, train, {}, cfg);
  auto audit = PromptAuditSnapshot();
  EXPECT_GT(audit.prompt_tokens, 0u);
  EXPECT_EQ(audit.violations, 0u);

  // Without deep encoding prompts drop layers too; the run is still valid
  // training but falls outside the full-depth prompt protocol, so the audit
  // is not fed and the state is restored afterwards.
  cfg.deep_encoding = false;
  const auto shallow = Finetune(init, train, {}, cfg);
  EXPECT_EQ(PromptAuditSnapshot().prompt_tokens, audit.prompt_tokens);
  EXPECT_FALSE(shallow.weights == init);
}

TEST(FinetuneTest, PlanTrainedModelDecodesWithThatPlan) {
  const Weights init = InitWeights(TinyConfig(8, 3));
  const auto train = CopyCorpus(16, 1);
  TrainConfig cfg;
  cfg.plan = UnifiedRetainedLayers(8, 3);
  const auto r = Finetune(init, train, {}, cfg);
  DecodeConfig dc;
  dc.strategy = Strategy::Unified(3);
  dc.max_new_tokens = 10;
  const auto gen = Generate(r.weights, train[0].prompt, dc);
  for (const auto& rec : gen.trace.tokens) {
    EXPECT_EQ(rec.executed, cfg.plan->retained);
  }
}

TEST(FinetuneTest, RejectsBadConfigs) {
  const Weights init = InitWeights(TinyConfig(4, 3));
  const auto train = CopyCorpus(4, 1);
  TrainConfig cfg;
  EXPECT_THROW(Finetune(init, {}, {}, cfg), InvalidArgument);
  cfg.learning_rate = 0;
  EXPECT_THROW(Finetune(init, train, {}, cfg), InvalidArgument);
  cfg = TrainConfig{};
  cfg.warmup_fraction = 1.0;
  EXPECT_THROW(Finetune(init, train, {}, cfg), InvalidArgument);
  cfg = TrainConfig{};
  cfg.layerdrop_rate = 1.0;
  EXPECT_THROW(Finetune(init, train, {}, cfg), InvalidArgument);
  cfg = TrainConfig{};
  cfg.plan = UnifiedRetainedLayers(8, 2);
  EXPECT_THROW(Finetune(init, train, {}, cfg), InvalidArgument);
}

TEST(FinetuneTest, DivergenceIsReported) {
  Weights init = InitWeights(TinyConfig(2, 3));
  init.data()[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(Finetune(init, CopyCorpus(4, 1), {}, TrainConfig{}),
               TrainingDiverged);
}

TEST(GreedySearchTest, FullBudgetNeedsNoEvaluations) {
  const Weights w = InitWeights(TinyConfig(4, 3));
  const auto r = GreedyLayerSearch(w, CopyCorpus(4, 1), 4);
  EXPECT_EQ(r.plan.retained, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(r.evaluations, 0);
  EXPECT_THROW(GreedyLayerSearch(w, CopyCorpus(4, 1), 5), InvalidArgument);
  EXPECT_THROW(GreedyLayerSearch(w, CopyCorpus(4, 1), 0), InvalidArgument);
}

TEST(GreedySearchTest, OneRemovalMatchesExhaustiveSearch) {
  for (uint64_t seed = 1; seed <= 4; ++seed) {
    Weights w = InitWeights(TinyConfig(6, seed));
    testing::Roughen(w, 0.25, seed);
    const auto heldout = CopyCorpus(6, seed);
    const auto r = GreedyLayerSearch(w, heldout, 5);
    ASSERT_EQ(r.removed.size(), 1u);
    EXPECT_EQ(r.evaluations, 4);

    int best = -1;
    double best_loss = 1e300;
    for (int l = 1; l < 5; ++l) {
      double sum = 0;
      int tokens = 0;
      std::vector<int> kept;
      for (int k = 0; k < 6; ++k) {
        if (k != l) kept.push_back(k);
      }
      const SkipPlan plan{6, 1.2, kept};
      for (const auto& ex : heldout) {
        sum += testing::ReferenceLoss(w, ex.prompt, ex.response,
                                      ToBools(TrainingMasks(ex, plan, 6), 6));
        tokens += static_cast<int>(ex.response.size());
      }
      if (sum / tokens <= best_loss) {
        best_loss = sum / tokens;
        best = l;
      }
      EXPECT_NE(std::find(kept.begin(), kept.end(), 0), kept.end());
    }
    EXPECT_EQ(r.removed[0], best);
    EXPECT_NEAR(r.losses[0], best_loss, 1e-4);
  }
}

TEST(GreedySearchTest, KeepsEndpointsAndShrinksToBudget) {
  Weights w = InitWeights(TinyConfig(6, 2));
  testing::Roughen(w, 0.2, 9);
  const auto heldout = CopyCorpus(4, 3);
  const auto r = GreedyLayerSearch(w, heldout, 2);
  EXPECT_EQ(r.plan.retained, (std::vector<int>{0, 5}));
  EXPECT_EQ(r.removed.size(), 4u);
  EXPECT_EQ(r.evaluations, 4 + 3 + 2 + 1);
  EXPECT_NO_THROW(r.plan.Validate());
  EXPECT_EQ(GreedyLayerSearch(w, heldout, 1).plan.retained, std::vector<int>{5});
}

TEST(StrategySweepTest, RatioOneGivesIdenticalLosses) {
  const Weights init = InitWeights(TinyConfig(4, 3));
  const auto train = CopyCorpus(8, 1);
  const auto heldout = CopyCorpus(4, 2);
  const double ratios[] = {1.0};
  TrainConfig cfg;
  cfg.seed = 4;
  const auto report = StrategyLossSweep(init, train, heldout, ratios, cfg);
  ASSERT_EQ(report.rows.size(), 4u);
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.loss, report.rows[0].loss) << row.strategy;
    EXPECT_EQ(row.plan.retained.size(), 4u);
    EXPECT_TRUE(std::isfinite(row.loss));
    EXPECT_GE(row.loss, 0.0);
  }
  const std::string csv = report.ToCsv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "strategy,ratio,loss");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(report.Loss("greedy", 1.0), report.rows[3].loss);
  EXPECT_THROW(report.Loss("greedy", 2.0), InvalidArgument);
}

TEST(StrategySweepTest, PlansHaveEqualBudgets) {
  const Weights init = InitWeights(TinyConfig(6, 3));
  const auto train = CopyCorpus(4, 1);
  const double ratios[] = {2.0, 3.0};
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto report = StrategyLossSweep(init, train, CopyCorpus(4, 2), ratios, cfg);
  ASSERT_EQ(report.rows.size(), 8u);
  const std::vector<std::string> order = {"skip-top", "skip-bottom", "unified",
                                          "greedy"};
  for (size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    EXPECT_EQ(row.strategy, order[i % 4]);
    EXPECT_EQ(static_cast<int>(row.plan.retained.size()),
              static_cast<int>(6 / row.ratio));
  }
}

}  // namespace
}  // namespace skipdepth
