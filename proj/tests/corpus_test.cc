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

#include "skipdepth/corpus.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gtest/gtest.h"
#include "skipdepth/errors.h"
#include "skipdepth/io.h"
#include "skipdepth/model.h"

namespace skipdepth {
namespace {

TEST(CorpusTest, CopyTaskRepeatsThePrompt) {
  CorpusOptions o;
  o.task = TaskKind::kCopy;
  o.n_examples = 50;
  const auto corpus = MakeCorpus(o);
  ASSERT_EQ(corpus.size(), 50u);
  for (const auto& ex : corpus) {
    EXPECT_EQ(ex.prompt, ex.response);
    EXPECT_GE(ex.prompt.size(), 4u);
    EXPECT_LE(ex.prompt.size(), 8u);
  }
}

TEST(CorpusTest, SubstitutionAppliesOneFixedPermutation) {
  CorpusOptions o;
  o.n_examples = 100;
  const auto key = SubstitutionKey(o.vocab_size, o.key_seed);
  EXPECT_EQ(std::set<int>(key.begin(), key.end()).size(), 32u);
  const auto corpus = MakeCorpus(o);
  for (const auto& ex : corpus) {
    ASSERT_EQ(ex.prompt.size(), ex.response.size());
    for (size_t i = 0; i < ex.prompt.size(); ++i) {
      EXPECT_EQ(ex.response[i], key[ex.prompt[i]]);
    }
  }
  o.seed = 1;
  const auto other = MakeCorpus(o);
  EXPECT_NE(other, corpus);
  EXPECT_EQ(SubstitutionKey(o.vocab_size, o.key_seed), key);
  EXPECT_NE(SubstitutionKey(o.vocab_size, 8), key);
}

TEST(CorpusTest, InputTokensDropTheLastResponseToken) {
  const Example ex{{1, 2}, {3, 4, 5}};
  EXPECT_EQ(ex.InputTokens(), (std::vector<int>{1, 2, 3, 4}));
  EXPECT_NO_THROW(ex.Validate(6, 5));
  EXPECT_THROW(ex.Validate(5, 5), InvalidArgument);
  EXPECT_THROW(ex.Validate(6, 4), InvalidArgument);
  EXPECT_THROW((Example{{}, {1}}).Validate(6, 5), InvalidArgument);
  EXPECT_THROW((Example{{1}, {}}).Validate(6, 5), InvalidArgument);
}

TEST(CorpusTest, JsonLinesRoundTrip) {
  CorpusOptions o;
  o.n_examples = 7;
  const auto corpus = MakeCorpus(o);
  std::stringstream ss;
  WriteCorpus(ss, corpus);
  const std::string text = ss.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
  EXPECT_EQ(text.substr(0, 11), "{\"prompt\":[");
  EXPECT_EQ(ReadCorpus(ss), corpus);
  std::stringstream bad("{\"prompt\":[1]}\n");
  EXPECT_THROW(ReadCorpus(bad), InvalidArgument);
  std::stringstream blank("\n  \n{\"prompt\":[1],\"response\":[2]}\n");
  EXPECT_EQ(ReadCorpus(blank).size(), 1u);
}

TEST(CorpusTest, RejectsBadOptions) {
  CorpusOptions o;
  o.min_length = 5;
  o.max_length = 4;
  EXPECT_THROW(MakeCorpus(o), InvalidArgument);
  o = CorpusOptions{};
  o.vocab_size = 1;
  EXPECT_THROW(MakeCorpus(o), InvalidArgument);
}

TEST(WeightFileTest, SaveAndLoadThroughTheFilesystem) {
  ModelConfig c;
  c.n_layers = 2;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.vocab_size = 10;
  c.max_seq_len = 12;
  c.seed = 4;
  const Weights w = InitWeights(c);
  const auto path =
      (std::filesystem::temp_directory_path() / "skipdepth_io_test.bin").string();
  SaveWeights(path, w);
  EXPECT_TRUE(LoadWeights(path) == w);

  // Truncated parameter block.
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  std::stringstream cut(bytes.substr(0, bytes.size() - 4));
  EXPECT_THROW(ReadWeights(cut), std::runtime_error);
  // Unknown version.
  bytes[4] = 2;
  std::stringstream version(bytes);
  EXPECT_THROW(ReadWeights(version), InvalidArgument);
  std::filesystem::remove(path);
  EXPECT_THROW(LoadWeights(path), std::runtime_error);
}

}  // namespace
}  // namespace skipdepth
