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

#ifndef SKIPDEPTH_CORPUS_H_
#define SKIPDEPTH_CORPUS_H_

// Prompt/response pairs and the two synthetic tasks used for fine-tuning:
// copying the prompt, and rewriting it through a fixed token permutation.

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace skipdepth {

struct Example {
  std::vector<int> prompt;
  std::vector<int> response;

  // Teacher-forced model input: prompt followed by all but the last
  // response token.
  std::vector<int> InputTokens() const;
  void Validate(int vocab_size, int max_seq_len) const;

  friend bool operator==(const Example&, const Example&) = default;
};

enum class TaskKind { kCopy, kSubstitution };

struct CorpusOptions {
  TaskKind task = TaskKind::kSubstitution;
  int n_examples = 256;
  int min_length = 4;
  int max_length = 8;
  int vocab_size = 32;
  uint64_t seed = 0;      // sampling of prompts
  uint64_t key_seed = 7;  // substitution permutation
};

// Permutation of [0, vocab_size) derived from key_seed.
std::vector<int> SubstitutionKey(int vocab_size, uint64_t key_seed);

std::vector<Example> MakeCorpus(const CorpusOptions& options);

// JSON lines: {"prompt":[...],"response":[...]}
std::vector<Example> ReadCorpus(std::istream& in);
std::vector<Example> ReadCorpusFile(const std::string& path);
void WriteCorpus(std::ostream& out, std::span<const Example> corpus);

}  // namespace skipdepth

#endif  // SKIPDEPTH_CORPUS_H_
