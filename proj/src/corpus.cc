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
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "skipdepth/errors.h"

namespace skipdepth {

std::vector<int> Example::InputTokens() const {
  std::vector<int> tokens = prompt;
  tokens.insert(tokens.end(), response.begin(), response.end() - 1);
  return tokens;
}

void Example::Validate(int vocab_size, int max_seq_len) const {
  if (prompt.empty() || response.empty()) {
    throw InvalidArgument("example needs non-empty prompt and response");
  }
  if (static_cast<int>(prompt.size() + response.size()) > max_seq_len) {
    throw InvalidArgument("example longer than max_seq_len");
  }
  auto in_range = [&](int t) { return t >= 0 && t < vocab_size; };
  if (!std::all_of(prompt.begin(), prompt.end(), in_range) ||
      !std::all_of(response.begin(), response.end(), in_range)) {
    throw InvalidArgument("example token outside the vocabulary");
  }
}

std::vector<int> SubstitutionKey(int vocab_size, uint64_t key_seed) {
  std::vector<int> key(static_cast<size_t>(vocab_size));
  std::iota(key.begin(), key.end(), 0);
  std::mt19937_64 rng(key_seed);
  // Fisher-Yates with an explicit draw so the result is library independent.
  for (int i = vocab_size - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<uint64_t>(i + 1));
    std::swap(key[static_cast<size_t>(i)], key[static_cast<size_t>(j)]);
  }
  return key;
}

std::vector<Example> MakeCorpus(const CorpusOptions& options) {
  if (options.n_examples < 1 || options.min_length < 1 ||
      options.max_length < options.min_length || options.vocab_size < 2) {
    throw InvalidArgument("bad corpus options");
  }
  const auto key = SubstitutionKey(options.vocab_size, options.key_seed);
  std::mt19937_64 rng(options.seed);
  const uint64_t span =
      static_cast<uint64_t>(options.max_length - options.min_length + 1);
  std::vector<Example> corpus;
  corpus.reserve(static_cast<size_t>(options.n_examples));
  for (int e = 0; e < options.n_examples; ++e) {
    const int len = options.min_length + static_cast<int>(rng() % span);
    Example ex;
    for (int i = 0; i < len; ++i) {
      ex.prompt.push_back(static_cast<int>(
          rng() % static_cast<uint64_t>(options.vocab_size)));
    }
    ex.response = ex.prompt;
    if (options.task == TaskKind::kSubstitution) {
      for (int& t : ex.response) t = key[static_cast<size_t>(t)];
    }
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

std::vector<Example> ReadCorpus(std::istream& in) {
  std::vector<Example> corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Example ex;
      ex.prompt = j.at("prompt").get<std::vector<int>>();
      ex.response = j.at("response").get<std::vector<int>>();
      corpus.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("corpus line " + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
  return corpus;
}

std::vector<Example> ReadCorpusFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path);
  return ReadCorpus(in);
}

void WriteCorpus(std::ostream& out, std::span<const Example> corpus) {
  for (const auto& ex : corpus) {
    nlohmann::ordered_json j;
    j["prompt"] = ex.prompt;
    j["response"] = ex.response;
    out << j.dump() << '\n';
  }
}

}  // namespace skipdepth
