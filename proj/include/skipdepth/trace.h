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

#ifndef SKIPDEPTH_TRACE_H_
#define SKIPDEPTH_TRACE_H_

#include <vector>

namespace skipdepth {

// One decode step on a response token.
struct TokenRecord {
  int position = 0;
  int token = 0;            // response token fed at `position`
  int predicted = 0;        // token chosen from this step's logits
  std::vector<int> executed;  // ascending layer indices that ran
  int recomputed_layers = 0;  // early exit only: KV back-fill for prior tokens
  double seconds = 0.0;
};

struct GenerationTrace {
  int prompt_length = 0;
  // Layers that ran for each prompt token during prefill.
  std::vector<std::vector<int>> prompt_executed;
  std::vector<TokenRecord> tokens;
  double total_seconds = 0.0;
};

}  // namespace skipdepth

#endif  // SKIPDEPTH_TRACE_H_
