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

#ifndef SKIPDEPTH_ERRORS_H_
#define SKIPDEPTH_ERRORS_H_

#include <stdexcept>
#include <string>

namespace skipdepth {

// Precondition violations on public entry points.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A position would exceed ModelConfig::max_seq_len.
class SequenceOverflow : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// The requested strategy cannot run in this mode (e.g. early exit in a batch).
class UnsupportedStrategy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An executed layer found a hole in the KV cache that the active strategy
// promised would not exist.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A benchmark cell needed for a ratio was never measured.
class NotMeasured : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace skipdepth

#endif  // SKIPDEPTH_ERRORS_H_
