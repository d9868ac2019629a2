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

#ifndef SKIPDEPTH_IO_H_
#define SKIPDEPTH_IO_H_

// Weight file layout (all integers little-endian):
//   "SKPD"            4 bytes
//   version           u32 (currently 1)
//   config length     u32, then that many bytes of ModelConfig JSON
//   parameters        f32 row-major, in Weights' documented tensor order

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "skipdepth/model.h"

namespace skipdepth {

inline constexpr uint32_t kWeightFileVersion = 1;

void WriteWeights(std::ostream& out, const Weights& w);
Weights ReadWeights(std::istream& in);

void SaveWeights(const std::string& path, const Weights& w);
Weights LoadWeights(const std::string& path);

std::string ReadTextFile(const std::string& path);

}  // namespace skipdepth

#endif  // SKIPDEPTH_IO_H_
