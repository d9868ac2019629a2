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

#include "skipdepth/io.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "skipdepth/errors.h"

namespace skipdepth {

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'K', 'P', 'D'};

void PutU32(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
      static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t GetU32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("weight file truncated");
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void WriteWeights(std::ostream& out, const Weights& w) {
  out.write(kMagic.data(), kMagic.size());
  PutU32(out, kWeightFileVersion);
  const std::string config = w.config().ToJson();
  PutU32(out, static_cast<uint32_t>(config.size()));
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  for (float v : w.data()) PutU32(out, std::bit_cast<uint32_t>(v));
  if (!out) throw std::runtime_error("failed writing weights");
}

Weights ReadWeights(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw InvalidArgument("not a weight file (bad magic)");
  }
  const uint32_t version = GetU32(in);
  if (version != kWeightFileVersion) {
    throw InvalidArgument("unsupported weight file version " +
                          std::to_string(version));
  }
  const uint32_t config_len = GetU32(in);
  std::string config(config_len, '\0');
  if (!in.read(config.data(), config_len)) {
    throw std::runtime_error("weight file truncated");
  }
  Weights w(ModelConfig::FromJson(config));
  for (float& v : w.data()) v = std::bit_cast<float>(GetU32(in));
  return w;
}

void SaveWeights(const std::string& path, const Weights& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  WriteWeights(out, w);
}

Weights LoadWeights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weights " + path);
  return ReadWeights(in);
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace skipdepth
