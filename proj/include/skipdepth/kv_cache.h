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

#ifndef SKIPDEPTH_KV_CACHE_H_
#define SKIPDEPTH_KV_CACHE_H_

#include <span>
#include <vector>

namespace skipdepth {

// Per-layer, per-slot key/value storage. A slot holds an entry at layer l only
// if layer l executed for the token in that slot. Slots flagged as padding
// never hold entries and are masked out of attention.
class KVCache {
 public:
  KVCache() = default;
  KVCache(int n_layers, int capacity, int d_model);

  int n_layers() const { return n_layers_; }
  int capacity() const { return capacity_; }
  int d_model() const { return d_model_; }

  bool Has(int layer, int slot) const {
    return valid_[Index(layer, slot)] != 0;
  }
  std::span<float> Key(int layer, int slot);
  std::span<const float> Key(int layer, int slot) const;
  std::span<float> Value(int layer, int slot);
  std::span<const float> Value(int layer, int slot) const;
  void MarkValid(int layer, int slot) { valid_[Index(layer, slot)] = 1; }

  void MarkPad(int slot) { pad_[static_cast<size_t>(slot)] = 1; }
  bool IsPad(int slot) const { return pad_[static_cast<size_t>(slot)] != 0; }

  // Layers with entries at `slot`, ascending.
  std::vector<int> LayersAt(int slot) const;
  int EntryCount() const;

  friend bool operator==(const KVCache&, const KVCache&) = default;

 private:
  size_t Index(int layer, int slot) const {
    return static_cast<size_t>(layer) * static_cast<size_t>(capacity_) +
           static_cast<size_t>(slot);
  }
  size_t Offset(int layer, int slot) const {
    return Index(layer, slot) * static_cast<size_t>(d_model_);
  }

  int n_layers_ = 0;
  int capacity_ = 0;
  int d_model_ = 0;
  std::vector<float> keys_;
  std::vector<float> values_;
  std::vector<unsigned char> valid_;
  std::vector<unsigned char> pad_;
};

}  // namespace skipdepth

#endif  // SKIPDEPTH_KV_CACHE_H_
