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

#ifndef SKIPDEPTH_SRC_KERNELS_H_
#define SKIPDEPTH_SRC_KERNELS_H_

// Scalar building blocks shared by the inference and training paths. Row
// results never depend on how many other rows share the call, so batched and
// solo evaluation agree bitwise.

#include <cmath>
#include <cstddef>

namespace skipdepth::kernels {

inline constexpr float kLayerNormEps = 1e-5f;

// y[r] = b + x[r] W for x [rows x in], W [in x out]. b may be null.
inline void MatMulBias(const float* x, int rows, int in, const float* w,
                       const float* b, int out, float* y) {
  for (int r = 0; r < rows; ++r) {
    float* yr = y + static_cast<size_t>(r) * out;
    const float* xr = x + static_cast<size_t>(r) * in;
    for (int j = 0; j < out; ++j) yr[j] = b ? b[j] : 0.0f;
    for (int k = 0; k < in; ++k) {
      const float xv = xr[k];
      const float* wk = w + static_cast<size_t>(k) * out;
      for (int j = 0; j < out; ++j) yr[j] += xv * wk[j];
    }
  }
}

// Writes the normalized row to `out`; `xhat` (optional) receives the
// pre-affine values. Returns 1/sqrt(var + eps).
inline float LayerNormRow(const float* x, int n, const float* gain,
                          const float* bias, float* out, float* xhat) {
  float mean = 0.0f;
  for (int i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<float>(n);
  float var = 0.0f;
  for (int i = 0; i < n; ++i) {
    const float d = x[i] - mean;
    var += d * d;
  }
  var /= static_cast<float>(n);
  const float rstd = 1.0f / std::sqrt(var + kLayerNormEps);
  for (int i = 0; i < n; ++i) {
    const float xh = (x[i] - mean) * rstd;
    if (xhat) xhat[i] = xh;
    out[i] = xh * gain[i] + bias[i];
  }
  return rstd;
}

// dx for out = xhat * gain + bias given dout; accumulates into dgain/dbias.
inline void LayerNormBackwardRow(const float* dout, const float* xhat,
                                 float rstd, int n, const float* gain,
                                 float* dgain, float* dbias, float* dx) {
  float mean_dxhat = 0.0f;
  float mean_dxhat_xhat = 0.0f;
  for (int i = 0; i < n; ++i) {
    const float dxh = dout[i] * gain[i];
    mean_dxhat += dxh;
    mean_dxhat_xhat += dxh * xhat[i];
    dgain[i] += dout[i] * xhat[i];
    dbias[i] += dout[i];
  }
  mean_dxhat /= static_cast<float>(n);
  mean_dxhat_xhat /= static_cast<float>(n);
  for (int i = 0; i < n; ++i) {
    const float dxh = dout[i] * gain[i];
    dx[i] += rstd * (dxh - mean_dxhat - xhat[i] * mean_dxhat_xhat);
  }
}

// tanh approximation
inline float Gelu(float x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  return 0.5f * x * (1.0f + std::tanh(kC * (x + 0.044715f * x * x * x)));
}

inline float GeluGrad(float x) {
  constexpr float kC = 0.7978845608028654f;
  const float u = kC * (x + 0.044715f * x * x * x);
  const float t = std::tanh(u);
  const float du = kC * (1.0f + 3.0f * 0.044715f * x * x);
  return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * du;
}

}  // namespace skipdepth::kernels

#endif  // SKIPDEPTH_SRC_KERNELS_H_
