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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "kernels.h"
#include "skipdepth/engine.h"
#include "skipdepth/errors.h"

namespace skipdepth {

void TrainConfig::Validate(int n_layers) const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw InvalidArgument("warmup_fraction must lie in [0, 1)");
  }
  if (!(layerdrop_rate >= 0.0 && layerdrop_rate < 1.0)) {
    throw InvalidArgument("layerdrop_rate must lie in [0, 1)");
  }
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (exit_aux_weight < 0.0) throw InvalidArgument("exit_aux_weight must be >= 0");
  if (plan) {
    plan->Validate();
    if (plan->n_layers != n_layers) {
      throw InvalidArgument("plan n_layers does not match the model");
    }
  }
}

std::vector<LayerMask> TrainingMasks(const Example& ex,
                                     const std::optional<SkipPlan>& plan,
                                     int n_layers) {
  const size_t len = ex.prompt.size() + ex.response.size() - 1;
  std::vector<LayerMask> masks(len, LayerMask::All(n_layers));
  if (plan) {
    const LayerMask response = PlanToMask(*plan);
    for (size_t t = ex.prompt.size(); t < len; ++t) masks[t] = response;
  }
  return masks;
}

LossValue CrossEntropyLoss(const Logits& logits, const Example& ex) {
  const int m = static_cast<int>(ex.prompt.size());
  const int n = static_cast<int>(ex.response.size());
  if (m < 1 || n < 1) throw InvalidArgument("empty prompt or response");
  if (logits.rows < m + n - 1) {
    throw InvalidArgument("logits do not cover the example");
  }
  LossValue loss;
  std::vector<double> lp(static_cast<size_t>(logits.cols));
  for (int i = 0; i < n; ++i) {
    const int target = ex.response[static_cast<size_t>(i)];
    LogSoftmax(logits.row(m - 1 + i), lp);
    double v = lp[static_cast<size_t>(target)];
    if (!(v >= kMinLogProb)) {
      v = kMinLogProb;
      loss.clamped = true;
    }
    loss.sum -= v;
    ++loss.tokens;
  }
  return loss;
}

// --- Forward tape and reverse pass -----------------------------------------

namespace {

struct LayerTape {
  std::vector<int> rows;  // executed positions, ascending
  std::vector<float> xhat1, rstd1, a1, q, k, v, probs, att;
  std::vector<float> xhat2, rstd2, a2, up_pre, up_act;
};

// dW += x^T dy, db += sum_r dy for x [rows x in], dy [rows x out].
void AccumulateWeightGrad(const float* x, const float* dy, int rows, int in,
                          int out, float* dw, float* db) {
  for (int r = 0; r < rows; ++r) {
    const float* xr = x + static_cast<size_t>(r) * in;
    const float* dyr = dy + static_cast<size_t>(r) * out;
    for (int k = 0; k < in; ++k) {
      const float xv = xr[k];
      if (xv == 0.0f) continue;
      float* dwk = dw + static_cast<size_t>(k) * out;
      for (int j = 0; j < out; ++j) dwk[j] += xv * dyr[j];
    }
    if (db) {
      for (int j = 0; j < out; ++j) db[j] += dyr[j];
    }
  }
}

// dx += dy W^T for dy [rows x out], W [in x out].
void AccumulateInputGrad(const float* dy, int rows, int out, const float* w,
                         int in, float* dx) {
  for (int r = 0; r < rows; ++r) {
    const float* dyr = dy + static_cast<size_t>(r) * out;
    float* dxr = dx + static_cast<size_t>(r) * in;
    for (int k = 0; k < in; ++k) {
      const float* wk = w + static_cast<size_t>(k) * out;
      float acc = 0.0f;
      for (int j = 0; j < out; ++j) acc += dyr[j] * wk[j];
      dxr[k] += acc;
    }
  }
}

// Cross-entropy of the shared head on hidden row `h` against `target`. When
// `grads` is set, accumulates coef * d(loss) into the head parameters and
// into `dh`.
double HeadLoss(const Weights& w, const float* h, int target, double coef,
                Weights* grads, float* dh, bool* clamped) {
  const auto& c = w.config();
  const int d = c.d_model;
  const int vocab = c.vocab_size;
  std::vector<float> xhat(static_cast<size_t>(d)), a(static_cast<size_t>(d));
  const float rstd =
      kernels::LayerNormRow(h, d, w.final_norm_gain().data(),
                            w.final_norm_bias().data(), a.data(), xhat.data());
  std::vector<float> logits(static_cast<size_t>(vocab));
  const float* emb = w.token_embedding().data();
  for (int v = 0; v < vocab; ++v) {
    const float* e = emb + static_cast<size_t>(v) * d;
    float dot = 0.0f;
    for (int i = 0; i < d; ++i) dot += a[i] * e[i];
    logits[v] = dot;
  }
  std::vector<double> lp(static_cast<size_t>(vocab));
  LogSoftmax(logits, lp);
  double value = lp[static_cast<size_t>(target)];
  if (!(value >= kMinLogProb)) {
    value = kMinLogProb;
    if (clamped) *clamped = true;
  }
  if (grads) {
    float* demb = grads->token_embedding().data();
    std::vector<float> da(static_cast<size_t>(d), 0.0f);
    for (int v = 0; v < vocab; ++v) {
      const double p = std::exp(lp[static_cast<size_t>(v)]);
      const float dz =
          static_cast<float>(coef * (p - (v == target ? 1.0 : 0.0)));
      if (dz == 0.0f) continue;
      const float* e = emb + static_cast<size_t>(v) * d;
      float* de = demb + static_cast<size_t>(v) * d;
      for (int i = 0; i < d; ++i) {
        de[i] += dz * a[i];
        da[i] += dz * e[i];
      }
    }
    kernels::LayerNormBackwardRow(da.data(), xhat.data(), rstd, d,
                                  w.final_norm_gain().data(),
                                  grads->final_norm_gain().data(),
                                  grads->final_norm_bias().data(), dh);
  }
  return -value;
}

}  // namespace

LossValue ComputeGradients(const Weights& w, const Example& ex,
                           std::span<const LayerMask> masks, Weights* grads,
                           double exit_aux_weight) {
  const auto& c = w.config();
  ex.Validate(c.vocab_size, c.max_seq_len);
  const std::vector<int> tokens = ex.InputTokens();
  const int len = static_cast<int>(tokens.size());
  const int m = static_cast<int>(ex.prompt.size());
  if (static_cast<int>(masks.size()) != len) {
    throw InvalidArgument("masks must cover the teacher-forced input");
  }
  for (const auto& mask : masks) {
    if (mask.size() != c.n_layers) {
      throw InvalidArgument("mask length must equal n_layers");
    }
  }
  if (grads && grads->config() != c) {
    throw InvalidArgument("gradient buffer shape mismatch");
  }

  const int d = c.d_model;
  const int f = c.d_ff;
  const int heads = c.n_heads;
  const int hd = c.head_dim();
  const int n_layers = c.n_layers;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  auto target_at = [&](int t) { return ex.response[static_cast<size_t>(t - m + 1)]; };

  LossValue loss;
  HiddenState h(len, d);
  for (int t = 0; t < len; ++t) Embed(w, tokens[t], t, h.row(t));

  const bool aux = exit_aux_weight > 0.0 && n_layers > 1;
  const double aux_coef = aux ? exit_aux_weight / (n_layers - 1) : 0.0;
  std::vector<std::vector<float>> aux_grad;
  if (aux && grads) aux_grad.assign(static_cast<size_t>(n_layers - 1), {});

  std::vector<LayerTape> tape(static_cast<size_t>(n_layers));
  for (int l = 0; l < n_layers; ++l) {
    LayerTape& lt = tape[static_cast<size_t>(l)];
    const auto p = w.layer(l);
    for (int t = 0; t < len; ++t) {
      if (masks[t][l]) lt.rows.push_back(t);
    }
    const int n = static_cast<int>(lt.rows.size());
    const size_t nd = static_cast<size_t>(n) * d;
    lt.xhat1.resize(nd);
    lt.rstd1.resize(static_cast<size_t>(n));
    lt.a1.resize(nd);
    lt.q.resize(nd);
    lt.k.resize(nd);
    lt.v.resize(nd);
    lt.att.assign(nd, 0.0f);
    lt.probs.assign(static_cast<size_t>(heads) * n * n, 0.0f);
    lt.xhat2.resize(nd);
    lt.rstd2.resize(static_cast<size_t>(n));
    lt.a2.resize(nd);
    lt.up_pre.resize(static_cast<size_t>(n) * f);
    lt.up_act.resize(static_cast<size_t>(n) * f);
    if (n == 0) continue;

    for (int r = 0; r < n; ++r) {
      lt.rstd1[r] = kernels::LayerNormRow(
          h.row(lt.rows[r]).data(), d, p.ln1_gain.data(), p.ln1_bias.data(),
          &lt.a1[static_cast<size_t>(r) * d], &lt.xhat1[static_cast<size_t>(r) * d]);
    }
    kernels::MatMulBias(lt.a1.data(), n, d, p.wq.data(), p.bq.data(), d, lt.q.data());
    kernels::MatMulBias(lt.a1.data(), n, d, p.wk.data(), p.bk.data(), d, lt.k.data());
    kernels::MatMulBias(lt.a1.data(), n, d, p.wv.data(), p.bv.data(), d, lt.v.data());

    std::vector<float> scores(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (int hh = 0; hh < heads; ++hh) {
        const float* qh = &lt.q[static_cast<size_t>(i) * d + hh * hd];
        float max_score = -std::numeric_limits<float>::infinity();
        for (int j = 0; j <= i; ++j) {
          const float* kh = &lt.k[static_cast<size_t>(j) * d + hh * hd];
          float dot = 0.0f;
          for (int x = 0; x < hd; ++x) dot += qh[x] * kh[x];
          scores[j] = dot * scale;
          max_score = std::max(max_score, scores[j]);
        }
        float denom = 0.0f;
        for (int j = 0; j <= i; ++j) {
          scores[j] = std::exp(scores[j] - max_score);
          denom += scores[j];
        }
        float* prob = &lt.probs[(static_cast<size_t>(hh) * n + i) * n];
        float* oh = &lt.att[static_cast<size_t>(i) * d + hh * hd];
        for (int j = 0; j <= i; ++j) {
          const float pj = scores[j] / denom;
          prob[j] = pj;
          const float* vh = &lt.v[static_cast<size_t>(j) * d + hh * hd];
          for (int x = 0; x < hd; ++x) oh[x] += pj * vh[x];
        }
      }
    }

    std::vector<float> proj(nd);
    kernels::MatMulBias(lt.att.data(), n, d, p.wo.data(), p.bo.data(), d,
                        proj.data());
    for (int r = 0; r < n; ++r) {
      float* hr = h.row(lt.rows[r]).data();
      for (int x = 0; x < d; ++x) hr[x] += proj[static_cast<size_t>(r) * d + x];
      lt.rstd2[r] = kernels::LayerNormRow(
          hr, d, p.ln2_gain.data(), p.ln2_bias.data(),
          &lt.a2[static_cast<size_t>(r) * d], &lt.xhat2[static_cast<size_t>(r) * d]);
    }
    kernels::MatMulBias(lt.a2.data(), n, d, p.w_up.data(), p.b_up.data(), f,
                        lt.up_pre.data());
    for (size_t i = 0; i < lt.up_pre.size(); ++i) {
      lt.up_act[i] = kernels::Gelu(lt.up_pre[i]);
    }
    kernels::MatMulBias(lt.up_act.data(), n, f, p.w_down.data(),
                        p.b_down.data(), d, proj.data());
    for (int r = 0; r < n; ++r) {
      float* hr = h.row(lt.rows[r]).data();
      for (int x = 0; x < d; ++x) hr[x] += proj[static_cast<size_t>(r) * d + x];
    }

    if (aux && l < n_layers - 1) {
      if (grads) aux_grad[static_cast<size_t>(l)].assign(static_cast<size_t>(len) * d, 0.0f);
      for (int t = m - 1; t < len; ++t) {
        if (!masks[t][l]) continue;
        float* dh = grads ? &aux_grad[static_cast<size_t>(l)][static_cast<size_t>(t) * d]
                          : nullptr;
        loss.sum += aux_coef * HeadLoss(w, h.row(t).data(), target_at(t),
                                        aux_coef, grads, dh, &loss.clamped);
      }
    }
  }

  HiddenState dh(len, d);
  for (int t = m - 1; t < len; ++t) {
    loss.sum += HeadLoss(w, h.row(t).data(), target_at(t), 1.0, grads,
                         grads ? dh.row(t).data() : nullptr, &loss.clamped);
    ++loss.tokens;
  }
  if (!grads) return loss;

  for (int l = n_layers - 1; l >= 0; --l) {
    if (aux && l < n_layers - 1) {
      const auto& ag = aux_grad[static_cast<size_t>(l)];
      for (size_t i = 0; i < ag.size(); ++i) dh.data[i] += ag[i];
    }
    const LayerTape& lt = tape[static_cast<size_t>(l)];
    const int n = static_cast<int>(lt.rows.size());
    if (n == 0) continue;
    const auto p = w.layer(l);
    auto g = grads->layer(l);
    const size_t nd = static_cast<size_t>(n) * d;

    std::vector<float> dout(nd);
    for (int r = 0; r < n; ++r) {
      std::copy_n(dh.row(lt.rows[r]).data(), d, &dout[static_cast<size_t>(r) * d]);
    }

    // MLP
    AccumulateWeightGrad(lt.up_act.data(), dout.data(), n, f, d,
                         g.w_down.data(), g.b_down.data());
    std::vector<float> dup(static_cast<size_t>(n) * f, 0.0f);
    AccumulateInputGrad(dout.data(), n, d, p.w_down.data(), f, dup.data());
    for (size_t i = 0; i < dup.size(); ++i) {
      dup[i] *= kernels::GeluGrad(lt.up_pre[i]);
    }
    AccumulateWeightGrad(lt.a2.data(), dup.data(), n, d, f, g.w_up.data(),
                         g.b_up.data());
    std::vector<float> da2(nd, 0.0f);
    AccumulateInputGrad(dup.data(), n, f, p.w_up.data(), d, da2.data());
    std::vector<float> dh1 = dout;
    for (int r = 0; r < n; ++r) {
      const size_t o = static_cast<size_t>(r) * d;
      kernels::LayerNormBackwardRow(&da2[o], &lt.xhat2[o], lt.rstd2[r], d,
                                    p.ln2_gain.data(), g.ln2_gain.data(),
                                    g.ln2_bias.data(), &dh1[o]);
    }

    // Attention
    AccumulateWeightGrad(lt.att.data(), dh1.data(), n, d, d, g.wo.data(),
                         g.bo.data());
    std::vector<float> datt(nd, 0.0f);
    AccumulateInputGrad(dh1.data(), n, d, p.wo.data(), d, datt.data());
    std::vector<float> dq(nd, 0.0f), dk(nd, 0.0f), dv(nd, 0.0f);
    std::vector<float> dp(static_cast<size_t>(n));
    for (int hh = 0; hh < heads; ++hh) {
      for (int i = 0; i < n; ++i) {
        const float* prob = &lt.probs[(static_cast<size_t>(hh) * n + i) * n];
        const float* dai = &datt[static_cast<size_t>(i) * d + hh * hd];
        float weighted = 0.0f;
        for (int j = 0; j <= i; ++j) {
          const float* vh = &lt.v[static_cast<size_t>(j) * d + hh * hd];
          float* dvh = &dv[static_cast<size_t>(j) * d + hh * hd];
          float dot = 0.0f;
          for (int x = 0; x < hd; ++x) {
            dot += dai[x] * vh[x];
            dvh[x] += prob[j] * dai[x];
          }
          dp[j] = dot;
          weighted += prob[j] * dot;
        }
        const float* qh = &lt.q[static_cast<size_t>(i) * d + hh * hd];
        float* dqh = &dq[static_cast<size_t>(i) * d + hh * hd];
        for (int j = 0; j <= i; ++j) {
          const float ds = prob[j] * (dp[j] - weighted) * scale;
          if (ds == 0.0f) continue;
          const float* kh = &lt.k[static_cast<size_t>(j) * d + hh * hd];
          float* dkh = &dk[static_cast<size_t>(j) * d + hh * hd];
          for (int x = 0; x < hd; ++x) {
            dqh[x] += ds * kh[x];
            dkh[x] += ds * qh[x];
          }
        }
      }
    }
    AccumulateWeightGrad(lt.a1.data(), dq.data(), n, d, d, g.wq.data(), g.bq.data());
    // Softmax ignores a shift shared by all of a query's scores, so bk has
    // no effect on the output and its gradient stays exactly zero.
    AccumulateWeightGrad(lt.a1.data(), dk.data(), n, d, d, g.wk.data(), nullptr);
    AccumulateWeightGrad(lt.a1.data(), dv.data(), n, d, d, g.wv.data(), g.bv.data());
    std::vector<float> da1(nd, 0.0f);
    AccumulateInputGrad(dq.data(), n, d, p.wq.data(), d, da1.data());
    AccumulateInputGrad(dk.data(), n, d, p.wk.data(), d, da1.data());
    AccumulateInputGrad(dv.data(), n, d, p.wv.data(), d, da1.data());
    for (int r = 0; r < n; ++r) {
      const size_t o = static_cast<size_t>(r) * d;
      kernels::LayerNormBackwardRow(&da1[o], &lt.xhat1[o], lt.rstd1[r], d,
                                    p.ln1_gain.data(), g.ln1_gain.data(),
                                    g.ln1_bias.data(), &dh1[o]);
      std::copy_n(&dh1[o], d, dh.row(lt.rows[r]).data());
    }
  }

  float* dte = grads->token_embedding().data();
  float* dpe = grads->position_embedding().data();
  for (int t = 0; t < len; ++t) {
    const float* g = dh.row(t).data();
    float* te = dte + static_cast<size_t>(tokens[t]) * d;
    float* pe = dpe + static_cast<size_t>(t) * d;
    for (int x = 0; x < d; ++x) {
      te[x] += g[x];
      pe[x] += g[x];
    }
  }
  return loss;
}

double HeldOutLoss(const Weights& w, std::span<const Example> corpus,
                   const std::optional<SkipPlan>& plan) {
  if (corpus.empty()) throw InvalidArgument("empty evaluation corpus");
  double sum = 0.0;
  int tokens = 0;
  for (const auto& ex : corpus) {
    const auto masks = TrainingMasks(ex, plan, w.config().n_layers);
    const auto logits = ForwardMasked(w, ex.InputTokens(), masks);
    const LossValue l = CrossEntropyLoss(logits, ex);
    sum += l.sum;
    tokens += l.tokens;
  }
  return sum / tokens;
}

// --- Fine-tuning ------------------------------------------------------------

TrainResult Finetune(const Weights& init, std::span<const Example> train,
                     std::span<const Example> heldout,
                     const TrainConfig& config) {
  const auto& c = init.config();
  config.Validate(c.n_layers);
  if (train.empty()) throw InvalidArgument("empty training corpus");

  TrainResult result{init, 0.0, 0.0, {}};
  Weights& w = result.weights;
  if (!heldout.empty()) result.initial_loss = HeldOutLoss(w, heldout, config.plan);

  const size_t n_params = w.size();
  std::vector<float> adam_m(n_params, 0.0f), adam_v(n_params, 0.0f);
  Weights grads(c);
  std::mt19937_64 rng(config.seed);
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  const int steps_per_epoch =
      static_cast<int>((train.size() + config.batch_size - 1) / config.batch_size);
  const int total_steps = steps_per_epoch * config.epochs;
  const int warmup_steps =
      static_cast<int>(std::floor(config.warmup_fraction * total_steps));
  const LayerMask plan_mask =
      config.plan ? PlanToMask(*config.plan) : LayerMask::All(c.n_layers);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Draw from the generator directly so the order does not depend on the
    // standard library's shuffle.
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<size_t>(rng() % i)]);
    }
    double epoch_sum = 0.0;
    int epoch_tokens = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      std::fill(grads.data().begin(), grads.data().end(), 0.0f);
      double batch_sum = 0.0;
      int batch_tokens = 0;
      for (size_t b = start; b < end; ++b) {
        const Example& ex = train[order[b]];
        auto masks = TrainingMasks(ex, config.plan, c.n_layers);
        if (config.layerdrop_rate > 0.0) {
          LayerMask keep = plan_mask;
          LayerMask kept_all = LayerMask::All(c.n_layers);
          for (int l = 0; l < c.n_layers; ++l) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            if (u < config.layerdrop_rate) {
              keep.Set(l, false);
              kept_all.Set(l, false);
            }
          }
          for (size_t t = 0; t < masks.size(); ++t) {
            if (t >= ex.prompt.size()) {
              masks[t] = keep;
            } else if (!config.deep_encoding) {
              masks[t] = kept_all;
            }
          }
        }
        if (config.deep_encoding) {
          for (size_t t = 0; t < ex.prompt.size(); ++t) {
            RecordPromptDepth(masks[t].Popcount(), c.n_layers);
          }
        }
        const LossValue l =
            ComputeGradients(w, ex, masks, &grads, config.exit_aux_weight);
        batch_sum += l.sum;
        batch_tokens += l.tokens;
      }
      if (!std::isfinite(batch_sum)) {
        throw TrainingDiverged("loss became non-finite at step " +
                               std::to_string(step));
      }
      epoch_sum += batch_sum;
      epoch_tokens += batch_tokens;

      const float inv = 1.0f / static_cast<float>(batch_tokens);
      double norm2 = 0.0;
      for (float& gv : grads.data()) {
        gv *= inv;
        norm2 += static_cast<double>(gv) * gv;
      }
      if (!std::isfinite(norm2)) {
        throw TrainingDiverged("gradient became non-finite at step " +
                               std::to_string(step));
      }
      const double norm = std::sqrt(norm2);
      const float clip = config.grad_clip > 0.0 && norm > config.grad_clip
                             ? static_cast<float>(config.grad_clip / norm)
                             : 1.0f;
      const double lr =
          warmup_steps > 0 && step < warmup_steps
              ? config.learning_rate * (step + 1) / warmup_steps
              : config.learning_rate;
      ++step;
      const double bc1 = 1.0 - std::pow(kBeta1, step);
      const double bc2 = 1.0 - std::pow(kBeta2, step);
      auto params = w.data();
      const auto gvals = grads.data();
      for (size_t i = 0; i < n_params; ++i) {
        const float gv = gvals[i] * clip;
        adam_m[i] = static_cast<float>(kBeta1 * adam_m[i] + (1.0 - kBeta1) * gv);
        adam_v[i] =
            static_cast<float>(kBeta2 * adam_v[i] + (1.0 - kBeta2) * gv * gv);
        const double mhat = adam_m[i] / bc1;
        const double vhat = adam_v[i] / bc2;
        params[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + kEps));
      }
    }
    result.epoch_losses.push_back(epoch_sum / std::max(epoch_tokens, 1));
  }

  if (!heldout.empty()) {
    result.heldout_loss = HeldOutLoss(w, heldout, config.plan);
    if (!std::isfinite(result.heldout_loss)) {
      throw TrainingDiverged("held-out loss is non-finite");
    }
  }
  return result;
}

// --- Greedy layer search ----------------------------------------------------

GreedySearchResult GreedyLayerSearch(const Weights& w,
                                     std::span<const Example> heldout,
                                     int target_m) {
  const int n_layers = w.config().n_layers;
  if (target_m < 1 || target_m > n_layers) {
    throw InvalidArgument("target_m must lie in [1, n_layers]");
  }
  GreedySearchResult result;
  result.plan = FullPlan(n_layers);
  result.plan.target_ratio = static_cast<double>(n_layers) / target_m;
  auto& kept = result.plan.retained;

  while (static_cast<int>(kept.size()) > target_m) {
    std::vector<int> candidates;
    for (int layer : kept) {
      if (layer != 0 && layer != n_layers - 1) candidates.push_back(layer);
    }
    if (candidates.empty()) {
      // Only {0, N-1} remain and the budget is one layer: the LM head reads
      // the top layer, so drop the bottom one.
      candidates.push_back(kept.front());
    }
    int best_layer = -1;
    double best_loss = std::numeric_limits<double>::infinity();
    // Descending so that strict improvement keeps the higher index on ties.
    for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
      SkipPlan trial = result.plan;
      trial.retained.erase(
          std::find(trial.retained.begin(), trial.retained.end(), *it));
      const double loss = HeldOutLoss(w, heldout, trial);
      ++result.evaluations;
      if (loss < best_loss) {
        best_loss = loss;
        best_layer = *it;
      }
    }
    kept.erase(std::find(kept.begin(), kept.end(), best_layer));
    result.removed.push_back(best_layer);
    result.losses.push_back(best_loss);
  }
  return result;
}

// --- Strategy sweep ---------------------------------------------------------

double LossReport::Loss(const std::string& strategy, double ratio) const {
  for (const auto& row : rows) {
    if (row.strategy == strategy && row.ratio == ratio) return row.loss;
  }
  throw InvalidArgument("no loss recorded for " + strategy);
}

std::string LossReport::ToCsv() const {
  std::ostringstream os;
  os.precision(17);
  os << "strategy,ratio,loss\n";
  for (const auto& row : rows) {
    os << row.strategy << ',' << row.ratio << ',' << row.loss << '\n';
  }
  return os.str();
}

LossReport StrategyLossSweep(const Weights& base,
                             std::span<const Example> train,
                             std::span<const Example> heldout,
                             std::span<const double> ratios,
                             const TrainConfig& config) {
  const int n_layers = base.config().n_layers;
  LossReport report;
  for (double ratio : ratios) {
    const SkipPlan unified = UnifiedRetainedLayers(n_layers, ratio);
    const int budget = static_cast<int>(unified.retained.size());
    std::vector<std::pair<std::string, SkipPlan>> plans = {
        {"skip-top", TopRetainedLayers(n_layers, budget)},
        {"skip-bottom", BottomRetainedLayers(n_layers, budget)},
        {"unified", unified},
        {"greedy", GreedyLayerSearch(base, heldout, budget).plan},
    };
    for (auto& [name, plan] : plans) {
      plan.target_ratio = ratio;
      TrainConfig cfg = config;
      cfg.plan = plan;
      const TrainResult r = Finetune(base, train, heldout, cfg);
      report.rows.push_back({name, ratio, r.heldout_loss, plan});
    }
  }
  return report;
}

}  // namespace skipdepth
