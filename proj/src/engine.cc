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

#include "skipdepth/engine.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "skipdepth/errors.h"

namespace skipdepth {

namespace {

using Clock = std::chrono::steady_clock;

double SecondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::atomic<uint64_t> g_prompt_tokens{0};
std::atomic<uint64_t> g_prompt_violations{0};

std::vector<std::string> Split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

double ParseNumber(const std::string& text, const std::string& what) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("bad " + what + ": '" + text + "'");
  }
}

int ParseInt(const std::string& text, const std::string& what) {
  const double v = ParseNumber(text, what);
  if (v != std::floor(v)) throw InvalidArgument(what + " must be an integer");
  return static_cast<int>(v);
}

}  // namespace

// --- Strategy ---------------------------------------------------------------

Strategy Strategy::Unified(double ratio, RetentionRule rule) {
  Strategy s;
  s.kind = StrategyKind::kUnified;
  s.ratio = ratio;
  s.rule = rule;
  return s;
}

Strategy Strategy::SkipTop(int keep) {
  Strategy s;
  s.kind = StrategyKind::kSkipTop;
  s.keep = keep;
  return s;
}

Strategy Strategy::SkipBottom(int keep) {
  Strategy s;
  s.kind = StrategyKind::kSkipBottom;
  s.keep = keep;
  return s;
}

Strategy Strategy::SkipDecode(PositionalSchedule schedule) {
  Strategy s;
  s.kind = StrategyKind::kSkipDecode;
  s.schedule = schedule;
  return s;
}

Strategy Strategy::EarlyExit(double threshold) {
  Strategy s;
  s.kind = StrategyKind::kEarlyExit;
  s.threshold = threshold;
  return s;
}

Strategy Strategy::Parse(const std::string& text, int n_layers) {
  const auto parts = Split(text, ':');
  if (parts.empty()) throw InvalidArgument("empty strategy");
  const std::string& name = parts[0];
  const size_t args = parts.size() - 1;
  if (name == "full" && args == 0) return Full();
  if (name == "unified" && (args == 1 || args == 2)) {
    return Unified(ParseNumber(parts[1], "ratio"),
                   args == 2 ? ParseRetentionRule(parts[2])
                             : RetentionRule::kModulo);
  }
  if (name == "skip-top" && args == 1) {
    return SkipTop(ParseInt(parts[1], "layer count"));
  }
  if (name == "skip-bottom" && args == 1) {
    return SkipBottom(ParseInt(parts[1], "layer count"));
  }
  if (name == "skipdecode" && args == 0) {
    return SkipDecode({128, 1, n_layers});
  }
  if (name == "skipdecode" && args == 3) {
    return SkipDecode({ParseInt(parts[3], "max positions"),
                       ParseInt(parts[1], "min active"),
                       ParseInt(parts[2], "max active")});
  }
  if (name == "early-exit" && args == 1) {
    return EarlyExit(ParseNumber(parts[1], "threshold"));
  }
  throw InvalidArgument("unknown strategy '" + text + "'");
}

std::string Strategy::Name() const {
  std::ostringstream os;
  switch (kind) {
    case StrategyKind::kFull:
      os << "full";
      break;
    case StrategyKind::kUnified:
      os << "unified:" << ratio;
      if (rule != RetentionRule::kModulo) os << ':' << RetentionRuleName(rule);
      break;
    case StrategyKind::kSkipTop:
      os << "skip-top:" << keep;
      break;
    case StrategyKind::kSkipBottom:
      os << "skip-bottom:" << keep;
      break;
    case StrategyKind::kSkipDecode:
      os << "skipdecode:" << schedule.min_active << ':' << schedule.max_active
         << ':' << schedule.max_positions;
      break;
    case StrategyKind::kEarlyExit:
      os << "early-exit:" << threshold;
      break;
  }
  return os.str();
}

std::optional<SkipPlan> Strategy::Plan(int n_layers) const {
  switch (kind) {
    case StrategyKind::kFull:
      return FullPlan(n_layers);
    case StrategyKind::kUnified:
      return UnifiedRetainedLayers(n_layers, ratio, rule);
    case StrategyKind::kSkipTop:
      return TopRetainedLayers(n_layers, keep);
    case StrategyKind::kSkipBottom:
      return BottomRetainedLayers(n_layers, keep);
    default:
      return std::nullopt;
  }
}

LayerMask Strategy::MaskAt(int n_layers, int response_index) const {
  if (kind == StrategyKind::kSkipDecode) {
    return SkipDecodeMask(n_layers, response_index, schedule);
  }
  if (kind == StrategyKind::kEarlyExit) {
    throw UnsupportedStrategy("early exit has no input-independent mask");
  }
  return PlanToMask(*Plan(n_layers));
}

void Strategy::Validate(int n_layers) const {
  switch (kind) {
    case StrategyKind::kSkipDecode:
      schedule.Validate(n_layers);
      break;
    case StrategyKind::kEarlyExit:
      if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw InvalidArgument("early-exit threshold must lie in (0, 1]");
      }
      break;
    default:
      (void)Plan(n_layers);  // throws on bad ratio / count
  }
}

bool operator==(const Strategy& a, const Strategy& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case StrategyKind::kFull:
      return true;
    case StrategyKind::kUnified:
      return a.ratio == b.ratio && a.rule == b.rule;
    case StrategyKind::kSkipTop:
    case StrategyKind::kSkipBottom:
      return a.keep == b.keep;
    case StrategyKind::kSkipDecode:
      return a.schedule.min_active == b.schedule.min_active &&
             a.schedule.max_active == b.schedule.max_active &&
             a.schedule.max_positions == b.schedule.max_positions;
    case StrategyKind::kEarlyExit:
      return a.threshold == b.threshold;
  }
  return false;
}

void DecodeConfig::Validate(int n_layers) const {
  strategy.Validate(n_layers);
  if (beam_size < 1) throw InvalidArgument("beam_size must be >= 1");
  if (max_new_tokens < 1) throw InvalidArgument("max_new_tokens must be >= 1");
}

// --- Audit ------------------------------------------------------------------

PromptDepthAudit PromptAuditSnapshot() {
  return {g_prompt_tokens.load(), g_prompt_violations.load()};
}

void ResetPromptAudit() {
  g_prompt_tokens = 0;
  g_prompt_violations = 0;
}

void RecordPromptDepth(int executed_layers, int n_layers) {
  ++g_prompt_tokens;
  if (executed_layers != n_layers) ++g_prompt_violations;
}

// --- Decoding primitives ----------------------------------------------------

DecodeState::DecodeState(const ModelConfig& config, int capacity, int pad_slots)
    : cache(config.n_layers, capacity, config.d_model),
      pad(pad_slots),
      length(pad_slots),
      depth(static_cast<size_t>(capacity), 0),
      resume(static_cast<size_t>(capacity) * config.d_model, 0.0f) {
  if (pad_slots < 0 || pad_slots > capacity) {
    throw InvalidArgument("padding exceeds cache capacity");
  }
  for (int s = 0; s < pad_slots; ++s) cache.MarkPad(s);
}

std::vector<std::vector<float>> PrefillBatch(
    const Weights& w, std::span<DecodeState* const> states,
    std::span<const std::vector<int>> prompts,
    std::span<GenerationTrace* const> traces) {
  const auto& c = w.config();
  if (states.size() != prompts.size()) {
    throw InvalidArgument("one prompt per decode state required");
  }
  if (!traces.empty() && traces.size() != states.size()) {
    throw InvalidArgument("one trace per decode state required");
  }
  const int d = c.d_model;

  std::vector<HiddenState> hidden;
  hidden.reserve(states.size());
  for (size_t i = 0; i < states.size(); ++i) {
    DecodeState& st = *states[i];
    const auto& prompt = prompts[i];
    if (prompt.empty()) throw InvalidArgument("prompt must be non-empty");
    if (st.length != st.pad) throw InvalidArgument("prefill needs a fresh state");
    const int len = static_cast<int>(prompt.size());
    if (len > c.max_seq_len) {
      throw SequenceOverflow("prompt exceeds max_seq_len");
    }
    if (st.pad + len > st.cache.capacity()) {
      throw SequenceOverflow("prompt exceeds cache capacity");
    }
    HiddenState h(len, d);
    for (int t = 0; t < len; ++t) Embed(w, prompt[t], t, h.row(t));
    hidden.push_back(std::move(h));
  }

  std::vector<RowRef> rows;
  for (int l = 0; l < c.n_layers; ++l) {
    rows.clear();
    for (size_t i = 0; i < states.size(); ++i) {
      for (int t = 0; t < hidden[i].rows; ++t) {
        rows.push_back({hidden[i].row(t).data(), &states[i]->cache,
                        states[i]->pad + t});
      }
    }
    LayerForward(w, l, rows);
  }

  std::vector<std::vector<float>> logits(states.size());
  for (size_t i = 0; i < states.size(); ++i) {
    DecodeState& st = *states[i];
    const int len = hidden[i].rows;
    for (int t = 0; t < len; ++t) {
      const int slot = st.pad + t;
      st.depth[static_cast<size_t>(slot)] = c.n_layers;
      std::copy_n(hidden[i].row(t).data(), d,
                  st.resume.begin() + static_cast<ptrdiff_t>(slot) * d);
      const auto layers = st.cache.LayersAt(slot);
      RecordPromptDepth(static_cast<int>(layers.size()), c.n_layers);
      if (!traces.empty() && traces[i]) {
        traces[i]->prompt_executed.push_back(layers);
      }
    }
    st.length += len;
    st.prompt_length = len;
    if (!traces.empty() && traces[i]) traces[i]->prompt_length = len;
    logits[i].resize(static_cast<size_t>(c.vocab_size));
    LmHeadRow(w, hidden[i].row(len - 1), logits[i]);
  }
  return logits;
}

std::vector<float> Prefill(const Weights& w, std::span<const int> prompt,
                           DecodeState& state, GenerationTrace* trace) {
  DecodeState* states[] = {&state};
  const std::vector<int> prompts[] = {{prompt.begin(), prompt.end()}};
  GenerationTrace* traces[] = {trace};
  return std::move(
      PrefillBatch(w, states, prompts,
                   trace ? std::span<GenerationTrace* const>(traces)
                         : std::span<GenerationTrace* const>())[0]);
}

std::vector<StepOutput> DecodeStepBatch(const Weights& w,
                                        std::span<DecodeState* const> states,
                                        std::span<const int> tokens,
                                        const LayerMask& mask) {
  const auto& c = w.config();
  if (states.size() != tokens.size()) {
    throw InvalidArgument("one token per decode state required");
  }
  if (mask.size() != c.n_layers) {
    throw InvalidArgument("mask length must equal n_layers");
  }
  const auto start = Clock::now();
  const int n = static_cast<int>(states.size());
  const auto executed = mask.Layers();

  HiddenState h(n, c.d_model);
  for (int i = 0; i < n; ++i) {
    DecodeState& st = *states[i];
    const int slot = st.length;
    if (slot >= st.cache.capacity()) {
      throw SequenceOverflow("decode step exceeds cache capacity");
    }
    Embed(w, tokens[i], st.next_position(), h.row(i));
    for (int l : executed) {
      for (int s = st.pad; s < slot; ++s) {
        if (!st.cache.Has(l, s)) {
          throw ConsistencyError(
              "layer " + std::to_string(l) + " has no KV entry at position " +
              std::to_string(s - st.pad) + " under an input-independent plan");
        }
      }
    }
  }

  std::vector<RowRef> rows;
  for (int i = 0; i < n; ++i) {
    rows.push_back({h.row(i).data(), &states[i]->cache, states[i]->length});
  }
  for (int l : executed) LayerForward(w, l, rows);

  std::vector<StepOutput> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    DecodeState& st = *states[i];
    auto& o = out[static_cast<size_t>(i)];
    o.logits.resize(static_cast<size_t>(c.vocab_size));
    LmHeadRow(w, h.row(i), o.logits);
    o.record.position = st.next_position();
    o.record.token = tokens[i];
    o.record.executed = executed;
    st.depth[static_cast<size_t>(st.length)] =
        executed.empty() ? 0 : executed.back() + 1;
    std::copy_n(h.row(i).data(), c.d_model,
                st.resume.begin() +
                    static_cast<ptrdiff_t>(st.length) * c.d_model);
    ++st.length;
  }
  const double elapsed = SecondsSince(start);
  for (auto& o : out) o.record.seconds = elapsed;
  return out;
}

StepOutput DecodeStep(const Weights& w, DecodeState& state, int token,
                      const LayerMask& mask) {
  DecodeState* states[] = {&state};
  const int tokens[] = {token};
  return std::move(DecodeStepBatch(w, states, tokens, mask)[0]);
}

ExitOutput EarlyExitStep(const Weights& w, DecodeState& state, int token,
                         double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw InvalidArgument("early-exit threshold must lie in (0, 1]");
  }
  threshold = std::max(threshold, std::numeric_limits<double>::min());
  const auto& c = w.config();
  const int d = c.d_model;
  const auto start = Clock::now();
  const int slot = state.length;
  if (slot >= state.cache.capacity()) {
    throw SequenceOverflow("decode step exceeds cache capacity");
  }

  ExitOutput out;
  out.record.position = state.next_position();
  out.record.token = token;
  out.logits.resize(static_cast<size_t>(c.vocab_size));

  std::vector<float> h(static_cast<size_t>(d));
  Embed(w, token, state.next_position(), h);

  std::vector<RowRef> rows;
  for (int l = 0; l < c.n_layers; ++l) {
    rows.clear();
    // Back-fill layer l for earlier tokens that exited below it. Their hidden
    // states resume from where they stopped; ascending slots keep causality.
    for (int s = state.pad; s < slot; ++s) {
      int& depth = state.depth[static_cast<size_t>(s)];
      if (depth == l) {
        rows.push_back(
            {state.resume.data() + static_cast<size_t>(s) * d, &state.cache, s});
        ++depth;
        ++out.record.recomputed_layers;
      } else if (depth < l) {
        throw ConsistencyError("early-exit bookkeeping lost a layer");
      }
    }
    rows.push_back({h.data(), &state.cache, slot});
    LayerForward(w, l, rows);
    out.record.executed.push_back(l);

    LmHeadRow(w, h, out.logits);
    if (Confidence(out.logits) >= threshold || l == c.n_layers - 1) {
      out.exit_layer = l;
      break;
    }
  }

  state.depth[static_cast<size_t>(slot)] = out.exit_layer + 1;
  std::copy(h.begin(), h.end(),
            state.resume.begin() + static_cast<ptrdiff_t>(slot) * d);
  ++state.length;
  out.record.seconds = SecondsSince(start);
  return out;
}

int Argmax(std::span<const float> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                          logits.begin());
}

// --- Generation -------------------------------------------------------------

namespace {

void CheckFits(const ModelConfig& c, size_t prompt_len,
               const DecodeConfig& config) {
  if (prompt_len == 0) throw InvalidArgument("prompt must be non-empty");
  // The last generated token is never fed back, so the deepest position used
  // is prompt_len + max_new_tokens - 2.
  if (prompt_len + static_cast<size_t>(config.max_new_tokens) - 1 >
      static_cast<size_t>(c.max_seq_len)) {
    throw SequenceOverflow("prompt plus max_new_tokens exceeds max_seq_len");
  }
}

Generation GreedyGenerate(const Weights& w, std::span<const int> prompt,
                          const DecodeConfig& config) {
  const auto& c = w.config();
  const auto start = Clock::now();
  Generation gen;
  DecodeState state(c, static_cast<int>(prompt.size()) + config.max_new_tokens);
  std::vector<float> logits = Prefill(w, prompt, state, &gen.trace);
  int next = Argmax(logits);
  gen.tokens.push_back(next);

  const bool early = config.strategy.kind == StrategyKind::kEarlyExit;
  std::optional<LayerMask> fixed;
  if (auto plan = config.strategy.Plan(c.n_layers)) fixed = PlanToMask(*plan);

  for (int k = 0; static_cast<int>(gen.tokens.size()) < config.max_new_tokens &&
                  next != config.eos_token;
       ++k) {
    TokenRecord rec;
    if (early) {
      ExitOutput o = EarlyExitStep(w, state, next, config.strategy.threshold);
      logits = std::move(o.logits);
      rec = std::move(o.record);
    } else {
      StepOutput o = DecodeStep(
          w, state, next, fixed ? *fixed : config.strategy.MaskAt(c.n_layers, k));
      logits = std::move(o.logits);
      rec = std::move(o.record);
    }
    next = Argmax(logits);
    rec.predicted = next;
    gen.trace.tokens.push_back(std::move(rec));
    gen.tokens.push_back(next);
  }
  gen.trace.total_seconds = SecondsSince(start);
  return gen;
}

struct Hypothesis {
  std::vector<int> tokens;
  double logprob = 0.0;
  DecodeState state;
  std::vector<TokenRecord> records;
};

struct Candidate {
  double logprob;
  int parent;
  int token;
};

// Highest log-prob first; ties by parent then token id.
bool Better(const Candidate& a, const Candidate& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  if (a.parent != b.parent) return a.parent < b.parent;
  return a.token < b.token;
}

void TopCandidates(std::span<const float> logits, int parent, double base,
                   int k, std::vector<Candidate>& out) {
  std::vector<double> lp(logits.size());
  LogSoftmax(logits, lp);
  std::vector<Candidate> all;
  all.reserve(lp.size());
  for (size_t v = 0; v < lp.size(); ++v) {
    all.push_back({base + lp[v], parent, static_cast<int>(v)});
  }
  const size_t keep = std::min(all.size(), static_cast<size_t>(k));
  std::partial_sort(all.begin(), all.begin() + static_cast<ptrdiff_t>(keep),
                    all.end(), Better);
  out.insert(out.end(), all.begin(), all.begin() + static_cast<ptrdiff_t>(keep));
}

Generation BeamGenerate(const Weights& w, std::span<const int> prompt,
                        const DecodeConfig& config) {
  const auto& c = w.config();
  const auto start = Clock::now();
  const int beam = config.beam_size;
  GenerationTrace prefill_trace;
  DecodeState root(c, static_cast<int>(prompt.size()) + config.max_new_tokens);
  const std::vector<float> first = Prefill(w, prompt, root, &prefill_trace);

  std::vector<Candidate> cands;
  TopCandidates(first, 0, 0.0, beam, cands);
  std::vector<Hypothesis> alive;
  for (const auto& cand : cands) {
    alive.push_back({{cand.token}, cand.logprob, root, {}});
  }

  struct Finished {
    double score;
    Hypothesis hyp;
  };
  std::vector<Finished> finished;
  auto retire = [&](std::vector<Hypothesis>& hyps) {
    std::vector<Hypothesis> keep;
    for (auto& hyp : hyps) {
      const bool done = hyp.tokens.back() == config.eos_token ||
                        static_cast<int>(hyp.tokens.size()) >=
                            config.max_new_tokens;
      if (done) {
        const double score =
            hyp.logprob / static_cast<double>(hyp.tokens.size());
        finished.push_back({score, std::move(hyp)});
      } else {
        keep.push_back(std::move(hyp));
      }
    }
    hyps = std::move(keep);
  };

  retire(alive);
  for (int k = 0; !alive.empty(); ++k) {
    const LayerMask mask = config.strategy.MaskAt(c.n_layers, k);
    std::vector<DecodeState*> states;
    std::vector<int> tokens;
    for (auto& hyp : alive) {
      states.push_back(&hyp.state);
      tokens.push_back(hyp.tokens.back());
    }
    auto outs = DecodeStepBatch(w, states, tokens, mask);
    cands.clear();
    for (size_t i = 0; i < alive.size(); ++i) {
      TopCandidates(outs[i].logits, static_cast<int>(i), alive[i].logprob, beam,
                    cands);
    }
    std::sort(cands.begin(), cands.end(), Better);
    cands.resize(std::min(cands.size(), static_cast<size_t>(beam)));

    std::vector<Hypothesis> next;
    for (const auto& cand : cands) {
      const auto& parent = alive[static_cast<size_t>(cand.parent)];
      Hypothesis h{parent.tokens, cand.logprob, parent.state, parent.records};
      TokenRecord rec = outs[static_cast<size_t>(cand.parent)].record;
      rec.predicted = cand.token;
      h.records.push_back(std::move(rec));
      h.tokens.push_back(cand.token);
      next.push_back(std::move(h));
    }
    alive = std::move(next);
    retire(alive);
  }

  // Stable: earlier-finished hypotheses win ties.
  const auto best = std::max_element(
      finished.begin(), finished.end(),
      [](const Finished& a, const Finished& b) { return a.score < b.score; });
  Generation gen;
  gen.tokens = best->hyp.tokens;
  gen.trace = std::move(prefill_trace);
  gen.trace.tokens = best->hyp.records;
  gen.trace.total_seconds = SecondsSince(start);
  return gen;
}

}  // namespace

Generation Generate(const Weights& w, std::span<const int> prompt,
                    const DecodeConfig& config) {
  const auto& c = w.config();
  config.Validate(c.n_layers);
  CheckFits(c, prompt.size(), config);
  if (config.beam_size == 1) return GreedyGenerate(w, prompt, config);
  if (config.strategy.kind == StrategyKind::kEarlyExit) {
    throw UnsupportedStrategy("early exit runs with beam_size 1 only");
  }
  return BeamGenerate(w, prompt, config);
}

Generation BeamSearch(const Weights& w, std::span<const int> prompt,
                      const DecodeConfig& config) {
  config.Validate(w.config().n_layers);
  CheckFits(w.config(), prompt.size(), config);
  if (config.strategy.kind == StrategyKind::kEarlyExit) {
    throw UnsupportedStrategy("early exit runs with beam_size 1 only");
  }
  return BeamGenerate(w, prompt, config);
}

std::vector<Generation> BatchGenerate(
    const Weights& w, std::span<const GenerationRequest> requests,
    const DecodeConfig& config) {
  const auto& c = w.config();
  config.Validate(c.n_layers);
  if (!config.strategy.InputIndependent()) {
    throw UnsupportedStrategy(
        "early exit cannot batch: sequences would exit at different depths");
  }
  if (config.beam_size != 1) {
    throw InvalidArgument("batch decoding runs greedy search only");
  }
  if (requests.empty()) throw InvalidArgument("empty batch");

  size_t longest = 0;
  for (const auto& req : requests) {
    if (req.strategy && !(*req.strategy == config.strategy)) {
      throw InvalidArgument("all requests in a batch must share one plan");
    }
    CheckFits(c, req.prompt.size(), config);
    longest = std::max(longest, req.prompt.size());
  }

  const auto start = Clock::now();
  const size_t n = requests.size();
  const int capacity = static_cast<int>(longest) + config.max_new_tokens;
  std::vector<DecodeState> states;
  states.reserve(n);
  std::vector<std::vector<int>> prompts;
  for (const auto& req : requests) {
    states.emplace_back(c, capacity,
                        static_cast<int>(longest - req.prompt.size()));
    prompts.push_back(req.prompt);
  }
  std::vector<Generation> gens(n);
  std::vector<DecodeState*> state_ptrs;
  std::vector<GenerationTrace*> trace_ptrs;
  for (size_t i = 0; i < n; ++i) {
    state_ptrs.push_back(&states[i]);
    trace_ptrs.push_back(&gens[i].trace);
  }

  const auto logits = PrefillBatch(w, state_ptrs, prompts, trace_ptrs);
  std::vector<int> next(n);
  std::vector<size_t> active;
  for (size_t i = 0; i < n; ++i) {
    next[i] = Argmax(logits[i]);
    gens[i].tokens.push_back(next[i]);
    if (config.max_new_tokens > 1 && next[i] != config.eos_token) {
      active.push_back(i);
    }
  }

  std::optional<LayerMask> fixed;
  if (auto plan = config.strategy.Plan(c.n_layers)) fixed = PlanToMask(*plan);

  for (int k = 0; !active.empty(); ++k) {
    const LayerMask mask =
        fixed ? *fixed : config.strategy.MaskAt(c.n_layers, k);
    std::vector<DecodeState*> step_states;
    std::vector<int> step_tokens;
    for (size_t i : active) {
      step_states.push_back(&states[i]);
      step_tokens.push_back(next[i]);
    }
    auto outs = DecodeStepBatch(w, step_states, step_tokens, mask);
    std::vector<size_t> still;
    for (size_t j = 0; j < active.size(); ++j) {
      const size_t i = active[j];
      next[i] = Argmax(outs[j].logits);
      outs[j].record.predicted = next[i];
      gens[i].trace.tokens.push_back(std::move(outs[j].record));
      gens[i].tokens.push_back(next[i]);
      if (static_cast<int>(gens[i].tokens.size()) < config.max_new_tokens &&
          next[i] != config.eos_token) {
        still.push_back(i);
      }
    }
    active = std::move(still);
  }
  const double elapsed = SecondsSince(start);
  for (auto& g : gens) g.trace.total_seconds = elapsed;
  return gens;
}

}  // namespace skipdepth
