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

// skipdepth command line: plan, init, train, generate, search, bench, compare.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "skipdepth/bench.h"
#include "skipdepth/corpus.h"
#include "skipdepth/engine.h"
#include "skipdepth/errors.h"
#include "skipdepth/io.h"
#include "skipdepth/model.h"
#include "skipdepth/schedule.h"
#include "skipdepth/train.h"

namespace skipdepth {
namespace {

using Json = nlohmann::ordered_json;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// --- Shared flag groups -----------------------------------------------------

struct SeedFlag {
  uint64_t seed = 0;
  void Add(CLI::App* app) {
    app->add_option("--seed", seed, "Random seed")->envname("SKIPDEPTH_SEED");
  }
};

struct CorpusFlags {
  std::string path;
  std::string task = "substitution";
  int n_examples = 256;
  int min_length = 4;
  int max_length = 8;
  int vocab = 32;
  uint64_t key_seed = 7;

  // `name` is the file flag (--corpus / --heldout); synthetic options are
  // shared across both.
  void AddPath(CLI::App* app, const std::string& name, const std::string& help) {
    app->add_option("--" + name, path, help);
  }
  void AddSynthetic(CLI::App* app, const std::string& count_flag) {
    app->add_option("--task", task, "Synthetic task when no corpus file is given")
        ->check(CLI::IsMember({"copy", "substitution"}));
    app->add_option("--" + count_flag, n_examples, "Synthetic example count");
    app->add_option("--min-length", min_length, "Synthetic prompt length, min");
    app->add_option("--max-length", max_length, "Synthetic prompt length, max");
    app->add_option("--task-vocab", vocab, "Synthetic token range");
    app->add_option("--key-seed", key_seed, "Substitution permutation seed");
  }

  std::vector<Example> Load(const ModelConfig& model, uint64_t seed) const {
    std::vector<Example> corpus;
    if (!path.empty()) {
      corpus = ReadCorpusFile(path);
    } else {
      CorpusOptions o;
      o.task = task == "copy" ? TaskKind::kCopy : TaskKind::kSubstitution;
      o.n_examples = n_examples;
      o.min_length = min_length;
      o.max_length = max_length;
      o.vocab_size = std::min(vocab, model.vocab_size);
      o.seed = seed;
      o.key_seed = key_seed;
      corpus = MakeCorpus(o);
    }
    if (corpus.empty()) throw std::runtime_error("corpus is empty");
    for (const auto& ex : corpus) ex.Validate(model.vocab_size, model.max_seq_len);
    return corpus;
  }
};

struct StrategyFlags {
  std::string name = "full";
  double ratio = 2.0;
  std::string rule = "modulo";
  int keep = 0;
  double threshold = 0.9;
  int min_active = 1;
  int max_active = 0;
  int positions = 128;

  void Add(CLI::App* app) {
    app->add_option("--strategy", name,
                    "full, unified, skip-top, skip-bottom, skipdecode, early-exit, "
                    "or a full spec such as unified:2");
    app->add_option("--ratio", ratio, "Target speedup ratio");
    app->add_option("--rule", rule, "Unified retention rule")
        ->check(CLI::IsMember({"modulo", "uniform-stride"}));
    app->add_option("--keep", keep,
                    "Layers kept by skip-top / skip-bottom (default N / ratio)");
    app->add_option("--threshold", threshold, "Early-exit confidence threshold");
    app->add_option("--min-active", min_active, "SkipDecode final layer count");
    app->add_option("--max-active", max_active,
                    "SkipDecode initial layer count (default N)");
    app->add_option("--positions", positions,
                    "SkipDecode positions over which depth decays");
  }

  Strategy Build(int n_layers) const {
    if (name.find(':') != std::string::npos) return Strategy::Parse(name, n_layers);
    const int budget = keep > 0 ? keep
                                : static_cast<int>(std::floor(n_layers / ratio));
    Strategy s;
    if (name == "full") {
      s = Strategy::Full();
    } else if (name == "unified") {
      s = Strategy::Unified(ratio, ParseRetentionRule(rule));
    } else if (name == "skip-top") {
      s = Strategy::SkipTop(budget);
    } else if (name == "skip-bottom") {
      s = Strategy::SkipBottom(budget);
    } else if (name == "skipdecode") {
      s = Strategy::SkipDecode(
          {positions, min_active, max_active > 0 ? max_active : n_layers});
    } else if (name == "early-exit") {
      s = Strategy::EarlyExit(threshold);
    } else {
      throw InvalidArgument("unknown strategy '" + name + "'");
    }
    s.Validate(n_layers);
    return s;
  }
};

struct TrainFlags {
  TrainConfig config;
  bool no_deep_encoding = false;

  void Add(CLI::App* app) {
    app->add_option("--lr", config.learning_rate, "Learning rate");
    app->add_option("--epochs", config.epochs, "Epochs");
    app->add_option("--warmup", config.warmup_fraction, "Warmup fraction");
    app->add_option("--batch-size", config.batch_size, "Examples per step");
    app->add_option("--grad-clip", config.grad_clip, "Gradient norm clip");
    app->add_option("--layerdrop", config.layerdrop_rate, "LayerDrop rate");
    app->add_flag("--no-deep-encoding", no_deep_encoding,
                  "Let LayerDrop drop prompt layers too");
    app->add_option("--exit-aux", config.exit_aux_weight,
                    "Weight of intermediate-exit losses");
  }

  TrainConfig Get(uint64_t seed) const {
    TrainConfig c = config;
    c.deep_encoding = !no_deep_encoding;
    c.seed = seed;
    return c;
  }
};

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

void EmitOrWrite(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    WriteTextFile(path, text);
  }
}

Json TraceJson(const GenerationTrace& trace) {
  Json tokens = Json::array();
  for (const auto& rec : trace.tokens) {
    tokens.push_back({{"position", rec.position},
                      {"token", rec.token},
                      {"predicted", rec.predicted},
                      {"executed", rec.executed},
                      {"recomputed_layers", rec.recomputed_layers},
                      {"seconds", rec.seconds}});
  }
  return {{"prompt_length", trace.prompt_length}, {"tokens", tokens}};
}

Json GenerationJson(const Generation& g, bool with_trace) {
  Json j;
  j["tokens"] = g.tokens;
  if (g.trace.tokens.empty()) {
    j["activated_mean"] = nullptr;
  } else {
    j["activated_mean"] =
        MeanActivatedLayers(std::span<const GenerationTrace>(&g.trace, 1));
  }
  j["tokens_per_second"] =
      g.trace.total_seconds > 0 ? g.tokens.size() / g.trace.total_seconds : 0.0;
  if (with_trace) j["trace"] = TraceJson(g.trace);
  return j;
}

Json PlanJson(const SkipPlan& plan) { return Json::parse(plan.ToJson()); }

// --- Subcommands ------------------------------------------------------------

struct PlanCmd {
  int n_layers = 30;
  double ratio = 1.0;
  std::string rule = "modulo";
  std::string kind = "unified";

  void Add(CLI::App& root) {
    auto* app = root.add_subcommand("plan", "Print the retained layers of a plan");
    app->add_option("--n-layers", n_layers, "Model depth")->check(CLI::PositiveNumber);
    app->add_option("--ratio", ratio, "Target speedup ratio (>= 1)")
        ->check(CLI::Range(1.0, 1e9));
    app->add_option("--rule", rule, "Unified retention rule")
        ->check(CLI::IsMember({"modulo", "uniform-stride"}));
    app->add_option("--kind", kind, "Plan family")
        ->check(CLI::IsMember({"unified", "skip-top", "skip-bottom"}));
    app->callback([this] { Run(); });
  }

  void Run() const {
    SkipPlan plan;
    if (kind == "unified") {
      plan = UnifiedRetainedLayers(n_layers, ratio, ParseRetentionRule(rule));
    } else {
      const int m = RetainedBudget(n_layers, ratio);
      plan = kind == "skip-top" ? TopRetainedLayers(n_layers, m)
                                : BottomRetainedLayers(n_layers, m);
      plan.target_ratio = ratio;
    }
    std::cout << plan.ToJson() << '\n';
  }
};

struct InitCmd {
  ModelConfig config;
  std::string out;

  void Add(CLI::App& root) {
    auto* app = root.add_subcommand("init", "Write freshly initialized weights");
    app->add_option("--n-layers", config.n_layers, "Layers");
    app->add_option("--d-model", config.d_model, "Model width");
    app->add_option("--n-heads", config.n_heads, "Attention heads");
    app->add_option("--d-ff", config.d_ff, "MLP width");
    app->add_option("--vocab-size", config.vocab_size, "Vocabulary size");
    app->add_option("--max-seq-len", config.max_seq_len, "Positions");
    app->add_option("--seed", config.seed, "Random seed")->envname("SKIPDEPTH_SEED");
    app->add_option("--out", out, "Weight file")->required();
    app->callback([this] { Run(); });
  }

  void Run() const {
    config.Validate();
    SaveWeights(out, InitWeights(config));
    std::cout << config.ToJson() << '\n';
  }
};

struct TrainCmd {
  std::string weights, out, plan_path, strategy;
  double ratio = 2.0;
  CorpusFlags corpus, heldout;
  TrainFlags train;
  SeedFlag seed;
  int heldout_examples = 64;

  void Add(CLI::App& root) {
    auto* app = root.add_subcommand("train", "Fine-tune under a layer plan");
    app->add_option("--weights", weights, "Initial weights")->required();
    app->add_option("--out", out, "Trained weight file")->required();
    app->add_option("--plan", plan_path, "Plan JSON file for response positions");
    app->add_option("--strategy", strategy,
                    "Fixed plan instead of --plan: full, unified, skip-top, "
                    "skip-bottom");
    app->add_option("--ratio", ratio, "Ratio for --strategy");
    corpus.AddPath(app, "corpus", "Training corpus (JSON lines)");
    heldout.AddPath(app, "heldout", "Held-out corpus (JSON lines)");
    corpus.AddSynthetic(app, "n-examples");
    app->add_option("--heldout-examples", heldout_examples,
                    "Synthetic held-out examples");
    train.Add(app);
    seed.Add(app);
    app->callback([this] { Run(); });
  }

  void Run() const {
    const Weights w = LoadWeights(weights);
    const int n = w.config().n_layers;
    TrainConfig cfg = train.Get(seed.seed);
    if (!plan_path.empty() && !strategy.empty()) {
      throw InvalidArgument("--plan and --strategy are exclusive");
    }
    if (!plan_path.empty()) {
      cfg.plan = SkipPlan::FromJson(ReadTextFile(plan_path));
    } else if (!strategy.empty()) {
      StrategyFlags sf;
      sf.name = strategy;
      sf.ratio = ratio;
      const auto plan = sf.Build(n).Plan(n);
      if (!plan) throw InvalidArgument("training needs a fixed plan");
      cfg.plan = *plan;
    }
    const auto train_set = corpus.Load(w.config(), seed.seed);
    CorpusFlags held = corpus;
    held.path = heldout.path;
    held.n_examples = heldout_examples;
    const auto held_set = held.Load(w.config(), seed.seed + 1);

    const TrainResult r = Finetune(w, train_set, held_set, cfg);
    SaveWeights(out, r.weights);
    Json j;
    j["initial_loss"] = r.initial_loss;
    j["heldout_loss"] = r.heldout_loss;
    j["epoch_losses"] = r.epoch_losses;
    j["plan"] = cfg.plan ? PlanJson(*cfg.plan) : PlanJson(FullPlan(n));
    std::cout << j.dump() << '\n';
  }
};

struct GenerateCmd {
  std::string weights, input = "-", output = "-", prompt;
  StrategyFlags strategy;
  DecodeConfig decode;
  int batch_size = 1;
  bool trace = false;

  void Add(CLI::App& root) {
    auto* app = root.add_subcommand(
        "generate", "Decode JSON-lines requests {\"prompt\":[...]} ");
    app->add_option("--weights", weights, "Weight file")->required();
    app->add_option("--input", input, "Request file, - for stdin");
    app->add_option("--prompt", prompt, "Single prompt as comma-separated ids");
    app->add_option("--output", output, "Response file, - for stdout");
    strategy.Add(app);
    app->add_option("--beam", decode.beam_size, "Beam width (1 = greedy)");
    app->add_option("--max-new-tokens", decode.max_new_tokens, "Response length");
    app->add_option("--eos", decode.eos_token, "Stop token (< 0 disables)");
    app->add_option("--batch-size", batch_size, "Requests decoded together");
    app->add_flag("--trace", trace, "Include per-token execution traces");
    app->callback([this] { Run(); });
  }

  std::vector<std::vector<int>> Prompts() const {
    std::vector<std::vector<int>> prompts;
    if (!prompt.empty()) {
      std::vector<int> p;
      for (const auto& t : SplitList(prompt)) p.push_back(std::stoi(t));
      prompts.push_back(p);
      return prompts;
    }
    std::ifstream file;
    std::istream* in = &std::cin;
    if (input != "-") {
      file.open(input);
      if (!file) throw std::runtime_error("cannot open " + input);
      in = &file;
    }
    std::string line;
    int line_no = 0;
    while (std::getline(*in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        prompts.push_back(Json::parse(line).at("prompt").get<std::vector<int>>());
      } catch (const Json::exception& e) {
        throw InvalidArgument("request line " + std::to_string(line_no) + ": " +
                              e.what());
      }
    }
    return prompts;
  }

  void Run() {
    const Weights w = LoadWeights(weights);
    decode.strategy = strategy.Build(w.config().n_layers);
    if (batch_size < 1) throw InvalidArgument("--batch-size must be >= 1");
    const auto prompts = Prompts();
    std::ostringstream os;
    for (size_t start = 0; start < prompts.size();
         start += static_cast<size_t>(batch_size)) {
      const size_t end =
          std::min(prompts.size(), start + static_cast<size_t>(batch_size));
      std::vector<Generation> gens;
      if (end - start > 1) {
        std::vector<GenerationRequest> reqs;
        for (size_t i = start; i < end; ++i) reqs.push_back({prompts[i], {}});
        gens = BatchGenerate(w, reqs, decode);
      } else {
        gens.push_back(Generate(w, prompts[start], decode));
      }
      for (const auto& g : gens) os << GenerationJson(g, trace).dump() << '\n';
    }
    EmitOrWrite(output, os.str());
  }
};

struct SearchCmd {
  std::string weights, out;
  int target_m = 0;
  CorpusFlags corpus;
  SeedFlag seed;

  void Add(CLI::App& root) {
    auto* app = root.add_subcommand("search", "Greedy layer removal search");
    app->add_option("--weights", weights, "Weight file")->required();
    app->add_option("--target-m", target_m, "Layers to keep")->required();
    corpus.AddPath(app, "corpus", "Validation corpus (JSON lines)");
    corpus.AddSynthetic(app, "n-examples");
    app->add_option("--out", out, "Write the plan JSON here");
    seed.Add(app);
    corpus.n_examples = 64;
    app->callback([this] { Run(); });
  }

  void Run() const {
    const Weights w = LoadWeights(weights);
    const auto val = corpus.Load(w.config(), seed.seed);
    const auto r = GreedyLayerSearch(w, val, target_m);
    if (!out.empty()) WriteTextFile(out, r.plan.ToJson() + "\n");
    Json j;
    j["plan"] = PlanJson(r.plan);
    j["removed"] = r.removed;
    j["losses"] = r.losses;
    j["evaluations"] = r.evaluations;
    std::cout << j.dump() << '\n';
  }
};

struct BenchCmd {
  std::string weights, out, format, batch_sizes = "1,2,8",
                                     strategies = "full,unified:2,unified:5";
  BenchConfig config;
  SeedFlag seed;

  void Add(CLI::App& root) {
    auto* app = root.add_subcommand("bench", "Throughput per strategy and batch");
    app->add_option("--weights", weights, "Weight file")->required();
    app->add_option("--batch-sizes", batch_sizes, "Comma-separated batch sizes");
    app->add_option("--strategies", strategies, "Comma-separated strategy specs");
    app->add_option("--n-requests", config.n_requests, "Requests per repetition");
    app->add_option("--prompt-length", config.prompt_length, "Prompt tokens");
    app->add_option("--max-new-tokens", config.max_new_tokens, "Response tokens");
    app->add_option("--warmup", config.warmup_iterations, "Untimed passes");
    app->add_option("--repetitions", config.repetitions, "Timed passes (>= 3)");
    app->add_option("--workers", config.workers, "Worker threads");
    app->add_option("--format", format, "csv or markdown (default from --out)")
        ->check(CLI::IsMember({"csv", "markdown"}));
    app->add_option("--out", out, "Report file, - for stdout");
    seed.Add(app);
    app->callback([this] { Run(); });
  }

  void Run() {
    const Weights w = LoadWeights(weights);
    config.batch_sizes.clear();
    for (const auto& b : SplitList(batch_sizes)) {
      config.batch_sizes.push_back(std::stoi(b));
    }
    config.strategies.clear();
    for (const auto& s : SplitList(strategies)) {
      config.strategies.push_back(Strategy::Parse(s, w.config().n_layers));
    }
    config.seed = seed.seed;
    std::string fmt = format;
    if (fmt.empty()) {
      fmt = out.size() > 3 && out.substr(out.size() - 3) == ".md" ? "markdown"
                                                                  : "csv";
    }
    const auto report = RunBenchmark(config, w);
    EmitOrWrite(out, EmitReport(report, fmt == "markdown" ? ReportFormat::kMarkdown
                                                          : ReportFormat::kCsv));
  }
};

struct CompareCmd {
  std::string weights, out, plot_data, ratios = "2,3,5";
  CorpusFlags corpus, heldout;
  TrainFlags train;
  SeedFlag seed;
  int heldout_examples = 64;

  void Add(CLI::App& root) {
    auto* app = root.add_subcommand(
        "compare", "Held-out loss per skipping strategy and ratio");
    app->add_option("--weights", weights, "Base weights")->required();
    app->add_option("--ratios", ratios, "Comma-separated ratios");
    corpus.AddPath(app, "corpus", "Training corpus (JSON lines)");
    heldout.AddPath(app, "heldout", "Held-out corpus (JSON lines)");
    corpus.AddSynthetic(app, "n-examples");
    app->add_option("--heldout-examples", heldout_examples,
                    "Synthetic held-out examples");
    app->add_option("--out", out, "Loss grid CSV, - for stdout");
    app->add_option("--plot-data", plot_data,
                    "Wide CSV: ratio then one loss column per strategy");
    train.Add(app);
    seed.Add(app);
    app->callback([this] { Run(); });
  }

  void Run() const {
    const Weights w = LoadWeights(weights);
    std::vector<double> rs;
    for (const auto& r : SplitList(ratios)) rs.push_back(std::stod(r));
    if (rs.empty()) throw InvalidArgument("--ratios is empty");
    const auto train_set = corpus.Load(w.config(), seed.seed);
    CorpusFlags held = corpus;
    held.path = heldout.path;
    held.n_examples = heldout_examples;
    const auto held_set = held.Load(w.config(), seed.seed + 1);
    const auto report =
        StrategyLossSweep(w, train_set, held_set, rs, train.Get(seed.seed));
    EmitOrWrite(out, report.ToCsv());
    if (!plot_data.empty()) {
      std::ostringstream os;
      os.precision(17);
      os << "ratio,skip-top,skip-bottom,unified,greedy\n";
      for (double r : rs) {
        os << r;
        for (const char* s : {"skip-top", "skip-bottom", "unified", "greedy"}) {
          os << ',' << report.Loss(s, r);
        }
        os << '\n';
      }
      WriteTextFile(plot_data, os.str());
    }
  }
};

// --- Config file ------------------------------------------------------------

std::string FlagName(const std::string& key) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

// Appends `--key value` pairs from a JSON object. Nested objects keyed by a
// subcommand name apply only to that subcommand.
void ConfigArgs(const Json& j, const std::string& command,
                const std::vector<std::string>& commands,
                std::vector<std::string>& args) {
  if (!j.is_object()) throw InvalidArgument("config file must hold an object");
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      if (key == command) ConfigArgs(value, command, commands, args);
      continue;
    }
    if (std::find(commands.begin(), commands.end(), key) != commands.end()) {
      continue;
    }
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(FlagName(key));
      continue;
    }
    std::string text;
    if (value.is_array()) {
      for (const auto& item : value) {
        if (!text.empty()) text += ',';
        text += item.is_string() ? item.get<std::string>() : item.dump();
      }
    } else {
      text = value.is_string() ? value.get<std::string>() : value.dump();
    }
    args.push_back(FlagName(key));
    args.push_back(text);
  }
}

// Splices config-file flags in right after the subcommand so that flags given
// on the command line, which come later, win.
std::vector<std::string> ExpandConfig(std::vector<std::string> args,
                                      const std::vector<std::string>& commands) {
  std::string path;
  for (size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<ptrdiff_t>(i),
                 args.begin() + static_cast<ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  const auto cmd = std::find_first_of(args.begin() + 1, args.end(),
                                      commands.begin(), commands.end());
  if (cmd == args.end()) throw InvalidArgument("--config needs a subcommand");
  Json j;
  try {
    j = Json::parse(ReadTextFile(path));
  } catch (const Json::exception& e) {
    throw InvalidArgument("config " + path + ": " + e.what());
  }
  std::vector<std::string> extra;
  ConfigArgs(j, *cmd, commands, extra);
  args.insert(cmd + 1, extra.begin(), extra.end());
  return args;
}

int Main(int argc, char** argv) {
  CLI::App app{"Layer skipping and early exit for a toy decoder-only LM",
               "skipdepth"};
  app.require_subcommand(1, 1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;  // consumed by ExpandConfig; declared for --help
  app.add_option("--config", config_path, "JSON file of flag values (flags win)");

  PlanCmd plan;
  InitCmd init;
  TrainCmd train;
  GenerateCmd generate;
  SearchCmd search;
  BenchCmd bench;
  CompareCmd compare;
  plan.Add(app);
  init.Add(app);
  train.Add(app);
  generate.Add(app);
  search.Add(app);
  bench.Add(app);
  compare.Add(app);
  const std::vector<std::string> commands = {"plan",   "init",  "train",  "generate",
                                             "search", "bench", "compare"};

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = ExpandConfig(std::move(args), commands);
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(std::move(rev));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "usage: skipdepth {plan|init|train|generate|search|bench|compare}"
                 " [options], see --help\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}

}  // namespace
}  // namespace skipdepth

int main(int argc, char** argv) {
  try {
    return skipdepth::Main(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
