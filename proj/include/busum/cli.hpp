// Copyright 2026 The busum Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "busum/config.hpp"
#include "busum/corpus.hpp"
#include "busum/decode.hpp"
#include "busum/metrics.hpp"
#include "busum/pointer_gen.hpp"
#include "busum/selector.hpp"

namespace busum {
namespace cli {

inline const std::set<std::string>& boolean_keys() {
  static const std::set<std::string> k = {"lr_decay", "mask", "oracle_mask", "block_trigrams"};
  return k;
}

inline std::string flag_name(std::string key) {
  for (auto& ch : key)
    if (ch == '_') ch = '-';
  return key;
}

inline std::string require(const RunConfig& c, const std::string& key) {
  const auto& v = c.str(key);
  if (v.empty()) throw Error("missing required --" + flag_name(key));
  return v;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

// Creates the run directory and echoes the resolved config into it.
inline std::filesystem::path open_run_dir(const RunConfig& c) {
  std::filesystem::path dir = require(c, "out");
  std::filesystem::create_directories(dir);
  write_text(dir / "config.txt", c.serialize());
  return dir;
}

inline std::optional<std::filesystem::path> optional_run_dir(const RunConfig& c) {
  if (c.str("out").empty()) return std::nullopt;
  return open_run_dir(c);
}

class JsonLog {
 public:
  explicit JsonLog(const std::filesystem::path& path) : f_(path, std::ios::binary) {
    if (!f_) throw Error("cannot write " + path.string());
  }
  void operator()(const nlohmann::json& j) { f_ << j.dump() << '\n' << std::flush; }

 private:
  std::ofstream f_;
};

inline std::vector<LabeledSentence> labeled_sentences(const std::vector<ExamplePair>& data) {
  std::vector<LabeledSentence> out;
  for (const auto& ex : data)
    for (auto& s : split_labeled_sentences(ex)) out.push_back(std::move(s));
  return out;
}

inline int cmd_preprocess(const RunConfig& c, std::ostream& out) {
  auto data = load_dataset(require(c, "input"));
  const auto dir = open_run_dir(c);
  for (auto& ex : data) {
    ex = truncate_example(ex, c.size("max_source"), c.size("max_target"));
    ex.copy_labels = align_copy_labels(ex.source(), ex.target());
  }
  write_dataset(data, (dir / "data.jsonl").string());
  const auto vocab = build_vocab(data, c.size("vocab_size"));
  std::string text;
  for (const auto& t : vocab.entries()) text += t + '\n';
  write_text(dir / "vocab.txt", text);
  out << "preprocessed " << data.size() << " examples, vocabulary " << vocab.size() << '\n';
  return 0;
}

inline Selector<float> fresh_selector(const RunConfig& c, const std::vector<ExamplePair>& train, Rng& rng) {
  auto vocab = build_vocab(train, c.size("vocab_size"));
  const auto cfg = c.selector_config();
  if (!c.str("word_vectors").empty()) {
    const auto vectors = load_word_vectors(c.str("word_vectors"), cfg.static_dim);
    return Selector<float>::init(cfg, std::move(vocab), rng, &vectors);
  }
  return Selector<float>::init(cfg, std::move(vocab), rng);
}

inline int cmd_train_selector(const RunConfig& c, std::ostream& out) {
  const auto train = load_dataset(require(c, "train"));
  std::optional<std::vector<LabeledSentence>> valid;
  if (!c.str("valid").empty()) valid = labeled_sentences(load_dataset(c.str("valid")));
  const auto dir = open_run_dir(c);
  Rng rng(c.seed());
  auto model = fresh_selector(c, train, rng);
  JsonLog log(dir / "log.jsonl");
  auto rep = train_selector(model, labeled_sentences(train), valid, c.selector_training(), std::ref(log));
  save_selector(model, c.to_json(), (dir / "selector.busm").string());
  out << "selector trained on " << rep.train_examples << " sentences, best validation AUC "
      << format_fixed(rep.best_validation_auc, 4) << " at epoch " << rep.best_epoch << '\n';
  return 0;
}

inline int cmd_train_summarizer(const RunConfig& c, std::ostream& out) {
  const auto train = load_dataset(require(c, "train"));
  std::optional<std::vector<ExamplePair>> valid;
  if (!c.str("valid").empty()) valid = load_dataset(c.str("valid"));
  const auto dir = open_run_dir(c);
  Rng rng(c.seed());
  const auto mode = parse_train_mode(c.str("mode"));
  std::optional<Selector<float>> sel;
  if (mode == TrainMode::kDiffMask) {
    Rng srng = rng.split("selector");
    sel = c.str("selector").empty() ? fresh_selector(c, train, srng) : load_selector(c.str("selector"));
  }
  auto model = Summarizer<float>::init(c.pg_config(), build_vocab(train, c.size("vocab_size")), mode, rng,
                                       std::move(sel));
  JsonLog log(dir / "log.jsonl");
  auto rep = train_summarizer(model, train, valid, c.summarizer_training(), std::ref(log));
  save_summarizer(model, c.to_json(), (dir / "summarizer.busm").string());
  out << "summarizer (" << to_string(mode) << ") trained for " << rep.history.size() << " epochs";
  if (!rep.validation_perplexity.empty())
    out << ", final validation perplexity " << format_fixed(rep.validation_perplexity.back(), 4);
  out << '\n';
  return 0;
}

inline int cmd_decode(const RunConfig& c, std::ostream& out) {
  const auto model = load_summarizer(require(c, "model"));
  const auto data = load_dataset(require(c, "input"));
  const auto dir = open_run_dir(c);
  std::optional<Selector<float>> sel;
  if (!c.str("selector").empty()) sel = load_selector(c.str("selector"));
  DecodeOptions opt;
  opt.inference = c.inference();
  opt.mask = c.flag("mask") || c.flag("oracle_mask");
  opt.mask_config = c.mask_config();
  if (opt.mask && model.mode != TrainMode::kMultiTask && !sel && !c.flag("oracle_mask"))
    throw Error("--mask needs --selector (or a multi-task model, or --oracle-mask)");
  auto results = parallel_decode(data.size(), c.size("threads"), [&](std::size_t i) {
    const auto& ex = data[i];
    std::optional<std::vector<double>> q;
    if (c.flag("oracle_mask")) {
      const auto labels = ex.copy_labels ? *ex.copy_labels : align_copy_labels(ex.source(), ex.target());
      q = std::vector<double>(labels.begin(), labels.end());
    } else if (opt.mask && sel) {
      const auto p = sel->predict_document(ex.source_sentences);
      q = std::vector<double>(p.begin(), p.end());
    }
    return summarize(model, ex, opt, q);
  });
  std::string text;
  std::size_t warned = 0;
  for (const auto& r : results) {
    text += r.to_json().dump() + '\n';
    warned += !r.warnings.empty();
  }
  write_text(dir / "summaries.jsonl", text);
  out << "decoded " << results.size() << " documents";
  if (warned) out << " (" << warned << " with warnings)";
  out << '\n';
  return 0;
}

struct CandidatePair {
  TokenList candidate;
  const ExamplePair* reference = nullptr;
};

inline std::vector<CandidatePair> match_candidates(const std::string& cand_path,
                                                   const std::vector<ExamplePair>& refs) {
  std::map<std::string, const ExamplePair*> by_id;
  for (const auto& r : refs) by_id[r.id] = &r;
  std::ifstream in(cand_path);
  if (!in) throw Error("cannot open candidates " + cand_path);
  std::vector<CandidatePair> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error("malformed JSON at line " + std::to_string(n) + " of " + cand_path);
    }
    if (!j.contains("id") || !j.contains("summary"))
      throw Error("candidate line " + std::to_string(n) + " needs id and summary");
    const auto id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error("no reference for candidate id " + id);
    out.push_back({tokenize(j.at("summary").get<std::string>()), it->second});
  }
  return out;
}

inline int cmd_evaluate(const RunConfig& c, std::ostream& out) {
  const auto refs = load_dataset(require(c, "references"));
  const auto pairs = match_candidates(require(c, "candidates"), refs);
  RougeTotals rt;
  for (const auto& p : pairs) rt.add(p.candidate, p.reference->target());
  MetricReport rep;
  rep.add("rouge-1", rt.rouge1());
  rep.add("rouge-2", rt.rouge2());
  rep.add("rouge-l", rt.rougeL());
  rep.add("documents", static_cast<double>(pairs.size()), 0);
  out << rep.table();
  if (auto dir = optional_run_dir(c)) write_text(*dir / "rouge.csv", rep.csv());
  return 0;
}

inline int cmd_analyze(const RunConfig& c, std::ostream& out) {
  const auto refs = load_dataset(require(c, "references"));
  const auto pairs = match_candidates(require(c, "candidates"), refs);
  std::optional<Selector<float>> sel;
  if (!c.str("selector").empty()) sel = load_selector(c.str("selector"));
  const std::size_t k = std::max<std::size_t>(1, c.size("extract_k"));
  CopyTotals ct;
  RougeTotals lead, top, words;
  for (const auto& p : pairs) {
    const auto& doc = *p.reference;
    const auto src = doc.source();
    const auto ref = doc.target();
    ct.add(p.candidate, src, ref);
    lead.add(lead_k(doc, k), ref);
    if (sel) {
      const auto qf = sel->predict_document(doc.source_sentences);
      const std::vector<double> q(qf.begin(), qf.end());
      top.add(select_top_sentences(doc, q, k), ref);
      words.add(extract_words_threshold(doc, q, std::max<std::size_t>(1, ref.size())), ref);
    }
  }
  MetricReport rep;
  if (auto prec = ct.precision())
    rep.add("copied_word_precision", *prec);
  else
    rep.add_text("copied_word_precision", "undefined");
  if (auto nov = ct.novel_rate())
    rep.add("novel_word_rate", *nov);
  else
    rep.add_text("novel_word_rate", "undefined");
  const std::string ks = std::to_string(k);
  rep.add("lead-" + ks + " rouge-1", lead.rouge1());
  rep.add("lead-" + ks + " rouge-2", lead.rouge2());
  rep.add("lead-" + ks + " rouge-l", lead.rougeL());
  if (sel) {
    rep.add("top-" + ks + " rouge-1", top.rouge1());
    rep.add("top-" + ks + " rouge-2", top.rouge2());
    rep.add("top-" + ks + " rouge-l", top.rougeL());
    rep.add("threshold-words rouge-1", words.rouge1());
    rep.add("threshold-words rouge-2", words.rouge2());
    rep.add("threshold-words rouge-l", words.rougeL());
  }
  rep.histogram = ct.histogram;
  out << rep.table();
  if (auto dir = optional_run_dir(c)) write_text(*dir / "analysis.csv", rep.csv());
  return 0;
}

}  // namespace cli

// Parses argv and runs one subcommand. Returns the process exit status.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"busum: bottom-up abstractive summarization", "busum"};
  app.require_subcommand(1);
  using Runner = int (*)(const RunConfig&, std::ostream&);
  struct Sub {
    CLI::App* app;
    std::string name;
    Runner run;
  };
  const std::vector<std::tuple<std::string, std::string, Runner>> table = {
      {"preprocess", "tokenize, truncate and label a JSON-lines corpus", cli::cmd_preprocess},
      {"train-selector", "train the content selector", cli::cmd_train_selector},
      {"train-summarizer", "train the pointer-generator summarizer", cli::cmd_train_summarizer},
      {"decode", "decode summaries with beam search", cli::cmd_decode},
      {"evaluate", "score candidate summaries with ROUGE", cli::cmd_evaluate},
      {"analyze", "copy statistics and extractive baselines", cli::cmd_analyze},
  };
  std::map<std::string, std::string> flags;
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<Sub> subs;
  for (const auto& [name, desc, fn] : table) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--set", sets, "override any key: --set key=value");
    for (const auto& [key, def] : RunConfig::defaults()) {
      if (key == "command") continue;
      const std::string opt = "--" + cli::flag_name(key);
      if (cli::boolean_keys().contains(key)) {
        sub->add_flag_function(opt, [&flags, key](std::int64_t) { flags[key] = "true"; }, "enable " + key);
        sub->add_flag_function("--no-" + cli::flag_name(key), [&flags, key](std::int64_t) { flags[key] = "false"; },
                               "disable " + key);
      } else {
        sub->add_option_function<std::string>(opt, [&flags, key](const std::string& v) { flags[key] = v; },
                                              "default: " + (def.empty() ? std::string("none") : def));
      }
    }
    sub->add_option_function<std::string>(
        "--max-examples", [&flags](const std::string& v) { flags["selector_max_examples"] = v; },
        "same as --selector-max-examples");
    subs.push_back({sub, name, fn});
  }
  if (argc <= 1) {
    err << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "busum: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  try {
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error("--set expects key=value, got '" + s + "'");
      flags[s.substr(0, eq)] = s.substr(eq + 1);
    }
    for (const auto& s : subs) {
      if (!s.app->parsed()) continue;
      flags["command"] = s.name;
      auto file = config_path.empty() ? std::map<std::string, std::string>{} : load_config_file(config_path);
      if (!flags.contains("seed") && !file.contains("seed"))
        if (const char* env = std::getenv("BUSM_SEED")) file["seed"] = env;
      const auto cfg = RunConfig::resolve(file, flags);
      return s.run(cfg, out);
    }
  } catch (const std::exception& e) {
    err << "busum: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace busum
