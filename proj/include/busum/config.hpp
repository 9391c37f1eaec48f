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

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "busum/bottom_up.hpp"
#include "busum/decode.hpp"
#include "busum/error.hpp"
#include "busum/pointer_gen.hpp"
#include "busum/selector.hpp"

namespace busum {

// Flat key=value run configuration. Values are stored as text; typed views are
// built on demand. Precedence: defaults < profile < file < flags.
class RunConfig {
 public:
  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"command", ""},
        {"profile", "desk"},
        {"seed", "1"},
        {"threads", "1"},
        // paths
        {"input", ""},
        {"train", ""},
        {"valid", ""},
        {"out", ""},
        {"model", ""},
        {"selector", ""},
        {"candidates", ""},
        {"references", ""},
        {"word_vectors", ""},
        // data
        {"vocab_size", "50000"},
        {"max_source", "400"},
        {"max_target", "100"},
        // summarizer
        {"emb_dim", "32"},
        {"enc_hidden", "32"},
        {"dec_hidden", "64"},
        {"attention", "bilinear"},
        {"additive_dim", "64"},
        {"init_range", "0.1"},
        {"mode", "baseline"},
        {"task_weight", "1"},
        {"epochs", "10"},
        {"batch_size", "16"},
        {"learning_rate", "0.15"},
        {"initial_accumulator", "0.1"},
        {"clip_norm", "2"},
        {"lr_decay", "true"},
        // selector
        {"selector_static_dim", "32"},
        {"selector_context_dim", "32"},
        {"selector_hidden", "64"},
        {"selector_layers", "2"},
        {"selector_dropout", "0.5"},
        {"selector_static_init_range", "1"},
        {"selector_epochs", "10"},
        {"selector_batch_size", "16"},
        {"selector_max_examples", "100000"},
        // inference
        {"mask", "false"},
        {"oracle_mask", "false"},
        {"epsilon", "0.15"},
        {"lambda", "2"},
        {"beam", "5"},
        {"alpha", "0"},
        {"beta", "0"},
        {"min_length", "0"},
        {"max_length", "100"},
        {"block_trigrams", "false"},
        // analysis
        {"extract_k", "3"},
    };
    return d;
  }

  static std::map<std::string, std::string> profile(const std::string& name) {
    if (name == "desk") return {};
    if (name == "cnn-dm")
      return {{"max_source", "400"}, {"max_target", "100"}, {"min_length", "35"}, {"beta", "10"},
              {"lambda", "2"},       {"emb_dim", "128"},    {"enc_hidden", "256"}, {"dec_hidden", "512"},
              {"block_trigrams", "true"}};
    if (name == "nyt")
      return {{"max_source", "400"}, {"min_length", "6"},  {"beta", "10"},        {"lambda", "2"},
              {"emb_dim", "128"},    {"enc_hidden", "256"}, {"dec_hidden", "512"}, {"block_trigrams", "true"}};
    throw Error("unknown profile '" + name + "' (valid profiles: cnn-dm, nyt, desk)");
  }

  RunConfig() : values_(defaults()) {}

  // Resolves the layers; the profile name is taken from flags, then file.
  static RunConfig resolve(const std::map<std::string, std::string>& file,
                           const std::map<std::string, std::string>& flags) {
    RunConfig c;
    std::string prof = "desk";
    if (auto it = file.find("profile"); it != file.end()) prof = it->second;
    if (auto it = flags.find("profile"); it != flags.end()) prof = it->second;
    for (const auto& [k, v] : profile(prof)) c.set(k, v);
    c.set("profile", prof);
    for (const auto& [k, v] : file) c.set(k, v);
    for (const auto& [k, v] : flags) c.set(k, v);
    c.validate();
    return c;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.contains(key)) throw Error("unknown config key '" + key + "'");
    values_[key] = value;
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error("unknown config key '" + key + "'");
    return it->second;
  }

  std::size_t size(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t pos = 0;
      if (!v.empty() && v[0] == '-') throw Error("");
      const auto x = std::stoull(v, &pos);
      if (pos != v.size()) throw Error("");
      return static_cast<std::size_t>(x);
    } catch (...) {
      throw Error("config key '" + key + "' expects a nonnegative integer, got '" + v + "'");
    }
  }

  double real(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw Error("");
      return x;
    } catch (...) {
      throw Error("config key '" + key + "' expects a number, got '" + v + "'");
    }
  }

  bool flag(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error("config key '" + key + "' expects true or false, got '" + v + "'");
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  void validate() const {
    profile(str("profile"));
    for (const char* k : {"seed", "threads", "vocab_size", "max_source", "max_target", "emb_dim", "enc_hidden",
                          "dec_hidden", "additive_dim", "epochs", "batch_size", "selector_static_dim",
                          "selector_context_dim", "selector_hidden", "selector_layers", "selector_epochs",
                          "selector_batch_size", "selector_max_examples", "beam", "min_length", "max_length",
                          "extract_k"})
      size(k);
    for (const char* k : {"init_range", "task_weight", "learning_rate", "initial_accumulator", "clip_norm",
                          "selector_dropout", "selector_static_init_range", "epsilon", "lambda", "alpha", "beta"})
      real(k);
    for (const char* k : {"lr_decay", "mask", "oracle_mask", "block_trigrams"}) flag(k);
    parse_train_mode(str("mode"));
    parse_attention_kind(str("attention"));
    pg_config().validate();
    inference().validate();
    mask_config().validate();
  }

  std::uint64_t seed() const { return size("seed"); }

  PGConfig pg_config() const {
    PGConfig c;
    c.emb_dim = size("emb_dim");
    c.enc_hidden = size("enc_hidden");
    c.dec_hidden = size("dec_hidden");
    c.additive_dim = size("additive_dim");
    c.attention = parse_attention_kind(str("attention"));
    c.init_range = real("init_range");
    c.task_weight = real("task_weight");
    return c;
  }

  SummarizerTrainConfig summarizer_training() const {
    SummarizerTrainConfig c;
    c.epochs = size("epochs");
    c.batch_size = size("batch_size");
    c.learning_rate = real("learning_rate");
    c.initial_accumulator = real("initial_accumulator");
    c.clip_norm = real("clip_norm");
    c.lr_decay = flag("lr_decay");
    c.seed = seed();
    return c;
  }

  SelectorConfig selector_config() const {
    SelectorConfig c;
    c.static_dim = size("selector_static_dim");
    c.context_dim = size("selector_context_dim");
    c.tagger_hidden = size("selector_hidden");
    c.tagger_layers = size("selector_layers");
    c.dropout = real("selector_dropout");
    c.init_range = real("init_range");
    c.static_init_range = real("selector_static_init_range");
    return c;
  }

  SelectorTrainConfig selector_training() const {
    SelectorTrainConfig c;
    c.epochs = size("selector_epochs");
    c.batch_size = size("selector_batch_size");
    c.max_examples = size("selector_max_examples");
    c.learning_rate = real("learning_rate");
    c.initial_accumulator = real("initial_accumulator");
    c.seed = seed();
    return c;
  }

  InferenceConfig inference() const {
    InferenceConfig c;
    c.beam = size("beam");
    c.alpha = real("alpha");
    c.beta = real("beta");
    c.min_length = size("min_length");
    c.max_length = size("max_length");
    c.block_trigrams = flag("block_trigrams");
    return c;
  }

  MaskConfig mask_config() const { return {real("epsilon"), real("lambda")}; }

  std::string serialize() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
    return os.str();
  }

  nlohmann::json to_json() const { return nlohmann::json(values_); }

 private:
  std::map<std::string, std::string> values_;
};

// Parses key=value lines; blank lines and lines starting with '#' are skipped.
inline std::map<std::string, std::string> parse_config_text(std::istream& in, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(origin + ":" + std::to_string(n) + ": expected key=value");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(origin + ":" + std::to_string(n) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  return parse_config_text(in, path);
}

}  // namespace busum
