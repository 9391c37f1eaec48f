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

// Dataset ingestion: tokenization, vocabulary, truncation, and the
// copy-alignment labeling that supervises the content selector.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "busum/error.hpp"
#include "json.hpp"

namespace busum {

using Token = std::string;
using TokenList = std::vector<Token>;

struct ExamplePair {
  std::string id;
  std::vector<TokenList> source_sentences;
  std::vector<TokenList> target_sentences;
  std::optional<std::vector<int>> copy_labels;

  TokenList source() const { return flatten(source_sentences); }
  TokenList target() const { return flatten(target_sentences); }

  std::size_t source_length() const {
    std::size_t n = 0;
    for (const auto& s : source_sentences) n += s.size();
    return n;
  }

  static TokenList flatten(const std::vector<TokenList>& sentences) {
    TokenList out;
    for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
  }

  bool operator==(const ExamplePair&) const = default;
};

// ---------------------------------------------------------------------------
// Tokenization

inline bool is_split_punct(char ch) {
  switch (ch) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '"': case '\'': case '(': case ')': case '-':
      return true;
    default:
      return false;
  }
}

// Lowercases (ASCII range; other bytes pass through), isolates the marks
// . , ; : ! ? " ' ( ) - as single-character tokens and splits on whitespace.
inline TokenList tokenize(std::string_view raw) {
  TokenList out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : raw) {
    const auto uc = static_cast<unsigned char>(ch);
    if (uc < 0x80 && std::isspace(uc)) {
      flush();
    } else if (is_split_punct(ch)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(uc < 0x80 ? static_cast<char>(std::tolower(uc)) : ch);
    }
  }
  flush();
  return out;
}

inline std::string join(const TokenList& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumReserved = 4;

  Vocabulary() : itos_{"<pad>", "<unk>", "<s>", "</s>"} {
    for (int i = 0; i < kNumReserved; ++i) stoi_[itos_[i]] = i;
  }

  explicit Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
    for (const auto& t : tokens) add(t);
  }

  int add(const std::string& tok) {
    auto it = stoi_.find(tok);
    if (it != stoi_.end()) return it->second;
    const int id = static_cast<int>(itos_.size());
    itos_.push_back(tok);
    stoi_.emplace(tok, id);
    return id;
  }

  int id(const std::string& tok) const {
    auto it = stoi_.find(tok);
    return it == stoi_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& tok) const { return stoi_.count(tok) != 0; }
  const std::string& token(int id) const { return itos_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return itos_.size(); }

  // Non-reserved entries in id order.
  std::vector<std::string> entries() const { return {itos_.begin() + kNumReserved, itos_.end()}; }

  bool operator==(const Vocabulary& o) const { return itos_ == o.itos_; }

 private:
  std::vector<std::string> itos_;
  std::unordered_map<std::string, int> stoi_;
};

// Most frequent max_size tokens over sources and targets; ties broken
// lexicographically.
inline Vocabulary build_vocab(const std::vector<ExamplePair>& corpus, std::size_t max_size) {
  if (corpus.empty()) throw Error("empty corpus");
  if (max_size < 1) throw Error("max_size must be at least 1");
  std::map<std::string, std::size_t> counts;
  auto count = [&](const std::vector<TokenList>& sents) {
    for (const auto& s : sents)
      for (const auto& t : s) ++counts[t];
  };
  for (const auto& ex : corpus) {
    count(ex.source_sentences);
    count(ex.target_sentences);
  }
  Vocabulary probe;
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, c] : counts)
    if (!probe.contains(tok)) ranked.emplace_back(tok, c);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);
  Vocabulary v;
  for (const auto& [tok, c] : ranked) v.add(tok);
  return v;
}

// ---------------------------------------------------------------------------
// Copy alignment

// Tags source position i with 1 iff some longest common source/target span
// containing i is the first occurrence of that span in the source.
template <class T>
std::vector<int> align_copy_labels(std::span<const T> source, std::span<const T> target) {
  const std::size_t n = source.size();
  const std::size_t m = target.size();
  std::vector<int> tags(n, 0);
  if (n == 0 || m == 0) return tags;

  // longest[e]: length of the longest source span ending at e found in target.
  std::vector<std::size_t> longest(n, 0);
  std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t e = 0; e < n; ++e) {
    std::size_t best = 0;
    for (std::size_t j = 0; j < m; ++j) {
      cur[j + 1] = source[e] == target[j] ? prev[j] + 1 : 0;
      best = std::max(best, cur[j + 1]);
    }
    longest[e] = best;
    std::swap(prev, cur);
  }

  // earlier[s]: longest prefix of source[s..] that also starts at some s' < s.
  std::vector<std::size_t> earlier(n, 0);
  {
    std::vector<std::size_t> row(n + 1, 0), next(n + 1, 0);
    // lcp(a, b) for a < b computed from the back; next holds row a + 1.
    for (std::size_t a = n; a-- > 0;) {
      for (std::size_t b = n; b-- > a + 1;) {
        row[b] = source[a] == source[b] ? next[b + 1] + 1 : 0;
        earlier[b] = std::max(earlier[b], row[b]);
      }
      std::swap(row, next);
    }
  }

  std::vector<std::size_t> max_len(n, 0);
  for (std::size_t e = 0; e < n; ++e) {
    if (longest[e] == 0) continue;
    for (std::size_t i = e + 1 - longest[e]; i <= e; ++i) max_len[i] = std::max(max_len[i], longest[e]);
  }
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t len = longest[e];
    if (len == 0) continue;
    const std::size_t start = e + 1 - len;
    if (earlier[start] >= len) continue;  // an identical span occurs earlier
    for (std::size_t i = start; i <= e; ++i)
      if (max_len[i] == len) tags[i] = 1;
  }
  return tags;
}

inline std::vector<int> align_copy_labels(const TokenList& source, const TokenList& target) {
  return align_copy_labels<Token>(std::span<const Token>(source), std::span<const Token>(target));
}

// For every target position, the source positions it is copied from: the
// first source occurrence of the longest common span covering that position.
// Empty when the target token does not occur in the source.
template <class T>
std::vector<std::vector<int>> align_copy_positions(std::span<const T> source, std::span<const T> target) {
  const std::size_t n = source.size();
  const std::size_t m = target.size();
  std::vector<std::vector<int>> gold(m);
  if (n == 0 || m == 0) return gold;

  // longest[f]: longest target span ending at f found in the source, and the
  // first source start position of such a span.
  std::vector<std::size_t> longest(m, 0);
  std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t f = 0; f < m; ++f) {
    std::size_t best = 0;
    for (std::size_t e = 0; e < n; ++e) {
      cur[e + 1] = target[f] == source[e] ? prev[e] + 1 : 0;
      best = std::max(best, cur[e + 1]);
    }
    longest[f] = best;
    std::swap(prev, cur);
  }
  auto first_occurrence = [&](std::size_t tstart, std::size_t len) -> std::size_t {
    for (std::size_t s = 0; s + len <= n; ++s) {
      std::size_t k = 0;
      while (k < len && source[s + k] == target[tstart + k]) ++k;
      if (k == len) return s;
    }
    return n;
  };
  std::vector<std::size_t> max_len(m, 0);
  for (std::size_t f = 0; f < m; ++f) {
    if (longest[f] == 0) continue;
    for (std::size_t j = f + 1 - longest[f]; j <= f; ++j) max_len[j] = std::max(max_len[j], longest[f]);
  }
  for (std::size_t f = 0; f < m; ++f) {
    const std::size_t len = longest[f];
    if (len == 0) continue;
    const std::size_t tstart = f + 1 - len;
    const std::size_t s = first_occurrence(tstart, len);
    for (std::size_t j = tstart; j <= f; ++j) {
      if (max_len[j] != len) continue;
      const int pos = static_cast<int>(s + (j - tstart));
      if (std::find(gold[j].begin(), gold[j].end(), pos) == gold[j].end()) gold[j].push_back(pos);
    }
  }
  for (auto& g : gold) std::sort(g.begin(), g.end());
  return gold;
}

inline std::vector<std::vector<int>> align_copy_positions(const TokenList& source, const TokenList& target) {
  return align_copy_positions<Token>(std::span<const Token>(source), std::span<const Token>(target));
}

// ---------------------------------------------------------------------------
// Truncation

inline std::vector<TokenList> truncate_sentences(const std::vector<TokenList>& sents, std::size_t max_tokens) {
  std::vector<TokenList> out;
  std::size_t left = max_tokens;
  for (const auto& s : sents) {
    if (left == 0) break;
    if (s.empty()) continue;
    const std::size_t take = std::min(left, s.size());
    out.emplace_back(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(take));
    left -= take;
  }
  return out;
}

// Keeps the first max_src source tokens and max_tgt target tokens. Copy
// labels are always recomputed on the truncated pair.
inline ExamplePair truncate_example(const ExamplePair& ex, std::size_t max_src, std::size_t max_tgt) {
  if (max_src < 1 || max_tgt < 1) throw Error("truncation limits must be at least 1");
  ExamplePair out;
  out.id = ex.id;
  out.source_sentences = truncate_sentences(ex.source_sentences, max_src);
  out.target_sentences = truncate_sentences(ex.target_sentences, max_tgt);
  out.copy_labels = align_copy_labels(out.source(), out.target());
  return out;
}

// ---------------------------------------------------------------------------
// JSON-lines dataset files: {"id", "src_sents": [str], "tgt_sents": [str],
// optional "copy_labels": [0|1]}. Sentences are tokenized on load.

inline nlohmann::json example_to_json(const ExamplePair& ex) {
  nlohmann::json j;
  j["id"] = ex.id;
  auto sents = [](const std::vector<TokenList>& ss) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : ss) a.push_back(join(s));
    return a;
  };
  j["src_sents"] = sents(ex.source_sentences);
  j["tgt_sents"] = sents(ex.target_sentences);
  if (ex.copy_labels) j["copy_labels"] = *ex.copy_labels;
  return j;
}

inline ExamplePair example_from_json(const nlohmann::json& j, std::size_t line_no) {
  auto where = [&] { return " at line " + std::to_string(line_no); };
  if (!j.is_object()) throw Error("expected a JSON object" + where());
  for (const char* field : {"id", "src_sents", "tgt_sents"})
    if (!j.contains(field)) throw Error(std::string("missing field ") + field + where());
  ExamplePair ex;
  const auto& id = j.at("id");
  ex.id = id.is_string() ? id.get<std::string>() : id.dump();
  auto sents = [&](const char* field) {
    const auto& a = j.at(field);
    if (!a.is_array()) throw Error(std::string("field ") + field + " must be an array" + where());
    std::vector<TokenList> out;
    for (const auto& s : a) {
      if (!s.is_string()) throw Error(std::string("field ") + field + " must hold strings" + where());
      auto toks = tokenize(s.get<std::string>());
      if (!toks.empty()) out.push_back(std::move(toks));
    }
    return out;
  };
  ex.source_sentences = sents("src_sents");
  ex.target_sentences = sents("tgt_sents");
  if (j.contains("copy_labels")) {
    std::vector<int> labels;
    for (const auto& v : j.at("copy_labels")) {
      if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1))
        throw Error("copy_labels must be 0/1" + where());
      labels.push_back(v.get<int>());
    }
    if (labels.size() != ex.source_length())
      throw Error("copy_labels length " + std::to_string(labels.size()) + " does not match source length " +
                  std::to_string(ex.source_length()) + where());
    ex.copy_labels = std::move(labels);
  }
  return ex;
}

inline std::vector<ExamplePair> parse_dataset(std::istream& in) {
  std::vector<ExamplePair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error("malformed JSON at line " + std::to_string(line_no));
    }
    out.push_back(example_from_json(j, line_no));
  }
  return out;
}

inline std::vector<ExamplePair> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset " + path);
  return parse_dataset(in);
}

inline void write_dataset(const std::vector<ExamplePair>& pairs, std::ostream& out) {
  for (const auto& ex : pairs) out << example_to_json(ex).dump() << '\n';
}

inline void write_dataset(const std::vector<ExamplePair>& pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset " + path);
  write_dataset(pairs, out);
}

// One selector training example per source sentence, labels sliced from the
// document-level alignment.
struct LabeledSentence {
  TokenList tokens;
  std::vector<int> labels;
};

inline std::vector<LabeledSentence> split_labeled_sentences(const ExamplePair& ex) {
  std::vector<int> labels = ex.copy_labels ? *ex.copy_labels : align_copy_labels(ex.source(), ex.target());
  std::vector<LabeledSentence> out;
  std::size_t offset = 0;
  for (const auto& s : ex.source_sentences) {
    LabeledSentence ls;
    ls.tokens = s;
    ls.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(offset),
                     labels.begin() + static_cast<std::ptrdiff_t>(offset + s.size()));
    offset += s.size();
    out.push_back(std::move(ls));
  }
  return out;
}

}  // namespace busum
