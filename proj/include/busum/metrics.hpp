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

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "busum/corpus.hpp"
#include "busum/error.hpp"

namespace busum {

struct RougeScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

inline RougeScore make_rouge(double overlap, double cand_total, double ref_total) {
  RougeScore s;
  s.precision = cand_total > 0 ? overlap / cand_total : 0.0;
  s.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

inline std::map<TokenList, std::size_t> ngram_counts(const TokenList& toks, std::size_t n) {
  std::map<TokenList, std::size_t> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++counts[TokenList(toks.begin() + static_cast<std::ptrdiff_t>(i), toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

inline RougeScore rouge_n(const TokenList& candidate, const TokenList& reference, std::size_t n) {
  if (n == 0) throw Error("rouge_n needs n >= 1");
  const auto c = ngram_counts(candidate, n);
  const auto r = ngram_counts(reference, n);
  std::size_t overlap = 0, ct = 0, rt = 0;
  for (const auto& [g, k] : c) {
    ct += k;
    if (auto it = r.find(g); it != r.end()) overlap += std::min(k, it->second);
  }
  for (const auto& [g, k] : r) rt += k;
  return make_rouge(static_cast<double>(overlap), static_cast<double>(ct), static_cast<double>(rt));
}

inline std::size_t lcs_length(const TokenList& a, const TokenList& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline RougeScore rouge_l(const TokenList& candidate, const TokenList& reference) {
  return make_rouge(static_cast<double>(lcs_length(candidate, reference)), static_cast<double>(candidate.size()),
                    static_cast<double>(reference.size()));
}

// ---------------------------------------------------------------------------
// Extractive baselines

inline TokenList lead_k(const ExamplePair& doc, std::size_t k) {
  if (k == 0) throw Error("lead_k needs k >= 1");
  TokenList out;
  for (std::size_t s = 0; s < std::min(k, doc.source_sentences.size()); ++s)
    out.insert(out.end(), doc.source_sentences[s].begin(), doc.source_sentences[s].end());
  return out;
}

inline void check_q_length(const ExamplePair& doc, std::span<const double> q) {
  if (q.size() != doc.source_length())
    throw Error("selection probabilities have length " + std::to_string(q.size()) + ", document has " +
                std::to_string(doc.source_length()) + " tokens");
}

// Top k sentences by mean q, emitted in document order.
inline TokenList select_top_sentences(const ExamplePair& doc, std::span<const double> q, std::size_t k) {
  check_q_length(doc, q);
  const auto& sents = doc.source_sentences;
  std::vector<double> means(sents.size(), 0.0);
  std::size_t off = 0;
  for (std::size_t s = 0; s < sents.size(); ++s) {
    double acc = 0;
    for (std::size_t i = 0; i < sents[s].size(); ++i) acc += q[off + i];
    means[s] = sents[s].empty() ? 0.0 : acc / static_cast<double>(sents[s].size());
    off += sents[s].size();
  }
  std::vector<std::size_t> order(sents.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
  order.resize(std::min(k, order.size()));
  std::sort(order.begin(), order.end());
  TokenList out;
  for (auto s : order) out.insert(out.end(), sents[s].begin(), sents[s].end());
  return out;
}

// Tokens with q at or above the threshold whose selected count is closest to
// target_len (ties resolved toward fewer tokens), in document order.
inline TokenList extract_words_threshold(const ExamplePair& doc, std::span<const double> q, std::size_t target_len) {
  if (target_len == 0) throw Error("target length must be at least 1");
  check_q_length(doc, q);
  const auto src = doc.source();
  if (src.empty()) return {};
  std::vector<double> vals(q.begin(), q.end());
  std::sort(vals.begin(), vals.end(), std::greater<>());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  auto count_at = [&](double thr) {
    return static_cast<std::size_t>(std::count_if(q.begin(), q.end(), [&](double v) { return v >= thr; }));
  };
  // Counts grow as the threshold walks down the sorted values.
  std::size_t lo = 0, hi = vals.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (count_at(vals[mid]) >= target_len)
      hi = mid;
    else
      lo = mid + 1;
  }
  std::size_t pick = std::min(lo, vals.size() - 1);
  if (lo > 0) {
    const std::size_t above = count_at(vals[lo - 1]);
    const std::size_t at = lo < vals.size() ? count_at(vals[lo]) : above;
    if (lo == vals.size() || target_len - above <= at - target_len) pick = lo - 1;
  }
  const double thr = vals[pick];
  TokenList out;
  for (std::size_t i = 0; i < src.size(); ++i)
    if (q[i] >= thr) out.push_back(src[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Copy analyses

// Percentage of generated tokens found in the source that also occur in the
// reference; nullopt when no generated token occurs in the source.
inline std::optional<double> copied_word_precision(const TokenList& generated, const TokenList& source,
                                                   const TokenList& reference) {
  const std::unordered_set<std::string> src(source.begin(), source.end());
  const std::unordered_set<std::string> ref(reference.begin(), reference.end());
  std::size_t copied = 0, hit = 0;
  for (const auto& t : generated) {
    if (!src.contains(t)) continue;
    ++copied;
    if (ref.contains(t)) ++hit;
  }
  if (copied == 0) return std::nullopt;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(copied);
}

inline constexpr std::size_t kHistogramBuckets = 11;  // 1..10, 11+
using CopyHistogram = std::array<std::size_t, kHistogramBuckets>;

// Greedy longest-match segmentation into runs occurring contiguously in the
// source; each copied token counts toward the bucket of its run length.
inline CopyHistogram copy_phrase_histogram(const TokenList& generated, const TokenList& source) {
  CopyHistogram h{};
  std::size_t j = 0;
  while (j < generated.size()) {
    std::size_t best = 0;
    for (std::size_t s = 0; s < source.size(); ++s) {
      std::size_t k = 0;
      while (j + k < generated.size() && s + k < source.size() && generated[j + k] == source[s + k]) ++k;
      best = std::max(best, k);
    }
    if (best == 0) {
      ++j;
      continue;
    }
    h[std::min(best, kHistogramBuckets) - 1] += best;
    j += best;
  }
  return h;
}

inline double novel_word_rate(const TokenList& generated, const TokenList& source) {
  if (generated.empty()) throw Error("novel word rate of an empty summary");
  const std::unordered_set<std::string> src(source.begin(), source.end());
  std::size_t novel = 0;
  for (const auto& t : generated) novel += !src.contains(t);
  return 100.0 * static_cast<double>(novel) / static_cast<double>(generated.size());
}

// ---------------------------------------------------------------------------
// Reports

inline std::string format_fixed(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

struct MetricReport {
  std::vector<std::pair<std::string, std::string>> rows;  // metric, formatted value
  std::optional<CopyHistogram> histogram;

  void add(const std::string& metric, double value, int decimals = 2) {
    rows.emplace_back(metric, format_fixed(value, decimals));
  }
  void add_text(const std::string& metric, const std::string& value) { rows.emplace_back(metric, value); }

  std::string table() const {
    std::size_t w = 6;
    for (const auto& r : rows) w = std::max(w, r.first.size());
    std::ostringstream os;
    auto line = [&](const std::string& a, const std::string& b) {
      os << a << std::string(w - a.size() + 2, ' ') << b << '\n';
    };
    line("metric", "value");
    for (const auto& r : rows) line(r.first, r.second);
    if (histogram) {
      os << '\n';
      line("bucket", "count");
      for (std::size_t b = 0; b < kHistogramBuckets; ++b)
        line(b + 1 < kHistogramBuckets ? std::to_string(b + 1) : "11+", std::to_string((*histogram)[b]));
    }
    return os.str();
  }

  std::string csv() const {
    std::ostringstream os;
    os << "metric,value\n";
    for (const auto& r : rows) os << r.first << ',' << r.second << '\n';
    if (histogram) {
      os << "bucket,count\n";
      for (std::size_t b = 0; b < kHistogramBuckets; ++b)
        os << (b + 1 < kHistogramBuckets ? std::to_string(b + 1) : "11+") << ',' << (*histogram)[b] << '\n';
    }
    return os.str();
  }
};

struct RougeTotals {
  double r1 = 0, r2 = 0, rl = 0;
  std::size_t count = 0;

  void add(const TokenList& cand, const TokenList& ref) {
    r1 += rouge_n(cand, ref, 1).f1;
    r2 += rouge_n(cand, ref, 2).f1;
    rl += rouge_l(cand, ref).f1;
    ++count;
  }
  // Mean F1 x 100.
  double rouge1() const { return count ? 100.0 * r1 / static_cast<double>(count) : 0.0; }
  double rouge2() const { return count ? 100.0 * r2 / static_cast<double>(count) : 0.0; }
  double rougeL() const { return count ? 100.0 * rl / static_cast<double>(count) : 0.0; }
};

struct CopyTotals {
  std::size_t copied = 0, copied_in_ref = 0, tokens = 0, novel = 0;
  CopyHistogram histogram{};

  void add(const TokenList& generated, const TokenList& source, const TokenList& reference) {
    const std::unordered_set<std::string> src(source.begin(), source.end());
    const std::unordered_set<std::string> ref(reference.begin(), reference.end());
    for (const auto& t : generated) {
      ++tokens;
      if (src.contains(t)) {
        ++copied;
        copied_in_ref += ref.contains(t);
      } else {
        ++novel;
      }
    }
    const auto h = copy_phrase_histogram(generated, source);
    for (std::size_t b = 0; b < kHistogramBuckets; ++b) histogram[b] += h[b];
  }

  // Token-level, pooled over the corpus.
  std::optional<double> precision() const {
    if (copied == 0) return std::nullopt;
    return 100.0 * static_cast<double>(copied_in_ref) / static_cast<double>(copied);
  }
  std::optional<double> novel_rate() const {
    if (tokens == 0) return std::nullopt;
    return 100.0 * static_cast<double>(novel) / static_cast<double>(tokens);
  }
  // Share of copied tokens in runs longer than 10.
  double long_run_share() const {
    std::size_t total = 0;
    for (auto c : histogram) total += c;
    return total ? static_cast<double>(histogram[kHistogramBuckets - 1]) / static_cast<double>(total) : 0.0;
  }
};

}  // namespace busum
