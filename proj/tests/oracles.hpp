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

// Independent brute-force references used by the unit and acceptance suites.
// Nothing here calls into the library code it is used to check.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace busum::oracle {

template <class T>
bool occurs_in(const std::vector<T>& hay, std::size_t s, std::size_t len, const std::vector<T>& src) {
  for (std::size_t p = 0; p + len <= hay.size(); ++p) {
    bool ok = true;
    for (std::size_t k = 0; k < len && ok; ++k) ok = hay[p + k] == src[s + k];
    if (ok) return true;
  }
  return false;
}

// Longest common source span length covering each source position.
template <class T>
std::vector<std::size_t> longest_common_cover(const std::vector<T>& src, const std::vector<T>& tgt) {
  const std::size_t n = src.size();
  std::vector<std::size_t> best(n, 0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t e = s; e < n; ++e)
      if (occurs_in(tgt, s, e - s + 1, src))
        for (std::size_t i = s; i <= e; ++i) best[i] = std::max(best[i], e - s + 1);
  return best;
}

// Enumerates every source span and applies the labeling rules literally:
// the span occurs in the target, is a longest such span for position i, and
// no identical span starts earlier in the source.
template <class T>
std::vector<int> align_labels(const std::vector<T>& src, const std::vector<T>& tgt) {
  const std::size_t n = src.size();
  std::vector<int> tags(n, 0);
  const auto best = longest_common_cover(src, tgt);
  for (std::size_t i = 0; i < n; ++i) {
    if (best[i] == 0) continue;
    for (std::size_t s = 0; s <= i && !tags[i]; ++s) {
      const std::size_t e = s + best[i] - 1;
      if (e < i || e >= n) continue;
      if (!occurs_in(tgt, s, best[i], src)) continue;
      bool earlier = false;
      for (std::size_t u = 0; u < s && !earlier; ++u) {
        bool same = true;
        for (std::size_t k = 0; k < best[i] && same; ++k) same = src[u + k] == src[s + k];
        earlier = same;
      }
      if (!earlier) tags[i] = 1;
    }
  }
  return tags;
}

// Longest common subsequence by enumerating every subsequence of `a`.
template <class T>
std::size_t lcs_length(const std::vector<T>& a, const std::vector<T>& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::size_t len = static_cast<std::size_t>(__builtin_popcountll(mask));
    if (len <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1)) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else ++j;
    }
    if (ok) best = len;
  }
  return best;
}


// align_labels for small alphabets, with span occurrence looked up in a table
// built by listing every substring of the target. Symbols are 0..k-1.
class SpanTable {
 public:
  SpanTable(const std::vector<int>& target, int alphabet) : k_(alphabet) {
    std::size_t off = 0, pw = 1;
    offset_.push_back(0);
    for (std::size_t len = 1; len <= target.size(); ++len) {
      pw *= static_cast<std::size_t>(k_);
      off += pw / static_cast<std::size_t>(k_);
      offset_.push_back(off);
    }
    seen_.assign(off + pw + 1, 0);
    for (std::size_t s = 0; s < target.size(); ++s)
      for (std::size_t e = s; e < target.size(); ++e) seen_[code(target, s, e - s + 1)] = 1;
    max_len_ = target.size();
  }

  bool occurs(const std::vector<int>& src, std::size_t s, std::size_t len) const {
    return len <= max_len_ && seen_[code(src, s, len)];
  }

 private:
  std::size_t code(const std::vector<int>& v, std::size_t s, std::size_t len) const {
    std::size_t c = 0;
    for (std::size_t k = 0; k < len; ++k) c = c * static_cast<std::size_t>(k_) + static_cast<std::size_t>(v[s + k]);
    return offset_[len] + c;
  }

  int k_;
  std::size_t max_len_ = 0;
  std::vector<std::size_t> offset_;
  std::vector<char> seen_;
};

inline std::vector<int> align_labels_table(const std::vector<int>& src, const SpanTable& table) {
  const std::size_t n = src.size();
  std::vector<std::size_t> best(n, 0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t e = s; e < n; ++e)
      if (table.occurs(src, s, e - s + 1))
        for (std::size_t i = s; i <= e; ++i) best[i] = std::max(best[i], e - s + 1);
  std::vector<int> tags(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (best[i] == 0) continue;
    const std::size_t len = best[i];
    for (std::size_t s = i + 1 >= len ? i + 1 - len : 0; s <= i && !tags[i]; ++s) {
      if (s + len > n || !table.occurs(src, s, len)) continue;
      bool earlier = false;
      for (std::size_t u = 0; u < s && !earlier; ++u) {
        bool same = true;
        for (std::size_t k = 0; k < len && same; ++k) same = src[u + k] == src[s + k];
        earlier = same;
      }
      if (!earlier) tags[i] = 1;
    }
  }
  return tags;
}


// Exhaustive search over every sequence of at most max_len tokens in which
// eos appears only as the last token. Returns the finished sequence (eos
// dropped) with the highest score
//   logprob / ((5 + len) / 6)^alpha - beta * sum_i (max(1, col_i) - 1),
// where len counts eos and col_i sums the attention of every step; ties go to
// the lexicographically smaller token sequence.
struct ToyStep {
  std::vector<double> probs;
  std::vector<double> attention;
};

struct ExhaustiveBest {
  std::vector<int> tokens;
  double score = -std::numeric_limits<double>::infinity();
  bool found = false;
};

inline ExhaustiveBest exhaustive_best(const std::function<ToyStep(const std::vector<int>&)>& step, int eos,
                                      std::size_t max_len, std::size_t min_len, double alpha, double beta,
                                      bool block_trigrams) {
  ExhaustiveBest best;
  std::vector<int> seq;
  std::vector<std::vector<double>> attn;
  std::vector<int> best_full;
  std::function<void(double)> rec = [&](double logprob) {
    if (seq.size() == max_len) return;
    const ToyStep st = step(seq);
    for (std::size_t w = 0; w < st.probs.size(); ++w) {
      if (st.probs[w] <= 0) continue;
      const int tok = static_cast<int>(w);
      if (tok == eos && seq.size() < min_len) continue;
      seq.push_back(tok);
      bool repeated = false;
      if (block_trigrams) {
        std::set<std::vector<int>> seen;
        for (std::size_t i = 0; i + 2 < seq.size(); ++i)
          if (!seen.insert({seq[i], seq[i + 1], seq[i + 2]}).second) repeated = true;
      }
      if (!repeated) {
        attn.push_back(st.attention);
        const double lp = logprob + std::log(st.probs[w]);
        if (tok == eos) {
          double pen = 0;
          for (std::size_t i = 0; i < st.attention.size(); ++i) {
            double col = 0;
            for (const auto& a : attn) col += a[i];
            pen += std::max(1.0, col) - 1.0;
          }
          const double score = lp / std::pow((5.0 + static_cast<double>(seq.size())) / 6.0, alpha) - beta * pen;
          std::vector<int> body(seq.begin(), seq.end() - 1);
          if (!best.found || score > best.score || (score == best.score && seq < best_full)) {
            best.found = true;
            best.score = score;
            best.tokens = body;
            best_full = seq;
          }
        } else {
          rec(lp);
        }
        attn.pop_back();
      }
      seq.pop_back();
    }
  };
  rec(0.0);
  return best;
}

}  // namespace busum::oracle
