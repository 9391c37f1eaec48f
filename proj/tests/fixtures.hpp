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


// Small models and corpora shared by the unit and acceptance suites.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "busum/corpus.hpp"
#include "busum/decode.hpp"
#include "busum/pointer_gen.hpp"
#include "busum/rng.hpp"
#include "oracles.hpp"

namespace busum::testing {

// Step distributions are a fixed pseudo-random function of the prefix.
struct ToyModel {
  using State = std::vector<int>;

  std::size_t vocab = 3;
  std::size_t positions = 2;
  std::uint64_t seed = 0;
  double zero_rate = 0.0;  // chance that a non-eos token gets probability 0
  int eos_token = 0;

  oracle::ToyStep at(const std::vector<int>& prefix) const {
    std::uint64_t h = seed * 0x9e3779b97f4a7c15ULL + 17;
    for (int t : prefix) h = (h ^ static_cast<std::uint64_t>(t + 1)) * 1099511628211ULL;
    h ^= prefix.size() * 0x2545f4914f6cdd1dULL;
    Rng rng(h);
    oracle::ToyStep s;
    double z = 0;
    for (std::size_t w = 0; w < vocab; ++w) {
      double p = 0.05 + rng.uniform();
      if (static_cast<int>(w) != eos_token && rng.uniform() < zero_rate) p = 0;
      s.probs.push_back(p);
      z += p;
    }
    for (auto& p : s.probs) p /= z;
    double za = 0;
    for (std::size_t i = 0; i < positions; ++i) {
      s.attention.push_back(std::exp(3 * rng.uniform()));
      za += s.attention.back();
    }
    for (auto& a : s.attention) a /= za;
    return s;
  }

  State initial() const { return {}; }
  int bos() const { return -1; }
  int eos() const { return eos_token; }

  std::pair<StepDistribution, State> step(const State& s, int prev) const {
    State prefix = s;
    if (prev != bos()) prefix.push_back(prev);
    const auto t = at(prefix);
    StepDistribution d;
    for (double p : t.probs) d.log_probs.push_back(p > 0 ? std::log(p) : -std::numeric_limits<double>::infinity());
    d.attention = t.attention;
    return {d, prefix};
  }
};

inline Vocabulary word_vocab(std::size_t n) {
  Vocabulary v;
  for (std::size_t i = 0; i < n; ++i) v.add("w" + std::to_string(i));
  return v;
}

inline PGConfig tiny_pg(AttentionKind kind = AttentionKind::kBilinear) {
  PGConfig c;
  c.emb_dim = 3;
  c.enc_hidden = 2;
  c.dec_hidden = 4;
  c.additive_dim = 3;
  c.attention = kind;
  c.init_range = 0.5;
  return c;
}

inline ExamplePair make_pair(const std::string& id, std::vector<TokenList> source, std::vector<TokenList> target) {
  ExamplePair ex;
  ex.id = id;
  ex.source_sentences = std::move(source);
  ex.target_sentences = std::move(target);
  return ex;
}

// Random words from a pool of `pool` names, some outside any vocabulary.
inline ExamplePair random_pair(Rng& rng, const std::string& id, std::size_t pool, std::size_t max_src,
                               std::size_t max_tgt) {
  auto word = [&] { return "w" + std::to_string(rng.below(pool)); };
  std::vector<TokenList> src(1 + rng.below(2));
  for (auto& s : src) {
    const std::size_t len = 1 + rng.below(max_src);
    for (std::size_t i = 0; i < len; ++i) s.push_back(word());
  }
  TokenList tgt;
  const auto flat = ExamplePair::flatten(src);
  const std::size_t m = 1 + rng.below(max_tgt);
  for (std::size_t j = 0; j < m; ++j) tgt.push_back(rng.below(2) ? flat[rng.below(flat.size())] : word());
  return make_pair(id, src, {tgt});
}

}  // namespace busum::testing
