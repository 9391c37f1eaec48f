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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "busum/corpus.hpp"
#include "busum/error.hpp"
#include "busum/rng.hpp"

namespace busum {

// Documents of filler and content words in which two non-adjacent sentences
// carry a trigger word followed by a content span. The target is the two
// spans; with probability `noise` a span has one interior word substituted.
struct SyntheticConfig {
  std::size_t triggers = 8;
  std::size_t fillers = 40;
  std::size_t content = 151;  // with "." the vocabulary has 200 words
  std::size_t min_doc = 30;
  std::size_t max_doc = 60;
  std::size_t min_sentence = 6;   // plain sentences, "." included
  std::size_t max_sentence = 12;
  std::size_t min_lead = 1;       // words before the trigger
  std::size_t max_lead = 3;
  std::size_t min_span = 4;
  std::size_t max_span = 14;
  double filler_share = 0.5;
  double noise = 0.3;  // per span
};

inline std::string synthetic_trigger(std::size_t k) { return "key" + std::to_string(k); }
inline std::string synthetic_filler(std::size_t k) { return "f" + std::to_string(k); }
inline std::string synthetic_content(std::size_t k) { return "w" + std::to_string(k); }

inline ExamplePair synthetic_example(const SyntheticConfig& cfg, Rng& rng, const std::string& id) {
  if (cfg.min_span < 3 || cfg.max_span < cfg.min_span || cfg.max_sentence < cfg.min_sentence ||
      cfg.max_lead < cfg.min_lead || cfg.min_sentence < 2)
    throw Error("inconsistent synthetic corpus configuration");
  if (cfg.min_doc < 2 * (cfg.min_lead + cfg.min_span + 2) + cfg.min_sentence || cfg.max_doc < cfg.min_doc)
    throw Error("synthetic documents too short for two salient sentences");
  auto between = [&](std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); };
  auto word = [&] {
    return rng.uniform() < cfg.filler_share ? synthetic_filler(rng.below(cfg.fillers))
                                            : synthetic_content(rng.below(cfg.content));
  };
  const std::size_t total = between(cfg.min_doc, cfg.max_doc);
  std::size_t lead[2], span[2];
  std::size_t remaining;
  do {
    for (int k = 0; k < 2; ++k) {
      lead[k] = between(cfg.min_lead, cfg.max_lead);
      span[k] = between(cfg.min_span, cfg.max_span);
    }
    const std::size_t used = lead[0] + span[0] + lead[1] + span[1] + 4;
    remaining = total >= used ? total - used : 0;
  } while (remaining < cfg.min_sentence);

  std::vector<std::size_t> lengths;
  while (remaining >= cfg.min_sentence) {
    std::size_t len;
    if (remaining <= cfg.max_sentence)
      len = remaining;
    else
      len = between(cfg.min_sentence, std::min(cfg.max_sentence, remaining - cfg.min_sentence));
    lengths.push_back(len);
    remaining -= len;
  }
  // Salient sentences go before plain sentence `first` and before plain
  // sentence `second`, with at least one plain sentence between them.
  const std::size_t k = lengths.size();
  const std::size_t first = rng.below(k);
  const std::size_t second = between(first + 1, k);

  ExamplePair ex;
  ex.id = id;
  std::vector<TokenList> spans;
  auto salient = [&](int which) {
    TokenList sent;
    for (std::size_t i = 0; i < lead[which]; ++i) sent.push_back(word());
    sent.push_back(synthetic_trigger(rng.below(cfg.triggers)));
    TokenList sp;
    for (std::size_t i = 0; i < span[which]; ++i) sp.push_back(synthetic_content(rng.below(cfg.content)));
    sent.insert(sent.end(), sp.begin(), sp.end());
    sent.push_back(".");
    ex.source_sentences.push_back(std::move(sent));
    if (rng.uniform() < cfg.noise) sp[between(1, sp.size() - 2)] = synthetic_content(rng.below(cfg.content));
    spans.push_back(std::move(sp));
  };
  for (std::size_t s = 0; s <= k; ++s) {
    if (s == first) salient(0);
    if (s == second) salient(1);
    if (s == k) break;
    TokenList sent;
    for (std::size_t i = 0; i + 1 < lengths[s]; ++i) sent.push_back(word());
    sent.push_back(".");
    ex.source_sentences.push_back(std::move(sent));
  }
  ex.target_sentences = std::move(spans);
  return ex;
}

inline std::vector<ExamplePair> synthetic_corpus(std::size_t docs, const SyntheticConfig& cfg, std::uint64_t seed,
                                                 const std::string& prefix = "syn") {
  Rng rng(seed);
  std::vector<ExamplePair> out;
  out.reserve(docs);
  for (std::size_t d = 0; d < docs; ++d) out.push_back(synthetic_example(cfg, rng, prefix + "-" + std::to_string(d)));
  return out;
}

}  // namespace busum
