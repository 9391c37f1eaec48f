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
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "busum/bottom_up.hpp"
#include "busum/copy.hpp"
#include "busum/error.hpp"
#include "busum/pointer_gen.hpp"

namespace busum {

struct InferenceConfig {
  std::size_t beam = 5;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t min_length = 0;
  std::size_t max_length = 100;
  bool block_trigrams = false;

  void validate() const {
    if (beam < 1) throw Error("beam size must be at least 1");
    if (max_length < 1) throw Error("max length must be at least 1");
    if (min_length > max_length)
      throw Error("min length " + std::to_string(min_length) + " exceeds max length " + std::to_string(max_length));
    if (alpha < 0 || beta < 0) throw Error("alpha and beta must be nonnegative");
  }
};

inline double length_penalty(std::size_t len, double alpha) {
  return std::pow((5.0 + static_cast<double>(len)) / 6.0, alpha);
}

using AttentionHistory = std::vector<std::vector<double>>;

// Column sums of the attention history.
inline std::vector<double> attention_coverage(const AttentionHistory& history) {
  if (history.empty()) return {};
  std::vector<double> cov(history.front().size(), 0.0);
  for (const auto& a : history) {
    if (a.size() != cov.size())
      throw Error("attention vectors of lengths " + std::to_string(cov.size()) + " and " + std::to_string(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) cov[i] += a[i];
  }
  return cov;
}

inline double coverage_from_columns(const std::vector<double>& cov, double beta) {
  double total = 0;
  for (double c : cov) total += std::max(1.0, c) - 1.0;
  return beta * total;
}

// Penalty magnitude beta * (sum_i max(1, sum_j a_i^j) - n), subtracted from
// the score.
inline double coverage_penalty(const AttentionHistory& history, double beta) {
  return coverage_from_columns(attention_coverage(history), beta);
}

inline double hypothesis_score(double logprob, std::size_t len, const AttentionHistory& history,
                               const InferenceConfig& cfg) {
  return logprob / length_penalty(len, cfg.alpha) - coverage_penalty(history, cfg.beta);
}

// False iff appending candidate repeats a trigram already in tokens.
inline bool trigram_allows(const std::vector<int>& tokens, int candidate) {
  const std::size_t m = tokens.size();
  if (m < 2) return true;
  const int a = tokens[m - 2], b = tokens[m - 1];
  for (std::size_t i = 0; i + 2 < m; ++i)
    if (tokens[i] == a && tokens[i + 1] == b && tokens[i + 2] == candidate) return false;
  return true;
}

inline bool has_repeated_trigram(const std::vector<int>& tokens) {
  std::set<std::array<int, 3>> seen;
  for (std::size_t i = 0; i + 2 < tokens.size(); ++i)
    if (!seen.insert({tokens[i], tokens[i + 1], tokens[i + 2]}).second) return true;
  return false;
}

template <class State>
struct Hypothesis {
  std::vector<int> tokens;
  double logprob = 0;
  State state;
  AttentionHistory attention;
  std::vector<double> coverage;
  bool finished = false;
  double score = 0;
};

template <class State>
bool trigram_allows(const Hypothesis<State>& hyp, int candidate) {
  return trigram_allows(hyp.tokens, candidate);
}

struct StepDistribution {
  std::vector<double> log_probs;  // over the output vocabulary
  std::vector<double> attention;  // over source positions
};

// A model drives the search through an opaque state:
//   initial() -> State
//   step(const State&, int prev) -> std::pair<StepDistribution, State>
template <class M>
concept StepModel = requires(const M& m, const typename M::State& s, int tok) {
  { m.initial() } -> std::convertible_to<typename M::State>;
  { m.step(s, tok) } -> std::convertible_to<std::pair<StepDistribution, typename M::State>>;
  { m.bos() } -> std::convertible_to<int>;
  { m.eos() } -> std::convertible_to<int>;
};

struct BeamResult {
  std::vector<int> tokens;  // without </s>
  double score = 0;
  double logprob = 0;
  bool finished = false;
  AttentionHistory attention;
  std::vector<std::string> warnings;
};

namespace detail {

template <class H>
bool better(const H& a, const H& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace detail

// Penalized beam search. Hypothesis length counts every emitted token,
// </s> included, and </s> is withheld until min_length other tokens exist.
template <StepModel M>
BeamResult beam_search(const M& model, const InferenceConfig& cfg) {
  cfg.validate();
  using State = typename M::State;
  using Hyp = Hypothesis<State>;
  const int eos = model.eos();
  std::vector<Hyp> live(1);
  live[0].state = model.initial();
  std::vector<Hyp> finished;

  for (std::size_t t = 1; t <= cfg.max_length && !live.empty(); ++t) {
    std::vector<Hyp> cand;
    for (const auto& h : live) {
      const int prev = h.tokens.empty() ? model.bos() : h.tokens.back();
      auto [dist, next] = model.step(h.state, prev);
      std::vector<double> cov = h.coverage;
      if (cov.empty()) cov.assign(dist.attention.size(), 0.0);
      if (cov.size() != dist.attention.size()) throw Error("attention length changed during decoding");
      for (std::size_t i = 0; i < cov.size(); ++i) cov[i] += dist.attention[i];
      const double cp = coverage_from_columns(cov, cfg.beta);
      for (std::size_t w = 0; w < dist.log_probs.size(); ++w) {
        const double lp = dist.log_probs[w];
        if (!std::isfinite(lp)) continue;
        const int tok = static_cast<int>(w);
        if (tok == eos && h.tokens.size() < cfg.min_length) continue;
        if (cfg.block_trigrams && !trigram_allows(h.tokens, tok)) continue;
        Hyp c;
        c.tokens = h.tokens;
        c.tokens.push_back(tok);
        c.logprob = h.logprob + lp;
        c.state = next;
        c.attention = h.attention;
        c.attention.push_back(dist.attention);
        c.coverage = cov;
        c.finished = tok == eos;
        c.score = c.logprob / length_penalty(t, cfg.alpha) - cp;
        cand.push_back(std::move(c));
      }
    }
    std::sort(cand.begin(), cand.end(), detail::better<Hyp>);
    live.clear();
    for (std::size_t r = 0; r < cand.size() && live.size() < cfg.beam; ++r) {
      if (cand[r].finished) {
        if (r < cfg.beam) finished.push_back(std::move(cand[r]));
      } else {
        live.push_back(std::move(cand[r]));
      }
    }
    if (finished.size() >= cfg.beam) break;
  }

  BeamResult res;
  const Hyp* best = nullptr;
  for (const auto& h : finished)
    if (!best || detail::better(h, *best)) best = &h;
  if (!best) {
    for (const auto& h : live)
      if (!best || detail::better(h, *best)) best = &h;
    res.warnings.push_back("no hypothesis finished within max length; returning the best unfinished one");
  }
  if (!best) {
    res.warnings.push_back("search produced no hypotheses");
    return res;
  }
  res.tokens = best->tokens;
  res.finished = best->finished;
  if (res.finished) res.tokens.pop_back();
  res.score = best->score;
  res.logprob = best->logprob;
  res.attention = best->attention;
  return res;
}

// ---------------------------------------------------------------------------
// Summarizer decoding

enum class MaskKind { kNone, kHard, kSoft };

// Adapts a trained summarizer and one source document to the search.
class SummarizerStepModel {
 public:
  using State = DecoderState<float>;

  SummarizerStepModel(const Summarizer<float>& model, const ExtendedVocabExample& ext, MaskKind mask,
                      std::vector<double> q, MaskConfig mask_cfg)
      : model_(model), ext_(ext), mask_(mask), q_(std::move(q)), mask_cfg_(mask_cfg) {
    NoGradGuard ng;
    enc_ = model_.encode(ext_.source_ids);
    if (mask_ != MaskKind::kNone && q_.size() != ext_.source_ids.size())
      throw Error("selection probabilities have length " + std::to_string(q_.size()) + ", source has " +
                  std::to_string(ext_.source_ids.size()));
    if (mask_ == MaskKind::kHard) {
      mask_cfg_.validate();
      std::vector<double> ones(q_.size(), 1.0);
      fallback_ = hard_mask(ones, q_, mask_cfg_).fallback;
    }
  }

  State initial() const { return model_.initial_state(enc_); }
  int bos() const { return Vocabulary::kBos; }
  int eos() const { return Vocabulary::kEos; }
  bool mask_fallback() const { return fallback_; }

  std::pair<StepDistribution, State> step(const State& s, int prev) const {
    NoGradGuard ng;
    auto out = model_.step(prev, s, enc_);
    std::vector<double> a(out.attention.data().begin(), out.attention.data().end());
    std::vector<double> gen(out.gen.data().begin(), out.gen.data().end());
    const double p = out.p_copy.item();
    std::vector<double> c;
    switch (mask_) {
      case MaskKind::kNone:
        c = a;
        break;
      case MaskKind::kHard:
        c = hard_mask(a, q_, mask_cfg_).weights;
        break;
      case MaskKind::kSoft:
        c = soft_mask(a, q_);
        break;
    }
    auto joint = mixture_distribution(c, gen, p, ext_.source_ext, ext_.extended_size());
    StepDistribution d;
    d.log_probs.resize(joint.size());
    for (std::size_t w = 0; w < joint.size(); ++w)
      d.log_probs[w] = joint[w] > 0 ? std::log(joint[w]) : -std::numeric_limits<double>::infinity();
    d.attention = std::move(a);
    return {std::move(d), out.next};
  }

 private:
  const Summarizer<float>& model_;
  const ExtendedVocabExample& ext_;
  MaskKind mask_;
  std::vector<double> q_;
  MaskConfig mask_cfg_;
  Encoded<float> enc_;
  bool fallback_ = false;
};

struct DecodeOptions {
  InferenceConfig inference;
  bool mask = false;  // hard mask from external or head q; diffmask models always soft-mask
  MaskConfig mask_config;
};

struct DecodedSummary {
  std::string id;
  TokenList tokens;
  std::vector<int> ids;
  double score = 0;
  std::vector<std::string> warnings;
  AttentionHistory attention;

  nlohmann::json to_json() const {
    return {{"id", id}, {"summary", join(tokens)}, {"tokens", ids}, {"score", score}, {"warnings", warnings}};
  }
};

// q: per-source-token selection probabilities for the hard mask. Multi-task
// models fall back to their own head when q is absent.
inline DecodedSummary summarize(const Summarizer<float>& model, const ExamplePair& ex, const DecodeOptions& opt,
                                const std::optional<std::vector<double>>& q = std::nullopt) {
  const auto src = ex.source();
  if (src.empty()) throw Error("example " + ex.id + " has an empty source");
  const auto ext = extend_example(src, {}, model.vocab);
  MaskKind kind = MaskKind::kNone;
  std::vector<double> probs;
  if (model.mode == TrainMode::kDiffMask) {
    NoGradGuard ng;
    kind = MaskKind::kSoft;
    auto t = model.selector_selection(ex.source_sentences, src.size());
    probs.assign(t.data().begin(), t.data().end());
  } else if (opt.mask) {
    kind = MaskKind::kHard;
    if (q) {
      probs = *q;
    } else if (model.mode == TrainMode::kMultiTask) {
      NoGradGuard ng;
      auto t = model.head_selection(model.encode(ext.source_ids));
      probs.assign(t.data().begin(), t.data().end());
    } else {
      throw Error("masked decoding needs selection probabilities");
    }
  }
  SummarizerStepModel sm(model, ext, kind, probs, opt.mask_config);
  auto res = beam_search(sm, opt.inference);
  DecodedSummary out;
  out.id = ex.id;
  out.ids = res.tokens;
  for (int id : res.tokens) out.tokens.push_back(ext.token(id, model.vocab));
  out.score = res.score;
  out.warnings = res.warnings;
  if (sm.mask_fallback()) out.warnings.insert(out.warnings.begin(), "no token passed the selection threshold; mask disabled");
  out.attention = std::move(res.attention);
  return out;
}

// Decodes documents on up to `threads` workers; output order follows input.
template <class F>
std::vector<DecodedSummary> parallel_decode(std::size_t count, std::size_t threads, F&& decode_one) {
  std::vector<DecodedSummary> out(count);
  std::vector<std::string> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        out[i] = decode_one(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, count));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < count; ++i)
    if (!errors[i].empty()) throw Error("document " + std::to_string(i) + ": " + errors[i]);
  return out;
}

}  // namespace busum
