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

// Content selector: a word-level tagger that predicts, for every source
// token, the probability that it is copied into the summary.
//
// Each token is embedded through two channels. The static channel is a
// frozen word-vector table (with a trainable vector for words missing from
// it). The contextual channel runs a token embedding h0 through two
// bidirectional LSTM layers h1, h2 and mixes them as
//   e_c = gamma * (s0 * h0 + s1 * h1 + s2 * h2)
// with four trainable scalars. The concatenated channels feed a stacked
// bidirectional LSTM tagger, and q_i = sigmoid(w . h_i + b).

#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "busum/checkpoint.hpp"
#include "busum/corpus.hpp"
#include "busum/nn.hpp"
#include "busum/optim.hpp"
#include "busum/rng.hpp"
#include "busum/tensor.hpp"
#include "json.hpp"

namespace busum {

struct SelectorConfig {
  std::size_t static_dim = 32;
  std::size_t context_dim = 32;   // h0, h1, h2 width; each recurrent direction has half
  std::size_t tagger_hidden = 64; // per direction
  std::size_t tagger_layers = 2;
  double dropout = 0.5;
  double init_range = 0.1;
  double static_init_range = 1.0;  // random static vectors when no file is given

  nlohmann::json to_json() const {
    return {{"static_dim", static_dim}, {"context_dim", context_dim}, {"tagger_hidden", tagger_hidden},
            {"tagger_layers", tagger_layers}, {"dropout", dropout}, {"init_range", init_range},
            {"static_init_range", static_init_range}};
  }
  static SelectorConfig from_json(const nlohmann::json& j) {
    SelectorConfig c;
    c.static_dim = j.at("static_dim");
    c.context_dim = j.at("context_dim");
    c.tagger_hidden = j.at("tagger_hidden");
    c.tagger_layers = j.at("tagger_layers");
    c.dropout = j.at("dropout");
    c.init_range = j.at("init_range");
    c.static_init_range = j.at("static_init_range");
    return c;
  }
};

// Word vectors in text form: a word followed by `dim` floats per line.
inline std::unordered_map<std::string, std::vector<float>> load_word_vectors(const std::string& path,
                                                                             std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open word vectors " + path);
  std::unordered_map<std::string, std::vector<float>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<float> v;
    float x;
    while (ls >> x) v.push_back(x);
    if (v.size() != dim)
      throw Error("word vector at line " + std::to_string(line_no) + " has " + std::to_string(v.size()) +
                  " values, expected " + std::to_string(dim));
    out.emplace(std::move(word), std::move(v));
  }
  return out;
}

template <class S>
struct ContextLayers {
  std::vector<BasicTensor<S>> h0, h1, h2;
};

// e_c = gamma * sum_l s_l * h_l, with raw (unnormalized) mixing scalars.
template <class S>
BasicTensor<S> mix_layers(const BasicTensor<S>& h0, const BasicTensor<S>& h1, const BasicTensor<S>& h2,
                          const BasicTensor<S>& gamma, const BasicTensor<S>& mix) {
  if (h0.shape() != h1.shape() || h0.shape() != h2.shape())
    throw Error("contextual layer dimensions differ: " + shape_str(h0.shape()) + ", " + shape_str(h1.shape()) + ", " +
                shape_str(h2.shape()));
  if (mix.numel() != 3) throw Error("expected three layer mixing weights");
  auto combined = add(add(scale(h0, pick(mix, 0)), scale(h1, pick(mix, 1))), scale(h2, pick(mix, 2)));
  return scale(combined, gamma);
}

template <class S>
struct Selector {
  SelectorConfig config;
  Vocabulary vocab;
  BasicTensor<S> static_table;      // [V, static_dim], frozen
  BasicTensor<S> static_unk;        // [static_dim], trainable
  std::vector<char> static_known;   // per id: row comes from the static table
  BasicTensor<S> context_table;     // [V, context_dim]
  BiLSTM<S> context1, context2;
  BasicTensor<S> gamma;             // [1]
  BasicTensor<S> mix;               // [3]: s0, s1, s2
  std::vector<BiLSTM<S>> tagger;
  Linear<S> output;                 // [1, 2 * tagger_hidden]

  static Selector init(const SelectorConfig& cfg, Vocabulary vocab, Rng& rng,
                       const std::unordered_map<std::string, std::vector<float>>* vectors = nullptr) {
    if (cfg.context_dim % 2 != 0) throw Error("context_dim must be even");
    Selector m;
    m.config = cfg;
    m.vocab = std::move(vocab);
    const std::size_t V = m.vocab.size();
    const double r = cfg.init_range;
    Rng srng = rng.split("static");
    m.static_table = uniform_param<S>({V, cfg.static_dim}, srng, cfg.static_init_range);
    m.static_table.set_requires_grad(false);
    m.static_known.assign(V, 1);
    for (int id = 0; id < Vocabulary::kNumReserved; ++id) m.static_known[static_cast<std::size_t>(id)] = 0;
    if (vectors) {
      auto data = m.static_table.mutable_data();
      for (std::size_t id = Vocabulary::kNumReserved; id < V; ++id) {
        auto it = vectors->find(m.vocab.token(static_cast<int>(id)));
        if (it == vectors->end()) {
          m.static_known[id] = 0;
          continue;
        }
        for (std::size_t k = 0; k < cfg.static_dim; ++k) data[id * cfg.static_dim + k] = static_cast<S>(it->second[k]);
      }
    }
    Rng prng = rng.split("params");
    m.static_unk = uniform_param<S>({cfg.static_dim}, prng, r);
    m.context_table = uniform_param<S>({V, cfg.context_dim}, prng, r);
    m.context1 = BiLSTM<S>::init(cfg.context_dim, cfg.context_dim / 2, prng, r);
    m.context2 = BiLSTM<S>::init(cfg.context_dim, cfg.context_dim / 2, prng, r);
    m.gamma = BasicTensor<S>::from({1}, {S(1)}, true);
    m.mix = BasicTensor<S>::from({3}, {S(1) / 3, S(1) / 3, S(1) / 3}, true);
    std::size_t in = cfg.static_dim + cfg.context_dim;
    for (std::size_t l = 0; l < cfg.tagger_layers; ++l) {
      m.tagger.push_back(BiLSTM<S>::init(in, cfg.tagger_hidden, prng, r));
      in = 2 * cfg.tagger_hidden;
    }
    m.output = Linear<S>::init(in, 1, prng, r);
    return m;
  }

  // Trainable parameters (the static table is excluded).
  ParamList<S> parameters() const {
    ParamList<S> out;
    out.push_back({"static_unk", static_unk});
    out.push_back({"context_table", context_table});
    context1.collect("context1", out);
    context2.collect("context2", out);
    out.push_back({"gamma", gamma});
    out.push_back({"mix", mix});
    for (std::size_t l = 0; l < tagger.size(); ++l) tagger[l].collect("tagger" + std::to_string(l), out);
    output.collect("output", out);
    return out;
  }

  ParamList<S> all_tensors() const {
    auto out = parameters();
    out.push_back({"static_table", static_table});
    return out;
  }

  std::vector<int> ids(const TokenList& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(vocab.id(t));
    return out;
  }

  ContextLayers<S> context_layers(const std::vector<int>& ids) const {
    ContextLayers<S> L;
    for (int id : ids) L.h0.push_back(row(context_table, static_cast<std::size_t>(id)));
    L.h1 = context1(L.h0).states;
    L.h2 = context2(L.h1).states;
    return L;
  }

  std::vector<BasicTensor<S>> contextual_embed(const std::vector<int>& ids) const {
    auto L = context_layers(ids);
    std::vector<BasicTensor<S>> out;
    for (std::size_t i = 0; i < ids.size(); ++i) out.push_back(mix_layers(L.h0[i], L.h1[i], L.h2[i], gamma, mix));
    return out;
  }

  BasicTensor<S> static_embed(int id) const {
    return static_known[static_cast<std::size_t>(id)] ? row(static_table, static_cast<std::size_t>(id)) : static_unk;
  }

  // Selection probabilities q for one token sequence. Dropout is active only
  // when `train_rng` is given.
  BasicTensor<S> forward(const std::vector<int>& ids, Rng* train_rng = nullptr) const {
    if (ids.empty()) throw Error("selector input is empty");
    const double p = train_rng ? config.dropout : 0.0;
    auto ec = contextual_embed(ids);
    std::vector<BasicTensor<S>> x;
    x.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto e = concat<S>({static_embed(ids[i]), ec[i]});
      x.push_back(p > 0 ? dropout(e, p, *train_rng) : e);
    }
    for (const auto& layer : tagger) {
      x = layer(x).states;
      if (p > 0)
        for (auto& h : x) h = dropout(h, p, *train_rng);
    }
    std::vector<BasicTensor<S>> logits;
    logits.reserve(x.size());
    for (const auto& h : x) logits.push_back(output(h));
    return sigmoid(concat(logits));
  }

  BasicTensor<S> forward(const TokenList& tokens, Rng* train_rng = nullptr) const {
    return forward(ids(tokens), train_rng);
  }

  // Inference: per-sentence tagging concatenated over the document.
  std::vector<float> predict_document(const std::vector<TokenList>& sentences) const {
    NoGradGuard ng;
    std::vector<float> q;
    for (const auto& s : sentences) {
      if (s.empty()) continue;
      auto qs = forward(s);
      for (S v : qs.data()) q.push_back(static_cast<float>(v));
    }
    return q;
  }
};

// Mean binary cross-entropy of q against 0/1 labels.
template <class S>
BasicTensor<S> selector_loss(const BasicTensor<S>& q, const std::vector<int>& labels) {
  return binary_cross_entropy(q, labels);
}

// Area under the ROC curve, P(q_pos > q_neg) + 0.5 P(q_pos == q_neg),
// computed exactly with midranks.
template <class Q>
double compute_auc(const std::vector<Q>& q, const std::vector<int>& labels) {
  if (q.size() != labels.size()) throw Error("AUC inputs differ in length");
  std::size_t pos = 0;
  for (int t : labels) pos += t != 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw Error("AUC undefined");
  std::vector<std::size_t> idx(q.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return q[a] < q[b]; });
  long double pos_rank_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && q[idx[j]] == q[idx[i]]) ++j;
    const long double midrank = (static_cast<long double>(i + 1) + static_cast<long double>(j)) / 2;
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]]) pos_rank_sum += midrank;
    i = j;
  }
  const long double P = static_cast<long double>(pos), N = static_cast<long double>(neg);
  return static_cast<double>((pos_rank_sum - P * (P + 1) / 2) / (P * N));
}

// ---------------------------------------------------------------------------
// Training

struct SelectorTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::size_t max_examples = 100000;
  double learning_rate = 0.15;
  double initial_accumulator = 0.1;
  double validation_fraction = 0.05;
  std::uint64_t seed = 1;
};

struct SelectorTrainReport {
  std::size_t examples_consumed = 0;
  std::size_t train_examples = 0;
  std::size_t validation_examples = 0;
  std::size_t best_epoch = 0;
  double best_validation_auc = -1;
  std::vector<nlohmann::json> history;
};

template <class S>
double selector_corpus_auc(const Selector<S>& model, const std::vector<LabeledSentence>& data) {
  NoGradGuard ng;
  std::vector<double> q;
  std::vector<int> t;
  for (const auto& ex : data) {
    if (ex.tokens.empty()) continue;
    auto qs = model.forward(ex.tokens);
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      q.push_back(static_cast<double>(qs[i]));
      t.push_back(ex.labels[i]);
    }
  }
  return compute_auc(q, t);
}

namespace detail {

template <class S>
std::vector<std::vector<S>> snapshot(const ParamList<S>& params) {
  std::vector<std::vector<S>> out;
  for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

template <class S>
void restore(const ParamList<S>& params, const std::vector<std::vector<S>>& snap) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto t = params[k].tensor;
    std::copy(snap[k].begin(), snap[k].end(), t.mutable_data().begin());
  }
}

}  // namespace detail

// Trains in place with Adagrad and dropout, keeping the parameters with the
// best validation AUC. At most cfg.max_examples sentences are consumed
// (validation included); without an explicit validation set a fraction of
// them is held out.
template <class S>
SelectorTrainReport train_selector(Selector<S>& model, std::vector<LabeledSentence> data,
                                   std::optional<std::vector<LabeledSentence>> validation,
                                   const SelectorTrainConfig& cfg,
                                   const std::function<void(const nlohmann::json&)>& log = {}) {
  std::erase_if(data, [](const LabeledSentence& s) { return s.tokens.empty(); });
  if (data.empty()) throw Error("no labeled examples");
  for (const auto& s : data)
    if (s.labels.size() != s.tokens.size()) throw Error("label length does not match sentence length");
  if (data.size() > cfg.max_examples) data.resize(cfg.max_examples);

  SelectorTrainReport rep;
  rep.examples_consumed = data.size();
  Rng rng(cfg.seed);
  if (!validation) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng split = rng.split("validation");
    split.shuffle(idx);
    std::size_t nval = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(data.size()));
    if (nval == 0 && data.size() >= 2 && cfg.validation_fraction > 0) nval = 1;
    std::vector<char> is_val(data.size(), 0);
    for (std::size_t k = 0; k < nval; ++k) is_val[idx[k]] = 1;
    std::vector<LabeledSentence> train, val;
    for (std::size_t i = 0; i < data.size(); ++i) (is_val[i] ? val : train).push_back(std::move(data[i]));
    data = std::move(train);
    validation = std::move(val);
  }
  rep.train_examples = data.size();
  rep.validation_examples = validation->size();
  if (cfg.epochs == 0) return rep;

  auto params = model.parameters();
  auto opt = adagrad_init(params, cfg.learning_rate, cfg.initial_accumulator);
  auto best = detail::snapshot(params);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = rng.split("shuffle");
  Rng dropout_rng = rng.split("dropout");
  const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double total = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      zero_grads(params);
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = data[order[k]];
        auto q = model.forward(ex.tokens, &dropout_rng);
        auto loss = scale(selector_loss(q, ex.labels), S(1) / static_cast<S>(end - start));
        total += static_cast<double>(loss.item()) * static_cast<double>(end - start);
        loss.backward();
      }
      adagrad_step(params, opt);
    }
    std::optional<double> auc;
    try {
      if (!validation->empty()) auc = selector_corpus_auc(model, *validation);
    } catch (const Error&) {
      auc.reset();
    }
    nlohmann::json line = {{"epoch", epoch}, {"train_loss", total / static_cast<double>(data.size())}};
    line["val_auc"] = auc ? nlohmann::json(*auc) : nlohmann::json(nullptr);
    rep.history.push_back(line);
    if (log) log(line);
    // Without a usable validation AUC the latest parameters are kept.
    if (!auc || *auc > rep.best_validation_auc) {
      rep.best_validation_auc = auc ? *auc : rep.best_validation_auc;
      rep.best_epoch = epoch;
      best = detail::snapshot(params);
    }
  }
  detail::restore(params, best);
  return rep;
}

// ---------------------------------------------------------------------------
// Persistence

inline void save_selector(const Selector<float>& m, nlohmann::json config_echo, const std::string& path) {
  Container c;
  c.meta = {{"kind", "selector"}, {"model", m.config.to_json()}, {"vocab", m.vocab.entries()},
            {"static_known", std::vector<int>(m.static_known.begin(), m.static_known.end())},
            {"config", std::move(config_echo)}};
  store_params(m.all_tensors(), c);
  write_container(c, path);
}

inline Selector<float> selector_from_container(const Container& c) {
  if (c.meta.value("kind", "") != "selector") throw Error("checkpoint does not hold a selector");
  Rng rng(0);
  auto m = Selector<float>::init(SelectorConfig::from_json(c.meta.at("model")),
                                 Vocabulary(c.meta.at("vocab").get<std::vector<std::string>>()), rng);
  auto known = c.meta.at("static_known").get<std::vector<int>>();
  m.static_known.assign(known.begin(), known.end());
  restore_params(m.all_tensors(), c);
  return m;
}

inline Selector<float> load_selector(const std::string& path) { return selector_from_container(read_container(path)); }

}  // namespace busum
