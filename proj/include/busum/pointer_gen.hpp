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

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "busum/bottom_up.hpp"
#include "busum/checkpoint.hpp"
#include "busum/copy.hpp"
#include "busum/corpus.hpp"
#include "busum/error.hpp"
#include "busum/nn.hpp"
#include "busum/optim.hpp"
#include "busum/rng.hpp"
#include "busum/selector.hpp"
#include "busum/tensor.hpp"

namespace busum {

enum class AttentionKind { kDot, kBilinear, kAdditive };

inline std::string to_string(AttentionKind k) {
  switch (k) {
    case AttentionKind::kDot:
      return "dot";
    case AttentionKind::kBilinear:
      return "bilinear";
    case AttentionKind::kAdditive:
      return "additive";
  }
  return "bilinear";
}

inline AttentionKind parse_attention_kind(std::string_view s) {
  if (s == "dot") return AttentionKind::kDot;
  if (s == "bilinear" || s == "general") return AttentionKind::kBilinear;
  if (s == "additive") return AttentionKind::kAdditive;
  throw Error("unknown attention '" + std::string(s) + "' (expected dot, bilinear or additive)");
}

struct PGConfig {
  std::size_t emb_dim = 32;
  std::size_t enc_hidden = 32;  // per direction
  std::size_t dec_hidden = 64;
  std::size_t additive_dim = 64;
  AttentionKind attention = AttentionKind::kBilinear;
  double init_range = 0.1;
  double task_weight = 1.0;

  void validate() const {
    if (emb_dim == 0 || enc_hidden == 0 || dec_hidden == 0) throw Error("model dimensions must be positive");
    if (2 * enc_hidden != dec_hidden)
      throw Error("decoder hidden size " + std::to_string(dec_hidden) + " must equal twice the encoder hidden size " +
                  std::to_string(enc_hidden));
  }

  nlohmann::json to_json() const {
    return {{"emb_dim", emb_dim},     {"enc_hidden", enc_hidden},         {"dec_hidden", dec_hidden},
            {"additive_dim", additive_dim}, {"attention", to_string(attention)}, {"init_range", init_range},
            {"task_weight", task_weight}};
  }

  static PGConfig from_json(const nlohmann::json& j) {
    PGConfig c;
    c.emb_dim = j.at("emb_dim").get<std::size_t>();
    c.enc_hidden = j.at("enc_hidden").get<std::size_t>();
    c.dec_hidden = j.at("dec_hidden").get<std::size_t>();
    c.additive_dim = j.at("additive_dim").get<std::size_t>();
    c.attention = parse_attention_kind(j.at("attention").get<std::string>());
    c.init_range = j.at("init_range").get<double>();
    c.task_weight = j.at("task_weight").get<double>();
    return c;
  }
};

// Everything the losses need about one training pair.
struct PreparedExample {
  std::string id;
  ExtendedVocabExample ext;
  std::vector<TokenList> source_sentences;
  std::vector<int> copy_labels;                 // per source position
  std::vector<std::vector<std::size_t>> gold;   // per decoder step, </s> included
  std::vector<char> copied;                     // per decoder step
};

inline PreparedExample prepare_example(const ExamplePair& ex, const Vocabulary& vocab) {
  PreparedExample p;
  p.id = ex.id;
  const auto src = ex.source();
  const auto tgt = ex.target();
  if (src.empty()) throw Error("example " + ex.id + " has an empty source");
  p.ext = extend_example(src, tgt, vocab);
  p.source_sentences = ex.source_sentences;
  p.copy_labels = ex.copy_labels ? *ex.copy_labels : align_copy_labels(src, tgt);
  const auto positions = align_copy_positions(src, tgt);
  const std::unordered_set<std::string> src_set(src.begin(), src.end());
  for (std::size_t j = 0; j < tgt.size(); ++j) {
    p.gold.emplace_back(positions[j].begin(), positions[j].end());
    p.copied.push_back(src_set.contains(tgt[j]));
  }
  p.gold.emplace_back();
  p.copied.push_back(0);
  return p;
}

template <class S>
struct Encoded {
  std::vector<BasicTensor<S>> states;  // [2 * enc_hidden] per position
  BasicTensor<S> memory;               // [n, 2 * enc_hidden]
  BasicTensor<S> keys;                 // additive attention only: [n, additive_dim]
  LSTMState<S> init;
};

template <class S>
struct DecoderState {
  LSTMState<S> lstm;
  BasicTensor<S> feed;  // previous attentional hidden state
};

template <class S>
struct DecoderStepOutput {
  BasicTensor<S> attention;  // [n]
  BasicTensor<S> gen;        // [V]
  BasicTensor<S> p_copy;     // [1]
  DecoderState<S> next;
};

template <class S>
struct SequenceLoss {
  BasicTensor<S> total;
  BasicTensor<S> nll;  // mean over target steps
  double nll_sum = 0;
  std::size_t tokens = 0;
  std::size_t skipped_gold = 0;
};

template <class S>
struct Summarizer {
  PGConfig config;
  TrainMode mode = TrainMode::kBaseline;
  Vocabulary vocab;
  BasicTensor<S> src_embedding;  // [V, emb]
  BasicTensor<S> tgt_embedding;  // [V, emb]
  BiLSTM<S> encoder;
  Linear<S> bridge_h;
  Linear<S> bridge_c;
  LSTMCell<S> decoder;       // input [emb; feed]
  BasicTensor<S> attn_weight;  // bilinear [dec, 2*enc]; additive [A, 2*enc]
  BasicTensor<S> attn_query;   // additive [A, dec]
  BasicTensor<S> attn_v;       // additive [A]
  Linear<S> combine;         // [dec, 2*enc + dec]
  Linear<S> generator;       // [V, dec]
  Linear<S> switch_gate;     // [1, 2*enc + dec + emb]
  Linear<S> selector_head;   // multi-task: [1, 2*enc]
  std::optional<Selector<S>> selector;  // diffmask

  static Summarizer init(const PGConfig& cfg, Vocabulary vocab, TrainMode mode, Rng& rng,
                         std::optional<Selector<S>> selector = std::nullopt) {
    cfg.validate();
    if (mode == TrainMode::kDiffMask && !selector) throw Error("diffmask training needs a selector");
    Summarizer m;
    m.config = cfg;
    m.mode = mode;
    m.vocab = std::move(vocab);
    const std::size_t v = m.vocab.size(), e = cfg.emb_dim, he = cfg.enc_hidden, hd = cfg.dec_hidden;
    const double r = cfg.init_range;
    m.src_embedding = uniform_param<S>({v, e}, rng, r);
    m.tgt_embedding = uniform_param<S>({v, e}, rng, r);
    m.encoder = BiLSTM<S>::init(e, he, rng, r);
    m.bridge_h = Linear<S>::init(2 * he, hd, rng, r);
    m.bridge_c = Linear<S>::init(2 * he, hd, rng, r);
    m.decoder = LSTMCell<S>::init(e + hd, hd, rng, r);
    if (cfg.attention == AttentionKind::kBilinear) {
      m.attn_weight = uniform_param<S>({hd, 2 * he}, rng, r);
    } else if (cfg.attention == AttentionKind::kAdditive) {
      m.attn_weight = uniform_param<S>({cfg.additive_dim, 2 * he}, rng, r);
      m.attn_query = uniform_param<S>({cfg.additive_dim, hd}, rng, r);
      m.attn_v = uniform_param<S>({cfg.additive_dim}, rng, r);
    }
    m.combine = Linear<S>::init(2 * he + hd, hd, rng, r);
    m.generator = Linear<S>::init(hd, v, rng, r);
    m.switch_gate = Linear<S>::init(2 * he + hd + e, 1, rng, r);
    if (mode == TrainMode::kMultiTask) m.selector_head = Linear<S>::init(2 * he, 1, rng, r);
    if (mode == TrainMode::kDiffMask) m.selector = std::move(selector);
    return m;
  }

  ParamList<S> own_parameters() const {
    ParamList<S> out{{"src_embedding", src_embedding}, {"tgt_embedding", tgt_embedding}};
    encoder.collect("encoder", out);
    bridge_h.collect("bridge_h", out);
    bridge_c.collect("bridge_c", out);
    decoder.collect("decoder", out);
    if (attn_weight) out.push_back({"attn_weight", attn_weight});
    if (attn_query) out.push_back({"attn_query", attn_query});
    if (attn_v) out.push_back({"attn_v", attn_v});
    combine.collect("combine", out);
    generator.collect("generator", out);
    switch_gate.collect("switch_gate", out);
    if (mode == TrainMode::kMultiTask) selector_head.collect("selector_head", out);
    return out;
  }

  // Trainable tensors, including a jointly trained selector.
  ParamList<S> parameters() const {
    auto out = own_parameters();
    if (selector)
      for (auto p : selector->parameters()) out.push_back({"selector." + p.name, p.tensor});
    return out;
  }

  ParamList<S> all_tensors() const {
    auto out = own_parameters();
    if (selector)
      for (auto p : selector->all_tensors()) out.push_back({"selector." + p.name, p.tensor});
    return out;
  }

  Encoded<S> encode(const std::vector<int>& source_ids) const {
    if (source_ids.empty()) throw Error("cannot encode an empty source");
    std::vector<BasicTensor<S>> emb;
    emb.reserve(source_ids.size());
    for (int id : source_ids) emb.push_back(row(src_embedding, static_cast<std::size_t>(id)));
    auto bi = encoder(emb);
    Encoded<S> enc;
    enc.states = bi.states;
    enc.memory = stack(bi.states);
    if (config.attention == AttentionKind::kAdditive) {
      std::vector<BasicTensor<S>> k;
      for (const auto& h : bi.states) k.push_back(matvec(attn_weight, h));
      enc.keys = stack(k);
    }
    enc.init.h = bridge_h(concat<S>({bi.forward_final.h, bi.backward_final.h}));
    enc.init.c = bridge_c(concat<S>({bi.forward_final.c, bi.backward_final.c}));
    return enc;
  }

  DecoderState<S> initial_state(const Encoded<S>& enc) const {
    return {enc.init, BasicTensor<S>::zeros({config.dec_hidden})};
  }

  BasicTensor<S> attention_scores(const BasicTensor<S>& h, const Encoded<S>& enc) const {
    switch (config.attention) {
      case AttentionKind::kDot:
        return matvec(enc.memory, h);
      case AttentionKind::kBilinear:
        return matvec(enc.memory, vecmat(h, attn_weight));
      case AttentionKind::kAdditive: {
        auto u = matvec(attn_query, h);
        std::vector<BasicTensor<S>> s;
        for (std::size_t i = 0; i < enc.states.size(); ++i) s.push_back(dot(attn_v, tanh(add(row(enc.keys, i), u))));
        return concat(s);
      }
    }
    throw Error("unknown attention kind");
  }

  // prev_token is an extended id; ids past the base vocabulary feed <unk>.
  DecoderStepOutput<S> step(int prev_token, const DecoderState<S>& st, const Encoded<S>& enc) const {
    const int in = (prev_token >= 0 && static_cast<std::size_t>(prev_token) < vocab.size()) ? prev_token
                                                                                           : Vocabulary::kUnk;
    auto emb = row(tgt_embedding, static_cast<std::size_t>(in));
    auto lstm = decoder(concat<S>({emb, st.feed}), st.lstm);
    auto a = softmax(attention_scores(lstm.h, enc));
    auto ctx = vecmat(a, enc.memory);
    auto attn_h = tanh(combine(concat<S>({ctx, lstm.h})));
    auto gen = softmax(generator(attn_h));
    auto p = sigmoid(switch_gate(concat<S>({ctx, lstm.h, emb})));
    return {a, gen, p, {lstm, attn_h}};
  }

  // Per-position selection probabilities from the shared-encoder head.
  BasicTensor<S> head_selection(const Encoded<S>& enc) const {
    std::vector<BasicTensor<S>> logits;
    for (const auto& h : enc.states) logits.push_back(selector_head(h));
    return sigmoid(concat(logits));
  }

  BasicTensor<S> selector_selection(const std::vector<TokenList>& sentences, std::size_t n) const {
    if (!selector) throw Error("model has no selector");
    std::vector<BasicTensor<S>> parts;
    for (const auto& s : sentences)
      if (!s.empty()) parts.push_back(selector->forward(s));
    auto q = concat(parts);
    if (q.numel() != n)
      throw Error("selector produced " + std::to_string(q.numel()) + " probabilities for " + std::to_string(n) +
                  " source tokens");
    return q;
  }

  SequenceLoss<S> loss(const PreparedExample& ex) const {
    const auto& ext = ex.ext;
    if (ext.target_ext.empty()) throw Error("empty target");
    const std::size_t n = ext.source_ids.size();
    auto enc = encode(ext.source_ids);
    std::optional<BasicTensor<S>> q;
    if (mode == TrainMode::kDiffMask) q = selector_selection(ex.source_sentences, n);
    auto st = initial_state(enc);
    int prev = Vocabulary::kBos;
    std::vector<BasicTensor<S>> logp;
    std::vector<BasicTensor<S>> attn;
    for (int y : ext.target_ext) {
      auto out = step(prev, st, enc);
      auto c = q ? soft_mask(out.attention, *q) : out.attention;
      auto prob = mixture_probability(c, out.gen, out.p_copy, ext, y);
      if (q) prob = div(prob, add(mul(out.p_copy, sum(c)), one_minus(out.p_copy)));
      logp.push_back(log(prob));
      attn.push_back(out.attention);
      prev = y;
      st = out.next;
    }
    SequenceLoss<S> res;
    res.tokens = logp.size();
    res.nll = scale(add_all(logp), S(-1) / static_cast<S>(res.tokens));
    res.nll_sum = static_cast<double>(res.nll.item()) * static_cast<double>(res.tokens);
    res.total = res.nll;
    switch (mode) {
      case TrainMode::kBaseline:
        break;
      case TrainMode::kMaskOnly: {
        auto sup = copy_supervision_loss(attn, ex.gold, ex.copied);
        res.skipped_gold = sup.skipped_steps;
        res.total = add(res.nll, scale(sup.loss, S(1) / static_cast<S>(res.tokens)));
        break;
      }
      case TrainMode::kMultiTask:
        res.total = multitask_loss(res.nll, binary_cross_entropy(head_selection(enc), ex.copy_labels),
                                   static_cast<S>(config.task_weight));
        break;
      case TrainMode::kDiffMask:
        res.total = multitask_loss(res.nll, binary_cross_entropy(*q, ex.copy_labels),
                                   static_cast<S>(config.task_weight));
        break;
    }
    return res;
  }

  // P(y) under the unrenormalized mixture with copy weights c.
  static BasicTensor<S> mixture_probability(const BasicTensor<S>& c, const BasicTensor<S>& gen,
                                            const BasicTensor<S>& p, const ExtendedVocabExample& ext, int y) {
    std::vector<BasicTensor<S>> terms;
    if (auto it = ext.occurrences.find(y); it != ext.occurrences.end())
      terms.push_back(mul(p, index_sum(c, it->second)));
    if (y >= 0 && static_cast<std::size_t>(y) < gen.numel())
      terms.push_back(mul(one_minus(p), pick(gen, static_cast<std::size_t>(y))));
    if (terms.empty()) throw Error("target id " + std::to_string(y) + " is neither generable nor copyable");
    return terms.size() == 1 ? terms[0] : add(terms[0], terms[1]);
  }
};

template <class S>
Encoded<S> encode_source(const std::vector<int>& ids, const Summarizer<S>& model) {
  return model.encode(ids);
}

template <class S>
DecoderStepOutput<S> decode_step(int prev_token, const DecoderState<S>& state, const Encoded<S>& enc,
                                 const Summarizer<S>& model) {
  return model.step(prev_token, state, enc);
}

// Mean negative log-likelihood of the gold target under teacher forcing.
template <class S>
BasicTensor<S> sequence_nll(const PreparedExample& ex, const Summarizer<S>& model) {
  return model.loss(ex).nll;
}

// ---------------------------------------------------------------------------
// Training

struct SummarizerTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double learning_rate = 0.15;
  double initial_accumulator = 0.1;
  double clip_norm = 2.0;
  bool lr_decay = true;
  std::uint64_t seed = 1;
};

struct SummarizerTrainReport {
  std::vector<nlohmann::json> history;
  std::vector<double> validation_perplexity;
  std::vector<double> learning_rate;  // in effect after each epoch
  std::size_t skipped_gold_steps = 0;
};

// Learning rate after each epoch: halved every epoch from the first epoch
// whose validation perplexity does not improve on the previous one.
inline std::vector<double> halving_schedule(const std::vector<double>& val_ppl, double lr0) {
  std::vector<double> out;
  double lr = lr0;
  bool decaying = false;
  for (std::size_t k = 0; k < val_ppl.size(); ++k) {
    if (k > 0 && !(val_ppl[k] < val_ppl[k - 1])) decaying = true;
    if (decaying) lr *= 0.5;
    out.push_back(lr);
  }
  return out;
}

template <class S>
double corpus_perplexity(const Summarizer<S>& model, const std::vector<PreparedExample>& data) {
  NoGradGuard ng;
  double nll = 0;
  std::size_t tokens = 0;
  for (const auto& ex : data) {
    auto l = model.loss(ex);
    nll += l.nll_sum;
    tokens += l.tokens;
  }
  if (tokens == 0) throw Error("perplexity of an empty corpus");
  return std::exp(nll / static_cast<double>(tokens));
}

template <class S>
std::vector<PreparedExample> prepare_all(const Summarizer<S>& model, const std::vector<ExamplePair>& data) {
  std::vector<PreparedExample> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(prepare_example(ex, model.vocab));
  return out;
}

// Trains in place. Without a validation set, perplexity is measured on the
// training data.
template <class S>
SummarizerTrainReport train_summarizer(Summarizer<S>& model, const std::vector<ExamplePair>& train,
                                       const std::optional<std::vector<ExamplePair>>& validation,
                                       const SummarizerTrainConfig& cfg,
                                       const std::function<void(const nlohmann::json&)>& log = {}) {
  if (train.empty()) throw Error("empty training set");
  SummarizerTrainReport rep;
  if (cfg.epochs == 0) return rep;
  const auto data = prepare_all(model, train);
  const auto val = validation ? prepare_all(model, *validation) : data;
  auto params = model.parameters();
  auto opt = adagrad_init(params, cfg.learning_rate, cfg.initial_accumulator);
  Rng rng = Rng(cfg.seed).split("summarizer-shuffle");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double nll = 0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      zero_grads(params);
      for (std::size_t k = start; k < end; ++k) {
        auto l = model.loss(data[order[k]]);
        nll += l.nll_sum;
        tokens += l.tokens;
        rep.skipped_gold_steps += l.skipped_gold;
        scale(l.total, S(1) / static_cast<S>(end - start)).backward();
      }
      clip_grad_norm(params, cfg.clip_norm);
      adagrad_step(params, opt);
    }
    const double ppl = corpus_perplexity(model, val);
    rep.validation_perplexity.push_back(ppl);
    const double lr =
        cfg.lr_decay ? halving_schedule(rep.validation_perplexity, cfg.learning_rate).back() : cfg.learning_rate;
    opt.learning_rate = lr;
    rep.learning_rate.push_back(lr);
    nlohmann::json line = {{"epoch", epoch},
                           {"train_nll", nll / static_cast<double>(tokens)},
                           {"val_ppl", ppl},
                           {"lr", lr}};
    rep.history.push_back(line);
    if (log) log(line);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Persistence

inline Container summarizer_container(const Summarizer<float>& m, const nlohmann::json& config_echo) {
  Container c;
  c.meta = {{"kind", "summarizer"},
            {"model", m.config.to_json()},
            {"mode", to_string(m.mode)},
            {"vocab", m.vocab.entries()},
            {"config", config_echo}};
  if (m.selector) {
    c.meta["selector"] = {
        {"model", m.selector->config.to_json()},
        {"vocab", m.selector->vocab.entries()},
        {"static_known", std::vector<int>(m.selector->static_known.begin(), m.selector->static_known.end())}};
  }
  store_params(m.all_tensors(), c);
  return c;
}

inline void save_summarizer(const Summarizer<float>& m, const nlohmann::json& config_echo, const std::string& path) {
  write_container(summarizer_container(m, config_echo), path);
}

inline Summarizer<float> summarizer_from_container(const Container& c) {
  if (c.meta.value("kind", "") != "summarizer") throw Error("checkpoint does not hold a summarizer");
  Rng rng(0);
  std::optional<Selector<float>> sel;
  if (c.meta.contains("selector")) {
    const auto& s = c.meta.at("selector");
    sel = Selector<float>::init(SelectorConfig::from_json(s.at("model")),
                                Vocabulary(s.at("vocab").get<std::vector<std::string>>()), rng);
    auto known = s.at("static_known").get<std::vector<int>>();
    sel->static_known.assign(known.begin(), known.end());
  }
  auto m = Summarizer<float>::init(PGConfig::from_json(c.meta.at("model")),
                                   Vocabulary(c.meta.at("vocab").get<std::vector<std::string>>()),
                                   parse_train_mode(c.meta.at("mode").get<std::string>()), rng, std::move(sel));
  restore_params(m.all_tensors(), c);
  return m;
}

inline Summarizer<float> load_summarizer(const std::string& path) {
  return summarizer_from_container(read_container(path));
}

}  // namespace busum
