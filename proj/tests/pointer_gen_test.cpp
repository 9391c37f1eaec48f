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


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "busum/copy.hpp"
#include "busum/decode.hpp"
#include "busum/pointer_gen.hpp"
#include "fixtures.hpp"

namespace busum {
namespace {

using LD = long double;

TEST(JointCopy, PureCopyAndPureGeneration) {
  // source [a, b, c, w]: extended ids 10, 11, 12, 13 after a base vocabulary of 10
  std::vector<int> src{10, 11, 12, 13};
  const auto occ = occurrence_map(src);
  std::vector<double> gen(10, 0.1);
  auto p = joint_copy_distribution(std::vector<double>{0, 0, 0, 1}, gen, 1.0, occ, 14);
  EXPECT_NEAR(p[13], 1.0, 1e-12);
  p = joint_copy_distribution(std::vector<double>{0.25, 0.25, 0.25, 0.25}, gen, 0.0, occ, 14);
  for (std::size_t w = 0; w < 10; ++w) EXPECT_NEAR(p[w], 0.1, 1e-12);
  for (std::size_t w = 10; w < 14; ++w) EXPECT_EQ(p[w], 0.0);
}

TEST(JointCopy, RepeatedWordSumsOccurrences) {
  std::vector<int> src{5, 6, 5};
  const auto p = joint_copy_distribution(std::vector<double>{0.2, 0.3, 0.5}, std::vector<double>(8, 0.125), 1.0,
                                         occurrence_map(src), 8);
  EXPECT_NEAR(p[5], 0.7, 1e-12);
  EXPECT_NEAR(p[6], 0.3, 1e-12);
}

TEST(JointCopy, InconsistentOccurrencesRejected) {
  std::map<int, std::vector<std::size_t>> occ{{4, {0}}, {5, {2}}};
  EXPECT_THROW(joint_copy_distribution(std::vector<double>{0.5, 0.5}, std::vector<double>(6, 1.0 / 6), 0.5, occ, 6),
               Error);
  occ = {{4, {0, 1}}, {5, {1}}};
  EXPECT_THROW(joint_copy_distribution(std::vector<double>{0.5, 0.5}, std::vector<double>(6, 1.0 / 6), 0.5, occ, 6),
               Error);
}

TEST(JointCopy, ConvexCombinationProperty) {
  Rng rng(3);
  for (int inst = 0; inst < 500; ++inst) {
    const std::size_t v = 2 + rng.below(8), n = 1 + rng.below(8), oov = rng.below(3);
    std::vector<double> gen(v), a(n);
    double zg = 0, za = 0;
    for (auto& g : gen) zg += g = rng.uniform();
    for (auto& x : a) za += x = rng.uniform();
    for (auto& g : gen) g /= zg;
    for (auto& x : a) x /= za;
    std::vector<int> src(n);
    for (auto& s : src) s = static_cast<int>(rng.below(v + oov));
    const double p = rng.uniform();
    const auto occ = occurrence_map(src);
    const auto out = joint_copy_distribution(a, gen, p, occ, v + oov);
    double total = 0;
    for (double x : out) {
      EXPECT_GE(x, 0.0);
      total += x;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    double regrouped = 0;
    for (const auto& [id, pos] : occ)
      for (auto i : pos) regrouped += a[i];
    EXPECT_NEAR(regrouped, 1.0, 1e-9);
    const auto mix = mixture_distribution(a, gen, p, src, v + oov);
    for (std::size_t w = 0; w < out.size(); ++w) EXPECT_NEAR(mix[w], out[w], 1e-12);
  }
}

TEST(ExtendedVocab, Invariants) {
  auto vocab = testing::word_vocab(4);
  const TokenList src{"w1", "zz", "w2", "yy", "zz"};
  const auto ext = extend_example(src, {"zz", "w3", "qq", "yy"}, vocab);
  EXPECT_EQ(ext.base_size, vocab.size());
  EXPECT_EQ(ext.oovs, (std::vector<std::string>{"zz", "yy"}));
  EXPECT_EQ(ext.extended_size(), vocab.size() + 2);
  const int zz = static_cast<int>(vocab.size()), yy = zz + 1;
  EXPECT_EQ(ext.source_ext, (std::vector<int>{vocab.id("w1"), zz, vocab.id("w2"), yy, zz}));
  EXPECT_EQ(ext.source_ids[1], Vocabulary::kUnk);
  EXPECT_EQ(ext.target_ext, (std::vector<int>{zz, vocab.id("w3"), Vocabulary::kUnk, yy, Vocabulary::kEos}));
  std::size_t covered = 0;
  for (const auto& [id, pos] : ext.occurrences) covered += pos.size();
  EXPECT_EQ(covered, src.size());
  EXPECT_EQ(ext.token(zz, vocab), "zz");
  EXPECT_EQ(ext.token(vocab.id("w2"), vocab), "w2");
  EXPECT_THROW(ext.token(yy + 1, vocab), Error);
}

TEST(PGConfig, ValidatesAndRoundTrips) {
  auto c = testing::tiny_pg(AttentionKind::kAdditive);
  EXPECT_NO_THROW(c.validate());
  const auto back = PGConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  c.dec_hidden = 5;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(parse_attention_kind("cosine"), Error);
  EXPECT_EQ(parse_attention_kind("general"), AttentionKind::kBilinear);
}

Summarizer<double> small_model(TrainMode mode = TrainMode::kBaseline, std::uint64_t seed = 1,
                               AttentionKind kind = AttentionKind::kBilinear) {
  Rng rng(seed);
  return Summarizer<double>::init(testing::tiny_pg(kind), testing::word_vocab(6), mode, rng);
}

TEST(Encoder, ShapesAndErrors) {
  auto m = small_model();
  auto one = m.encode({5});
  ASSERT_EQ(one.states.size(), 1u);
  EXPECT_EQ(one.states[0].numel(), 2 * m.config.enc_hidden);
  EXPECT_EQ(one.init.h.numel(), m.config.dec_hidden);
  EXPECT_THROW(m.encode({}), Error);
  auto again = m.encode({5});
  EXPECT_EQ(one.states[0].data()[0], again.states[0].data()[0]);
}

TEST(Encoder, ReversedInputSwapsDirectionsUnderSymmetricWeights) {
  auto m = small_model(TrainMode::kBaseline, 2);
  auto f = m.encoder.fwd.weight.mutable_data();
  auto b = m.encoder.bwd.weight.mutable_data();
  std::copy(f.begin(), f.end(), b.begin());
  for (auto& x : m.encoder.fwd.bias.mutable_data()) x = 0;
  for (auto& x : m.encoder.bwd.bias.mutable_data()) x = 0;
  const std::vector<int> ids{4, 7, 5, 9};
  const std::vector<int> rev(ids.rbegin(), ids.rend());
  auto a = m.encode(ids), r = m.encode(rev);
  const std::size_t h = m.config.enc_hidden, n = ids.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < h; ++k) {
      EXPECT_NEAR(a.states[i].data()[k], r.states[n - 1 - i].data()[h + k], 1e-12);
      EXPECT_NEAR(a.states[i].data()[h + k], r.states[n - 1 - i].data()[k], 1e-12);
    }
}

double sig(double z) { return 1 / (1 + std::exp(-z)); }

TEST(Encoder, TwoTokenStatesByHand) {
  PGConfig cfg;
  cfg.emb_dim = 1;
  cfg.enc_hidden = 1;
  cfg.dec_hidden = 2;
  Rng rng(0);
  auto m = Summarizer<double>::init(cfg, testing::word_vocab(2), TrainMode::kBaseline, rng);
  for (auto* cell : {&m.encoder.fwd, &m.encoder.bwd}) {
    for (auto& w : cell->weight.mutable_data()) w = 0.1;
    for (auto& w : cell->bias.mutable_data()) w = 0;
  }
  auto emb = m.src_embedding.mutable_data();
  emb[4] = 0.5;
  emb[5] = -1.0;
  // every gate sees z = 0.1 x + 0.1 h
  auto cell = [](double x, double h, double c) {
    const double z = 0.1 * x + 0.1 * h;
    const double cn = sig(z) * c + sig(z) * std::tanh(z);
    return std::pair{sig(z) * std::tanh(cn), cn};
  };
  auto [f0, fc0] = cell(0.5, 0, 0);
  auto [f1, fc1] = cell(-1.0, f0, fc0);
  auto [b1, bc1] = cell(-1.0, 0, 0);
  auto [b0, bc0] = cell(0.5, b1, bc1);
  auto enc = m.encode({4, 5});
  EXPECT_NEAR(enc.states[0].data()[0], f0, 1e-5);
  EXPECT_NEAR(enc.states[1].data()[0], f1, 1e-5);
  EXPECT_NEAR(enc.states[0].data()[1], b0, 1e-5);
  EXPECT_NEAR(enc.states[1].data()[1], b1, 1e-5);
  (void)fc1;
  (void)bc0;
}

TEST(DecodeStep, UniformAttentionOverIdenticalStates) {
  auto m = small_model();
  auto base = m.encode({4});
  Encoded<double> enc = base;
  enc.states.assign(5, base.states[0]);
  enc.memory = stack(enc.states);
  auto out = m.step(Vocabulary::kBos, m.initial_state(enc), enc);
  for (double a : out.attention.data()) EXPECT_NEAR(a, 0.2, 1e-12);
  EXPECT_NEAR(std::accumulate(out.gen.data().begin(), out.gen.data().end(), 0.0), 1.0, 1e-12);
  EXPECT_GE(out.p_copy.item(), 0.0);
  EXPECT_LE(out.p_copy.item(), 1.0);
}

TEST(DecodeStep, SwitchSaturates) {
  auto m = small_model();
  for (auto& w : m.switch_gate.weight.mutable_data()) w = 0;
  m.switch_gate.bias.mutable_data()[0] = 50;
  auto enc = m.encode({4, 6, 8});
  auto out = m.step(Vocabulary::kBos, m.initial_state(enc), enc);
  EXPECT_GE(out.p_copy.item(), 1 - 1e-9);
}

TEST(DecodeStep, TwoPositionAttentionByHand) {
  auto m = small_model(TrainMode::kBaseline, 1, AttentionKind::kDot);
  Encoded<double> enc;
  enc.states = {BasicTensor<double>::vector({1, 0, 0, 0}), BasicTensor<double>::vector({0, 1, 0, 0})};
  enc.memory = stack(enc.states);
  auto a = softmax(m.attention_scores(BasicTensor<double>::vector({1, 2, 0, 0}), enc));
  EXPECT_NEAR(a.data()[0], 1 / (1 + std::exp(1.0)), 1e-12);
  EXPECT_NEAR(a.data()[1], std::exp(1.0) / (1 + std::exp(1.0)), 1e-12);

  auto bl = small_model(TrainMode::kBaseline, 1, AttentionKind::kBilinear);
  auto w = bl.attn_weight.mutable_data();
  std::fill(w.begin(), w.end(), 0.0);
  w[0 * 4 + 1] = 3.0;  // h_0 scores memory column 1
  auto s = bl.attention_scores(BasicTensor<double>::vector({0.5, 0, 0, 0}), enc);
  EXPECT_NEAR(s.data()[0], 0.0, 1e-12);
  EXPECT_NEAR(s.data()[1], 1.5, 1e-12);
}

void fixed_generator(Summarizer<double>& m, const std::vector<double>& probs) {
  for (auto& w : m.generator.weight.mutable_data()) w = 0;
  auto b = m.generator.bias.mutable_data();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::log(probs[i]);
  for (auto& w : m.switch_gate.weight.mutable_data()) w = 0;
  m.switch_gate.bias.mutable_data()[0] = -200;
}

TEST(SequenceNll, HandValues) {
  auto m = small_model();
  const std::size_t v = m.vocab.size();
  const int y = m.vocab.id("w2");
  std::vector<double> probs(v, 0.25 / static_cast<double>(v - 2));
  probs[static_cast<std::size_t>(y)] = 0.5;
  probs[Vocabulary::kEos] = 0.25;
  fixed_generator(m, probs);
  auto ex = prepare_example(testing::make_pair("a", {{"w1", "w3"}}, {{"w2"}}), m.vocab);
  EXPECT_NEAR(sequence_nll(ex, m).item(), -(std::log(0.5) + std::log(0.25)) / 2, 1e-9);
  EXPECT_NEAR(sequence_nll(ex, m).item(), 1.0397, 1e-4);

  fixed_generator(m, std::vector<double>(v, 1.0 / static_cast<double>(v)));
  EXPECT_NEAR(sequence_nll(ex, m).item(), std::log(static_cast<double>(v)), 1e-9);

  std::vector<double> sure(v, 1e-300);
  sure[Vocabulary::kEos] = 1.0;
  fixed_generator(m, sure);
  auto empty = prepare_example(testing::make_pair("b", {{"w1"}}, {}), m.vocab);
  EXPECT_NEAR(sequence_nll(empty, m).item(), 0.0, 1e-12);
}

TEST(SequenceNll, UnknownTargetMapsToUnk) {
  auto m = small_model();
  auto ex = prepare_example(testing::make_pair("a", {{"w1", "zz"}}, {{"qq", "zz"}}), m.vocab);
  EXPECT_EQ(ex.ext.target_ext[0], Vocabulary::kUnk);
  EXPECT_EQ(ex.ext.target_ext[1], static_cast<int>(m.vocab.size()));
  EXPECT_TRUE(std::isfinite(sequence_nll(ex, m).item()));
}

TEST(SequenceNll, TeacherForcingIsDeterministic) {
  auto a = small_model(TrainMode::kMaskOnly, 77), b = small_model(TrainMode::kMaskOnly, 77);
  auto ex = prepare_example(testing::make_pair("a", {{"w1", "w2", "w3"}, {"w4", "zz"}}, {{"w2", "w3", "zz"}}),
                            a.vocab);
  EXPECT_EQ(a.loss(ex).total.item(), b.loss(ex).total.item());
}

Selector<LD> tiny_selector(Rng& rng) {
  SelectorConfig sc;
  sc.static_dim = 2;
  sc.context_dim = 2;
  sc.tagger_hidden = 2;
  sc.tagger_layers = 1;
  sc.init_range = 0.5;
  return Selector<LD>::init(sc, testing::word_vocab(5), rng);
}

void check_gradients(TrainMode mode, AttentionKind kind, std::uint64_t seed) {
  Rng rng(seed);
  std::optional<Selector<LD>> sel;
  if (mode == TrainMode::kDiffMask) sel = tiny_selector(rng);
  auto cfg = testing::tiny_pg(kind);
  cfg.task_weight = 0.7;
  auto m = Summarizer<LD>::init(cfg, testing::word_vocab(5), mode, rng, std::move(sel));
  auto ex = prepare_example(testing::random_pair(rng, "g", 8, 4, 3), m.vocab);
  auto params = m.parameters();
  auto rep = finite_difference_report<LD>([&] { return m.loss(ex).total; }, params, 1e-5, 6, seed);
  EXPECT_LE(rep.max_rel_error, 1e-4) << to_string(mode) << " " << rep.worst_param << "[" << rep.worst_index << "]";
  if (mode == TrainMode::kDiffMask) {
    zero_grads(params);
    m.loss(ex).total.backward();
    bool selector_grad = false;
    for (const auto& p : params)
      if (p.name.rfind("selector.", 0) == 0)
        for (LD g : p.tensor.grad()) selector_grad |= g != 0;
    EXPECT_TRUE(selector_grad);
  }
}

TEST(SummarizerGradients, AllModesMatchFiniteDifferences) {
  for (auto mode : {TrainMode::kBaseline, TrainMode::kMaskOnly, TrainMode::kMultiTask, TrainMode::kDiffMask})
    for (std::uint64_t seed = 0; seed < 2; ++seed) check_gradients(mode, AttentionKind::kBilinear, 10 + seed);
  check_gradients(TrainMode::kBaseline, AttentionKind::kAdditive, 21);
  check_gradients(TrainMode::kBaseline, AttentionKind::kDot, 22);
}

TEST(Training, HalvingSchedule) {
  const auto lr = halving_schedule({10, 11}, 0.15);
  EXPECT_NEAR(lr[0], 0.15, 1e-15);
  EXPECT_NEAR(lr[1], 0.075, 1e-15);
  const auto more = halving_schedule({10, 9, 9, 8}, 1.0);
  EXPECT_EQ(more, (std::vector<double>{1.0, 1.0, 0.5, 0.25}));
}

std::vector<ExamplePair> copy_corpus(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ExamplePair> out;
  for (std::size_t k = 0; k < count; ++k) {
    TokenList src;
    for (int i = 0; i < 5; ++i) src.push_back("w" + std::to_string(rng.below(10)));
    TokenList tgt(src.begin() + 1, src.begin() + 4);
    out.push_back(testing::make_pair("c" + std::to_string(k), {src}, {tgt}));
  }
  return out;
}

TEST(Training, ZeroEpochsAndEmptyData) {
  Rng rng(4);
  auto m = Summarizer<float>::init(testing::tiny_pg(), testing::word_vocab(10), TrainMode::kBaseline, rng);
  const auto before = m.generator.weight.data();
  SummarizerTrainConfig tc;
  tc.epochs = 0;
  const auto rep = train_summarizer(m, copy_corpus(3, 1), std::nullopt, tc);
  EXPECT_TRUE(rep.history.empty());
  EXPECT_TRUE(std::equal(before.begin(), before.end(), m.generator.weight.data().begin()));
  EXPECT_THROW(train_summarizer(m, {}, std::nullopt, tc), Error);
}

TEST(Training, OverfitsSmallCopyCorpus) {
  Rng rng(5);
  PGConfig cfg;
  cfg.emb_dim = 16;
  cfg.enc_hidden = 16;
  cfg.dec_hidden = 32;
  auto m = Summarizer<float>::init(cfg, testing::word_vocab(10), TrainMode::kBaseline, rng);
  const auto data = copy_corpus(20, 2);
  SummarizerTrainConfig tc;
  tc.epochs = 60;
  tc.batch_size = 2;
  tc.lr_decay = false;
  std::vector<nlohmann::json> lines;
  const auto rep = train_summarizer(m, data, std::nullopt, tc, [&](const nlohmann::json& j) { lines.push_back(j); });
  ASSERT_EQ(lines.size(), tc.epochs);
  for (const char* k : {"epoch", "train_nll", "val_ppl", "lr"}) EXPECT_TRUE(lines.back().contains(k));
  EXPECT_LE(rep.validation_perplexity.back(), 1.1);
  EXPECT_LE(corpus_perplexity(m, prepare_all(m, data)), 1.1);
}

TEST(Training, SameSeedSameModel) {
  auto run = [] {
    Rng rng(6);
    auto m = Summarizer<float>::init(testing::tiny_pg(), testing::word_vocab(10), TrainMode::kMultiTask, rng);
    SummarizerTrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 3;
    train_summarizer(m, copy_corpus(7, 3), std::nullopt, tc);
    return m.generator.weight.data();
  };
  const auto a = run(), b = run();
  EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
}

TEST(Persistence, SaveLoadDecodesIdentically) {
  Rng rng(8);
  SelectorConfig sc;
  sc.static_dim = 3;
  sc.context_dim = 2;
  sc.tagger_hidden = 2;
  sc.tagger_layers = 1;
  auto sel = Selector<float>::init(sc, testing::word_vocab(10), rng);
  auto m = Summarizer<float>::init(testing::tiny_pg(AttentionKind::kAdditive), testing::word_vocab(10),
                                   TrainMode::kDiffMask, rng, std::move(sel));
  SummarizerTrainConfig tc;
  tc.epochs = 1;
  train_summarizer(m, copy_corpus(5, 4), std::nullopt, tc);
  const auto path = (std::filesystem::temp_directory_path() / "busum_pg_roundtrip.busm").string();
  save_summarizer(m, {{"seed", "1"}}, path);
  auto back = load_summarizer(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.mode, TrainMode::kDiffMask);
  EXPECT_EQ(back.vocab, m.vocab);
  const auto pa = m.all_tensors(), pb = back.all_tensors();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_TRUE(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin()));
  }
  DecodeOptions opt;
  opt.inference.beam = 3;
  opt.inference.max_length = 8;
  for (const auto& ex : copy_corpus(4, 9)) {
    const auto x = summarize(m, ex, opt), y = summarize(back, ex, opt);
    EXPECT_EQ(x.to_json().dump(), y.to_json().dump());
  }
}

}  // namespace
}  // namespace busum
