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

#include <sstream>

#include "busum/corpus.hpp"
#include "busum/rng.hpp"
#include "oracles.hpp"

namespace busum {
namespace {

TokenList toks(std::initializer_list<const char*> xs) { return {xs.begin(), xs.end()}; }

TEST(Tokenize, SplitsPunctuationAndLowercases) {
  EXPECT_EQ(tokenize("Angela Merkel, spotted."), toks({"angela", "merkel", ",", "spotted", "."}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize(" \t\n ").empty());
  EXPECT_EQ(tokenize("abc"), toks({"abc"}));
  EXPECT_EQ(tokenize("(it's)--ok"), toks({"(", "it", "'", "s", ")", "-", "-", "ok"}));
}

TEST(Tokenize, IdempotentOnJoinedOutput) {
  Rng rng(7);
  const std::string alphabet = "aBc .,;:!?\"'()-\tXyZ";
  for (int trial = 0; trial < 500; ++trial) {
    std::string raw;
    const int len = rng.range(0, 40);
    for (int i = 0; i < len; ++i) raw.push_back(alphabet[rng.below(alphabet.size())]);
    const auto once = tokenize(raw);
    EXPECT_EQ(tokenize(join(once)), once) << raw;
    for (const auto& t : once) {
      EXPECT_FALSE(t.empty());
      EXPECT_EQ(t.find_first_of(" \t\n"), std::string::npos);
    }
  }
}

ExamplePair pair_of(const TokenList& src, const TokenList& tgt) {
  ExamplePair ex;
  ex.id = "x";
  ex.source_sentences = {src};
  ex.target_sentences = {tgt};
  return ex;
}

TEST(BuildVocab, FrequencyThenLexicographicOrder) {
  auto v1 = build_vocab({pair_of(toks({"a", "a", "b"}), toks({"a"}))}, 1);
  EXPECT_EQ(v1.size(), 5u);
  EXPECT_EQ(v1.token(4), "a");

  auto v2 = build_vocab({pair_of(toks({"b", "a", "b"}), toks({"a"}))}, 2);
  EXPECT_EQ(v2.token(4), "a");
  EXPECT_EQ(v2.token(5), "b");

  auto v3 = build_vocab({pair_of(toks({"c", "b"}), toks({"a"}))}, 10);
  EXPECT_EQ(v3.size(), 7u);
  EXPECT_EQ(v3.id("zzz"), Vocabulary::kUnk);
}

TEST(BuildVocab, DeterministicAndRejectsEmptyCorpus) {
  std::vector<ExamplePair> corpus = {pair_of(toks({"x", "y", "z", "y"}), toks({"z", "q"})),
                                     pair_of(toks({"q", "r"}), toks({"r"}))};
  EXPECT_EQ(build_vocab(corpus, 3), build_vocab(corpus, 3));
  EXPECT_THROW(build_vocab({}, 3), Error);
  try {
    build_vocab({}, 3);
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty corpus");
  }
}

TEST(AlignCopyLabels, WorkedExamples) {
  EXPECT_EQ(align_copy_labels(toks({"a", "b", "c"}), toks({"b"})), (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(align_copy_labels(toks({"the", "cat", "sat", "the", "cat", "ran"}), toks({"the", "cat", "ran"})),
            (std::vector<int>{1, 1, 0, 1, 1, 1}));
  EXPECT_EQ(align_copy_labels(toks({"x", "y"}), toks({"q"})), (std::vector<int>{0, 0}));
}

TEST(AlignCopyLabels, RepeatedSpanOnlyLabelsFirstOccurrence) {
  EXPECT_EQ(align_copy_labels(toks({"a", "b", "z", "a", "b"}), toks({"a", "b"})),
            (std::vector<int>{1, 1, 0, 0, 0}));
}

std::vector<int> random_seq(Rng& rng, std::size_t len, std::size_t alphabet) {
  std::vector<int> s(len);
  for (auto& x : s) x = static_cast<int>(rng.below(alphabet));
  return s;
}

TEST(AlignCopyLabels, MatchesBruteForceOnRandomPairs) {
  Rng rng(11);
  for (int trial = 0; trial < 3000; ++trial) {
    auto src = random_seq(rng, 1 + rng.below(25), 2 + rng.below(5));
    auto tgt = random_seq(rng, rng.below(12), 2 + rng.below(5));
    EXPECT_EQ(align_copy_labels<int>(src, tgt), oracle::align_labels(src, tgt));
  }
}

TEST(AlignCopyLabels, AppendingTargetTokenKeepsLabelsWithoutLongerOverlap) {
  Rng rng(12);
  int checked = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    auto src = random_seq(rng, 1 + rng.below(14), 3);
    auto tgt = random_seq(rng, 1 + rng.below(6), 3);
    auto extended = tgt;
    const int tok = static_cast<int>(rng.below(3));
    if (rng.bernoulli(0.5)) extended.push_back(tok);
    else extended.insert(extended.begin(), tok);
    const auto before = align_copy_labels<int>(src, tgt);
    const auto after = align_copy_labels<int>(src, extended);
    const auto cover_before = oracle::longest_common_cover(src, tgt);
    const auto cover_after = oracle::longest_common_cover(src, extended);
    bool longer_overlap = false;
    for (std::size_t i = 0; i < src.size(); ++i)
      if (before[i] && cover_after[i] != cover_before[i]) longer_overlap = true;
    if (longer_overlap) continue;
    ++checked;
    for (std::size_t i = 0; i < src.size(); ++i)
      if (before[i]) EXPECT_EQ(after[i], 1);
  }
  EXPECT_GT(checked, 1000);
}

TEST(AlignCopyPositions, MapsTargetTokensToFirstSourceOccurrence) {
  auto gold = align_copy_positions(toks({"the", "cat", "sat", "the", "cat", "ran"}), toks({"the", "cat", "ran", "x"}));
  ASSERT_EQ(gold.size(), 4u);
  EXPECT_EQ(gold[0], (std::vector<int>{3}));
  EXPECT_EQ(gold[1], (std::vector<int>{4}));
  EXPECT_EQ(gold[2], (std::vector<int>{5}));
  EXPECT_TRUE(gold[3].empty());

  auto repeated = align_copy_positions(toks({"a", "b", "a", "b"}), toks({"a", "b"}));
  EXPECT_EQ(repeated[0], (std::vector<int>{0}));
  EXPECT_EQ(repeated[1], (std::vector<int>{1}));
}

TEST(Truncate, CutsTokensAndRecomputesLabels) {
  ExamplePair ex;
  ex.id = "t";
  for (int s = 0; s < 5; ++s) {
    TokenList sent;
    for (int i = 0; i < 100; ++i) sent.push_back("w" + std::to_string(s * 100 + i));
    ex.source_sentences.push_back(sent);
  }
  TokenList tgt;
  for (int i = 0; i < 120; ++i) tgt.push_back("w" + std::to_string(i));
  ex.target_sentences = {tgt};
  ex.copy_labels = std::vector<int>(500, 1);

  auto out = truncate_example(ex, 400, 100);
  EXPECT_EQ(out.source_length(), 400u);
  EXPECT_EQ(out.source_sentences.size(), 4u);
  EXPECT_EQ(out.target().size(), 100u);
  EXPECT_EQ(out.source()[399], "w399");
  ASSERT_TRUE(out.copy_labels);
  EXPECT_EQ(out.copy_labels->size(), 400u);
  EXPECT_EQ((*out.copy_labels)[99], 1);
  EXPECT_EQ((*out.copy_labels)[100], 0);

  auto same = truncate_example(ex, 1000, 1000);
  EXPECT_EQ(same.source_sentences, ex.source_sentences);
  EXPECT_EQ(same.target_sentences, ex.target_sentences);
}

TEST(Truncate, PreservesSentenceBoundaries) {
  auto ex = pair_of(toks({"a", "b", "c"}), toks({"a"}));
  ex.source_sentences.push_back(toks({"d", "e"}));
  auto out = truncate_example(ex, 4, 1);
  ASSERT_EQ(out.source_sentences.size(), 2u);
  EXPECT_EQ(out.source_sentences[1], toks({"d"}));
}

TEST(Dataset, LoadsAndRoundTrips) {
  std::istringstream in(
      R"({"id": "d1", "src_sents": ["Angela Merkel, spotted.", "second one"], "tgt_sents": ["merkel spotted"]})"
      "\n");
  auto pairs = parse_dataset(in);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].id, "d1");
  EXPECT_EQ(pairs[0].source_sentences[0], toks({"angela", "merkel", ",", "spotted", "."}));

  pairs[0].copy_labels = align_copy_labels(pairs[0].source(), pairs[0].target());
  std::ostringstream out;
  write_dataset(pairs, out);
  std::istringstream back(out.str());
  EXPECT_EQ(parse_dataset(back), pairs);

  std::ostringstream again;
  write_dataset(parse_dataset(*std::make_unique<std::istringstream>(out.str())), again);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Dataset, ReportsMissingFieldAndMalformedLine) {
  std::istringstream missing(R"({"id": "d1", "tgt_sents": ["x"]})");
  try {
    parse_dataset(missing);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "missing field src_sents at line 1");
  }
  std::istringstream bad("{\"id\": \"a\", \"src_sents\": [\"x\"], \"tgt_sents\": [\"x\"]}\n{oops\n");
  try {
    parse_dataset(bad);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Dataset, SplitsLabeledSentences) {
  auto ex = pair_of(toks({"a", "b"}), toks({"b", "c"}));
  ex.source_sentences.push_back(toks({"c", "d"}));
  auto sents = split_labeled_sentences(ex);
  ASSERT_EQ(sents.size(), 2u);
  EXPECT_EQ(sents[0].labels, (std::vector<int>{0, 1}));
  EXPECT_EQ(sents[1].labels, (std::vector<int>{1, 0}));
}

}  // namespace
}  // namespace busum
