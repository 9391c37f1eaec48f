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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "busum/corpus.hpp"
#include "busum/error.hpp"

namespace busum {

// A source document mapped onto the base vocabulary plus per-example ids for
// its out-of-vocabulary tokens, which follow the base vocabulary contiguously.
struct ExtendedVocabExample {
  std::vector<int> source_ids;   // base ids, OOV -> <unk>
  std::vector<int> source_ext;   // extended id per source position
  std::vector<std::string> oovs; // token for extended id base_size + k
  std::map<int, std::vector<std::size_t>> occurrences;
  std::vector<int> target_ext;   // gold ids, </s> appended
  std::size_t base_size = 0;

  std::size_t extended_size() const { return base_size + oovs.size(); }

  std::string token(int id, const Vocabulary& vocab) const {
    if (id >= 0 && static_cast<std::size_t>(id) < base_size) return vocab.token(id);
    const std::size_t k = static_cast<std::size_t>(id) - base_size;
    if (id < 0 || k >= oovs.size()) throw Error("extended id " + std::to_string(id) + " out of range");
    return oovs[k];
  }
};

inline ExtendedVocabExample extend_example(const TokenList& source, const TokenList& target, const Vocabulary& vocab) {
  ExtendedVocabExample ex;
  ex.base_size = vocab.size();
  std::map<std::string, int> oov_ids;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto& tok = source[i];
    int ext;
    if (vocab.contains(tok)) {
      ext = vocab.id(tok);
      ex.source_ids.push_back(ext);
    } else {
      auto [it, inserted] = oov_ids.emplace(tok, static_cast<int>(ex.base_size + ex.oovs.size()));
      if (inserted) ex.oovs.push_back(tok);
      ext = it->second;
      ex.source_ids.push_back(Vocabulary::kUnk);
    }
    ex.source_ext.push_back(ext);
    ex.occurrences[ext].push_back(i);
  }
  for (const auto& tok : target) {
    if (vocab.contains(tok)) {
      ex.target_ext.push_back(vocab.id(tok));
    } else if (auto it = oov_ids.find(tok); it != oov_ids.end()) {
      ex.target_ext.push_back(it->second);
    } else {
      ex.target_ext.push_back(Vocabulary::kUnk);
    }
  }
  ex.target_ext.push_back(Vocabulary::kEos);
  return ex;
}

inline std::map<int, std::vector<std::size_t>> occurrence_map(const std::vector<int>& source_ext) {
  std::map<int, std::vector<std::size_t>> occ;
  for (std::size_t i = 0; i < source_ext.size(); ++i) occ[source_ext[i]].push_back(i);
  return occ;
}

// P(w) = p * sum_{i: x_i = w} a_i + (1 - p) * P_gen(w) over the extended
// vocabulary; P_gen is zero beyond the base vocabulary.
inline std::vector<double> joint_copy_distribution(std::span<const double> attention, std::span<const double> gen,
                                                   double p_copy,
                                                   const std::map<int, std::vector<std::size_t>>& occurrences,
                                                   std::size_t extended_size) {
  const std::size_t n = attention.size();
  std::vector<int> seen(n, 0);
  for (const auto& [id, positions] : occurrences) {
    if (id < 0 || static_cast<std::size_t>(id) >= extended_size)
      throw Error("occurrence map names id " + std::to_string(id) + " outside the extended vocabulary");
    for (auto i : positions) {
      if (i >= n) throw Error("occurrence map inconsistent with source length " + std::to_string(n));
      ++seen[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (seen[i] != 1) throw Error("occurrence map inconsistent with source length " + std::to_string(n));
  if (gen.size() > extended_size) throw Error("generation distribution larger than the extended vocabulary");
  std::vector<double> out(extended_size, 0.0);
  for (std::size_t w = 0; w < gen.size(); ++w) out[w] = (1.0 - p_copy) * gen[w];
  for (const auto& [id, positions] : occurrences)
    for (auto i : positions) out[static_cast<std::size_t>(id)] += p_copy * attention[i];
  return out;
}

// Mixture with arbitrary nonnegative copy weights c, renormalized jointly:
// P(w) = (p * sum_{i: x_i = w} c_i + (1 - p) * P_gen(w)) / (p * sum_i c_i + 1 - p).
inline std::vector<double> mixture_distribution(std::span<const double> copy_weights, std::span<const double> gen,
                                                double p_copy, std::span<const int> source_ext,
                                                std::size_t extended_size) {
  if (copy_weights.size() != source_ext.size())
    throw Error("copy weights have " + std::to_string(copy_weights.size()) + " entries for a source of length " +
                std::to_string(source_ext.size()));
  if (gen.size() > extended_size) throw Error("generation distribution larger than the extended vocabulary");
  std::vector<double> out(extended_size, 0.0);
  double copy_mass = 0;
  for (std::size_t w = 0; w < gen.size(); ++w) out[w] = (1.0 - p_copy) * gen[w];
  for (std::size_t i = 0; i < copy_weights.size(); ++i) {
    const auto id = static_cast<std::size_t>(source_ext[i]);
    if (id >= extended_size) throw Error("source id outside the extended vocabulary");
    out[id] += p_copy * copy_weights[i];
    copy_mass += copy_weights[i];
  }
  const double z = p_copy * copy_mass + (1.0 - p_copy);
  if (!(z > 0)) throw Error("mixture has no probability mass");
  for (auto& v : out) v /= z;
  return out;
}

}  // namespace busum
