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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "busum/error.hpp"
#include "busum/tensor.hpp"

namespace busum {

struct MaskConfig {
  double epsilon = 0.15;
  double lambda = 2.0;

  void validate() const {
    if (!(epsilon > 0 && epsilon < 1)) throw Error("mask epsilon must lie in (0,1), got " + std::to_string(epsilon));
    if (!(lambda > 0)) throw Error("mask lambda must be positive, got " + std::to_string(lambda));
  }
};

enum class TrainMode { kBaseline, kMaskOnly, kMultiTask, kDiffMask };

inline std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kBaseline:
      return "baseline";
    case TrainMode::kMaskOnly:
      return "mask-only";
    case TrainMode::kMultiTask:
      return "multi-task";
    case TrainMode::kDiffMask:
      return "diffmask";
  }
  return "baseline";
}

inline TrainMode parse_train_mode(std::string_view s) {
  if (s == "baseline") return TrainMode::kBaseline;
  if (s == "mask-only") return TrainMode::kMaskOnly;
  if (s == "multi-task") return TrainMode::kMultiTask;
  if (s == "diffmask") return TrainMode::kDiffMask;
  throw Error("unknown training mode '" + std::string(s) + "' (expected baseline, mask-only, multi-task or diffmask)");
}

// Copy-eligible positions: q_i > epsilon.
inline std::vector<char> mask_keep(std::span<const double> q, double epsilon) {
  std::vector<char> keep(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) keep[i] = q[i] > epsilon;
  return keep;
}

struct MaskedCopy {
  std::vector<double> weights;
  bool fallback = false;  // no position passed the threshold; mask disabled
};

// lambda * a_i where q_i > epsilon, else 0. The weights are left unnormalized;
// they replace the copy side of the mixture, which is renormalized jointly.
inline MaskedCopy hard_mask(std::span<const double> a, std::span<const double> q, const MaskConfig& cfg) {
  if (a.size() != q.size())
    throw Error("mask length mismatch: attention " + std::to_string(a.size()) + ", selection " +
                std::to_string(q.size()));
  cfg.validate();
  MaskedCopy out;
  const auto keep = mask_keep(q, cfg.epsilon);
  bool any = false;
  for (char k : keep) any = any || k;
  if (!any) {
    out.weights.assign(a.begin(), a.end());
    out.fallback = true;
    return out;
  }
  out.weights.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.weights[i] = keep[i] ? cfg.lambda * a[i] : 0.0;
  return out;
}

inline std::vector<double> soft_mask(std::span<const double> a, std::span<const double> q) {
  if (a.size() != q.size())
    throw Error("mask length mismatch: attention " + std::to_string(a.size()) + ", selection " +
                std::to_string(q.size()));
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * q[i];
  return out;
}

template <class S>
BasicTensor<S> soft_mask(const BasicTensor<S>& a, const BasicTensor<S>& q) {
  if (a.numel() != q.numel())
    throw Error("mask length mismatch: attention " + std::to_string(a.numel()) + ", selection " +
                std::to_string(q.numel()));
  return mul(a, q);
}

// Copy weights rescaled to sum to one.
inline std::vector<double> normalize_copy(std::span<const double> w) {
  double z = 0;
  for (double v : w) z += v;
  if (!(z > 0)) throw Error("copy weights have no mass");
  std::vector<double> out(w.begin(), w.end());
  for (auto& v : out) v /= z;
  return out;
}

template <class S>
struct CopySupervision {
  BasicTensor<S> loss;
  std::size_t supervised_steps = 0;
  std::size_t skipped_steps = 0;
};

// Sum over copied steps of -ln sum_{i in gold(j)} a_j^i. Steps with copied[j]
// unset contribute nothing; copied steps without gold positions are skipped
// and counted.
template <class S>
CopySupervision<S> copy_supervision_loss(const std::vector<BasicTensor<S>>& attention,
                                         const std::vector<std::vector<std::size_t>>& gold,
                                         const std::vector<char>& copied) {
  if (attention.size() != gold.size() || attention.size() != copied.size())
    throw Error("copy supervision needs one gold set and flag per decoder step");
  CopySupervision<S> out;
  std::vector<BasicTensor<S>> terms;
  for (std::size_t j = 0; j < attention.size(); ++j) {
    if (!copied[j]) continue;
    if (gold[j].empty()) {
      ++out.skipped_steps;
      continue;
    }
    terms.push_back(log(index_sum(attention[j], gold[j])));
    ++out.supervised_steps;
  }
  out.loss = terms.empty() ? BasicTensor<S>::scalar(S(0)) : scale(add_all(terms), S(-1));
  return out;
}

template <class S>
BasicTensor<S> multitask_loss(const BasicTensor<S>& summarization_loss, const BasicTensor<S>& tagging_loss, S weight) {
  return add(summarization_loss, scale(tagging_loss, weight));
}

}  // namespace busum
