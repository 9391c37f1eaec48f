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
#include <functional>
#include <string>
#include <vector>

#include "busum/error.hpp"
#include "busum/nn.hpp"
#include "busum/rng.hpp"
#include "busum/tensor.hpp"

namespace busum {

template <class S>
void zero_grads(const ParamList<S>& params) {
  for (const auto& p : params) {
    auto t = p.tensor;
    if (t.requires_grad()) t.zero_grad();
  }
}

// Global L2 norm over all parameter gradients.
template <class S>
double grad_norm(const ParamList<S>& params) {
  long double acc = 0;
  for (const auto& p : params)
    if (p.tensor.has_grad())
      for (S g : p.tensor.grad()) acc += static_cast<long double>(g) * g;
  return static_cast<double>(std::sqrt(acc));
}

// Rescales all gradients so their global norm is at most max_norm. Returns
// the norm before clipping.
template <class S>
double clip_grad_norm(const ParamList<S>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0) {
    const S factor = static_cast<S>(max_norm / norm);
    for (const auto& p : params) {
      auto t = p.tensor;
      if (t.has_grad())
        for (S& g : t.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

template <class S>
struct AdagradState {
  double learning_rate = 0.15;
  double initial_accumulator = 0.1;
  std::vector<std::vector<S>> accumulators;
  bool initialized = false;
};

template <class S>
AdagradState<S> adagrad_init(const ParamList<S>& params, double learning_rate = 0.15,
                             double initial_accumulator = 0.1) {
  if (initial_accumulator <= 0) throw Error("adagrad initial accumulator must be positive");
  AdagradState<S> st;
  st.learning_rate = learning_rate;
  st.initial_accumulator = initial_accumulator;
  for (const auto& p : params)
    st.accumulators.emplace_back(p.tensor.numel(), static_cast<S>(initial_accumulator));
  st.initialized = true;
  return st;
}

// accumulator += g^2; param -= lr * g / sqrt(accumulator). Gradients are
// left in place.
template <class S>
void adagrad_step(const ParamList<S>& params, AdagradState<S>& state) {
  if (!state.initialized || state.accumulators.size() != params.size())
    throw Error("adagrad state is not initialized for these parameters");
  const S lr = static_cast<S>(state.learning_rate);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto t = params[k].tensor;
    if (!t.requires_grad() || !t.has_grad()) continue;
    auto& acc = state.accumulators[k];
    auto g = t.grad();
    auto v = t.mutable_data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (g[i] == S(0)) continue;
      acc[i] += g[i] * g[i];
      v[i] -= lr * g[i] / std::sqrt(acc[i]);
    }
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification

struct GradCheckReport {
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
  std::size_t coordinates = 0;
};

// Compares backward() against a fourth-order central difference,
//   f'(x) ~ (-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / 12h,
// evaluated in long double. Relative error per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8). When
// max_coords_per_param is nonzero, that many coordinates are sampled from
// each parameter; otherwise every coordinate is checked.
template <class S>
GradCheckReport finite_difference_report(const std::function<BasicTensor<S>()>& loss_fn, const ParamList<S>& params,
                                         double eps, std::size_t max_coords_per_param = 0, std::uint64_t seed = 0) {
  if (!(eps > 0)) throw Error("finite difference step must be positive");
  zero_grads(params);
  auto loss = loss_fn();
  if (loss.numel() != 1) throw Error("finite difference check expects a scalar loss");
  const long double base = loss.item();
  if (loss.requires_grad()) loss.backward();
  {
    NoGradGuard ng;
    const long double again = loss_fn().item();
    if (again != base) throw Error("loss function is not deterministic");
  }

  Rng rng(seed);
  GradCheckReport rep;
  for (const auto& p : params) {
    auto t = p.tensor;
    if (!t.requires_grad()) continue;
    std::vector<S> analytic(t.numel(), S(0));
    if (t.has_grad()) analytic.assign(t.grad().begin(), t.grad().end());
    std::vector<std::size_t> coords(t.numel());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (max_coords_per_param && coords.size() > max_coords_per_param) {
      rng.shuffle(coords);
      coords.resize(max_coords_per_param);
    }
    for (std::size_t i : coords) {
      auto data = t.mutable_data();
      const S x0 = data[i];
      auto eval = [&](long double delta) {
        data[i] = static_cast<S>(static_cast<long double>(x0) + delta);
        NoGradGuard ng;
        return static_cast<long double>(loss_fn().item());
      };
      const long double h = eps;
      const long double fp2 = eval(2 * h), fp1 = eval(h), fm1 = eval(-h), fm2 = eval(-2 * h);
      data[i] = x0;
      const long double numeric = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h);
      const long double a = analytic[i];
      const long double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8L});
      const double rel = static_cast<double>(std::fabs(a - numeric) / denom);
      ++rep.coordinates;
      if (rep.worst_param.empty() || rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_param = p.name;
        rep.worst_index = i;
        rep.analytic = static_cast<double>(a);
        rep.numeric = static_cast<double>(numeric);
      }
    }
  }
  zero_grads(params);
  return rep;
}

template <class S>
double finite_difference_check(const std::function<BasicTensor<S>()>& loss_fn, const ParamList<S>& params, double eps,
                               std::size_t max_coords_per_param = 0, std::uint64_t seed = 0) {
  return finite_difference_report(loss_fn, params, eps, max_coords_per_param, seed).max_rel_error;
}

}  // namespace busum
