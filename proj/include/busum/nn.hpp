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
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "busum/rng.hpp"
#include "busum/tensor.hpp"

namespace busum {

template <class S>
struct NamedParam {
  std::string name;
  BasicTensor<S> tensor;
};

template <class S>
using ParamList = std::vector<NamedParam<S>>;

// Weights are drawn from uniform(-range, range); biases start at zero.
template <class S>
BasicTensor<S> uniform_param(Shape shape, Rng& rng, double range = 0.1) {
  std::vector<S> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<S>(rng.uniform(-range, range));
  return BasicTensor<S>::from(std::move(shape), std::move(v), true);
}

template <class S>
BasicTensor<S> zero_param(Shape shape) {
  return BasicTensor<S>::zeros(std::move(shape), true);
}

template <class S>
struct Linear {
  BasicTensor<S> weight;  // [out, in]
  BasicTensor<S> bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, Rng& rng, double range = 0.1) {
    return {uniform_param<S>({out, in}, rng, range), zero_param<S>({out})};
  }
  BasicTensor<S> operator()(const BasicTensor<S>& x) const { return linear(weight, x, bias); }
  void collect(const std::string& prefix, ParamList<S>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

template <class S>
struct LSTMState {
  BasicTensor<S> h;
  BasicTensor<S> c;
};

// Gates packed in the order input, forget, candidate, output:
//   [i; f; g; o] = W [x; h_prev] + b
//   c = sigmoid(f) * c_prev + sigmoid(i) * tanh(g)
//   h = sigmoid(o) * tanh(c)
template <class S>
struct LSTMCell {
  BasicTensor<S> weight;  // [4h, in + h]
  BasicTensor<S> bias;    // [4h]
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;

  static LSTMCell init(std::size_t in, std::size_t hidden, Rng& rng, double range = 0.1) {
    return {uniform_param<S>({4 * hidden, in + hidden}, rng, range), zero_param<S>({4 * hidden}), in, hidden};
  }

  LSTMState<S> zero_state() const {
    return {BasicTensor<S>::zeros({hidden_size}), BasicTensor<S>::zeros({hidden_size})};
  }

  LSTMState<S> operator()(const BasicTensor<S>& x, const LSTMState<S>& prev) const {
    if (x.numel() != input_size)
      throw Error("lstm input x has " + std::to_string(x.numel()) + " elements, expected " + std::to_string(input_size));
    if (prev.h.numel() != hidden_size)
      throw Error("lstm h_prev has " + std::to_string(prev.h.numel()) + " elements, expected " +
                  std::to_string(hidden_size));
    if (prev.c.numel() != hidden_size)
      throw Error("lstm c_prev has " + std::to_string(prev.c.numel()) + " elements, expected " +
                  std::to_string(hidden_size));
    if (weight.rank() != 2 || weight.dim(0) != 4 * hidden_size || weight.dim(1) != input_size + hidden_size)
      throw Error("lstm weights have shape " + shape_str(weight.shape()) + ", expected [" +
                  std::to_string(4 * hidden_size) + "," + std::to_string(input_size + hidden_size) + "]");
    if (bias.numel() != 4 * hidden_size) throw Error("lstm bias has shape " + shape_str(bias.shape()));
    auto hc = fused(x, prev);
    return {slice(hc, 0, hidden_size), slice(hc, hidden_size, hidden_size)};
  }

  void collect(const std::string& prefix, ParamList<S>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }

 private:
  // One graph node holding [h; c].
  BasicTensor<S> fused(const BasicTensor<S>& x, const LSTMState<S>& prev) const {
    const std::size_t h = hidden_size, in = input_size, n = in + h;
    std::vector<S> xh(n);
    std::copy(x.data().begin(), x.data().end(), xh.begin());
    std::copy(prev.h.data().begin(), prev.h.data().end(), xh.begin() + static_cast<std::ptrdiff_t>(in));
    const auto& w = weight.data();
    const auto& b = bias.data();
    const auto& cp = prev.c.data();
    auto gates = std::make_shared<std::vector<S>>(5 * h);  // i f g o tanh(c)
    auto& gv = *gates;
    for (std::size_t r = 0; r < 4 * h; ++r) {
      S z = b[r];
      const S* row = w.data() + r * n;
      for (std::size_t k = 0; k < n; ++k) z += row[k] * xh[k];
      gv[r] = (r >= 2 * h && r < 3 * h) ? std::tanh(z) : sigmoid_value(z);
    }
    std::vector<S> out(2 * h);
    for (std::size_t j = 0; j < h; ++j) {
      const S c = gv[h + j] * cp[j] + gv[j] * gv[2 * h + j];
      gv[4 * h + j] = std::tanh(c);
      out[j] = gv[3 * h + j] * gv[4 * h + j];
      out[h + j] = c;
    }
    return detail::make_result<S>(
        {2 * h}, std::move(out), {weight, bias, x, prev.h, prev.c},
        [gates, xh = std::move(xh), h, in, n](detail::Node<S>& self) {
          const auto& gv = *gates;
          const auto& cp = self.parents[4]->value;
          std::vector<S> dz(4 * h);
          std::vector<S> dcp(h);
          for (std::size_t j = 0; j < h; ++j) {
            const S i = gv[j], f = gv[h + j], g = gv[2 * h + j], o = gv[3 * h + j], tc = gv[4 * h + j];
            const S gh = self.grad[j];
            const S gc = self.grad[h + j] + gh * o * (S(1) - tc * tc);
            dz[j] = gc * g * i * (S(1) - i);
            dz[h + j] = gc * cp[j] * f * (S(1) - f);
            dz[2 * h + j] = gc * i * (S(1) - g * g);
            dz[3 * h + j] = gh * tc * o * (S(1) - o);
            dcp[j] = gc * f;
          }
          if (S* gw = detail::parent_grad(self, 0))
            for (std::size_t r = 0; r < 4 * h; ++r) {
              if (dz[r] == S(0)) continue;
              S* row = gw + r * n;
              for (std::size_t k = 0; k < n; ++k) row[k] += dz[r] * xh[k];
            }
          if (S* gb = detail::parent_grad(self, 1))
            for (std::size_t r = 0; r < 4 * h; ++r) gb[r] += dz[r];
          S* gx = detail::parent_grad(self, 2);
          S* ghp = detail::parent_grad(self, 3);
          if (gx || ghp) {
            const auto& w = self.parents[0]->value;
            std::vector<S> dxh(n, S(0));
            for (std::size_t r = 0; r < 4 * h; ++r) {
              if (dz[r] == S(0)) continue;
              const S* row = w.data() + r * n;
              for (std::size_t k = 0; k < n; ++k) dxh[k] += dz[r] * row[k];
            }
            if (gx)
              for (std::size_t k = 0; k < in; ++k) gx[k] += dxh[k];
            if (ghp)
              for (std::size_t k = 0; k < h; ++k) ghp[k] += dxh[in + k];
          }
          if (S* gc = detail::parent_grad(self, 4))
            for (std::size_t j = 0; j < h; ++j) gc[j] += dcp[j];
        });
  }
};

template <class S>
struct BiLSTMOutput {
  std::vector<BasicTensor<S>> states;  // [fwd_i; bwd_i] per position
  LSTMState<S> forward_final;          // after the last position
  LSTMState<S> backward_final;         // after the first position
};

template <class S>
struct BiLSTM {
  LSTMCell<S> fwd;
  LSTMCell<S> bwd;

  static BiLSTM init(std::size_t in, std::size_t hidden, Rng& rng, double range = 0.1) {
    auto f = LSTMCell<S>::init(in, hidden, rng, range);
    auto b = LSTMCell<S>::init(in, hidden, rng, range);
    return {std::move(f), std::move(b)};
  }

  std::size_t output_size() const { return 2 * fwd.hidden_size; }

  BiLSTMOutput<S> operator()(const std::vector<BasicTensor<S>>& inputs) const {
    const std::size_t n = inputs.size();
    if (n == 0) throw Error("bidirectional lstm over an empty sequence");
    std::vector<BasicTensor<S>> f(n), b(n);
    auto sf = fwd.zero_state();
    for (std::size_t t = 0; t < n; ++t) f[t] = (sf = fwd(inputs[t], sf)).h;
    auto sb = bwd.zero_state();
    for (std::size_t t = n; t-- > 0;) b[t] = (sb = bwd(inputs[t], sb)).h;
    BiLSTMOutput<S> out;
    out.states.reserve(n);
    for (std::size_t t = 0; t < n; ++t) out.states.push_back(concat<S>({f[t], b[t]}));
    out.forward_final = sf;
    out.backward_final = sb;
    return out;
  }

  void collect(const std::string& prefix, ParamList<S>& out) const {
    fwd.collect(prefix + ".fwd", out);
    bwd.collect(prefix + ".bwd", out);
  }
};

}  // namespace busum
