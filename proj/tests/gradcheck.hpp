// Copyright 2026 The wavft Authors
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

#ifndef WAVFT_TESTS_GRADCHECK_HPP_
#define WAVFT_TESTS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "wavft/graph.hpp"
#include "wavft/rng.hpp"
#include "wavft/tensor.hpp"

namespace wavft {
namespace testing {

// Collapses a tensor node to a scalar via a fixed pseudo-random projection,
// so every output element influences the loss with a distinct weight. Built
// on make_node, which doubles as a test of that extension point.
inline Graph<double>::Ref weighted_sum(Graph<double>& g, Graph<double>::Ref x, uint64_t seed) {
  const Tensor<double>& vx = g.value(x);
  auto w = std::make_shared<std::vector<double>>();
  RngStream rng(seed);
  w->reserve(static_cast<size_t>(vx.numel()));
  double acc = 0.0;
  for (int64_t i = 0; i < vx.numel(); ++i) {
    double wi = rng.uniform_range(-1.0, 1.0);
    w->push_back(wi);
    acc += wi * vx(i);
  }
  Tensor<double> out({1});
  out(0) = acc;
  return g.make_node(std::move(out), {x},
                     [x, w](Graph<double>& gg, Graph<double>::Ref self) {
                       double go = gg.grad(self)(0);
                       Tensor<double>& gx = gg.grad(x);
                       for (int64_t i = 0; i < gx.numel(); ++i)
                         gx(i) += go * (*w)[static_cast<size_t>(i)];
                     });
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  int64_t checked = 0;
  std::string worst;  // "input 2 elem 17: analytic=..., numeric=..."
};

// Verifies reverse-mode gradients of an arbitrary scalar-valued builder
// against central finite differences. `build` must construct a fresh graph
// from the current contents of `inputs` and return the scalar loss node; it
// is re-invoked for every probe, so any randomness inside must be derived
// from fixed seeds.
template <typename BuildFn>
GradCheckResult check_gradients(std::vector<Tensor<double>*> inputs, BuildFn build,
                                double h = 1e-5) {
  // Analytic pass.
  std::vector<Tensor<double>> analytic;
  {
    Graph<double> g;
    std::vector<Graph<double>::Ref> refs;
    refs.reserve(inputs.size());
    for (Tensor<double>* in : inputs) refs.push_back(g.leaf(*in, /*requires_grad=*/true));
    Graph<double>::Ref loss = build(g, refs);
    g.backward(loss);
    for (Graph<double>::Ref r : refs) analytic.push_back(g.grad(r));
  }

  auto eval = [&]() {
    Graph<double> g;
    std::vector<Graph<double>::Ref> refs;
    refs.reserve(inputs.size());
    for (Tensor<double>* in : inputs) refs.push_back(g.leaf(*in, /*requires_grad=*/false));
    return g.value(build(g, refs))(0);
  };

  GradCheckResult res;
  for (size_t ii = 0; ii < inputs.size(); ++ii) {
    Tensor<double>& in = *inputs[ii];
    for (int64_t e = 0; e < in.numel(); ++e) {
      const double orig = in(e);
      in(e) = orig + h;
      const double lp = eval();
      in(e) = orig - h;
      const double lm = eval();
      in(e) = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[ii](e);
      const double rel =
          std::fabs(a - numeric) / std::max({1e-3, std::fabs(a), std::fabs(numeric)});
      ++res.checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = "input " + std::to_string(ii) + " elem " + std::to_string(e) +
                    ": analytic=" + std::to_string(a) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  return res;
}

// Fills a tensor with smooth pseudo-random values in [-0.9, 0.9].
inline void randomize(Tensor<double>& t, uint64_t seed) {
  RngStream rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t(i) = rng.uniform_range(-0.9, 0.9);
}

}  // namespace testing
}  // namespace wavft

#endif  // WAVFT_TESTS_GRADCHECK_HPP_
