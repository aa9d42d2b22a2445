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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "wavft/graph.hpp"

using namespace wavft;
using namespace wavft::testing;
using G = Graph<double>;

namespace {
constexpr double kGradTol = 1e-4;
}

TEST_CASE("add and scale forward values") {
  G g;
  Tensor<double> a({3});
  Tensor<double> b({3});
  for (int i = 0; i < 3; ++i) {
    a(i) = i + 1;
    b(i) = 10.0 * (i + 1);
  }
  auto ra = g.leaf(a, false);
  auto rb = g.leaf(b, false);
  auto sum = g.add(ra, rb);
  auto sc = g.scale(sum, 0.5);
  CHECK(g.value(sum)(2) == doctest::Approx(33.0));
  CHECK(g.value(sc)(0) == doctest::Approx(5.5));
}

TEST_CASE("add, scale, axpby gradients") {
  Tensor<double> a({2, 3}), b({2, 3});
  randomize(a, 1);
  randomize(b, 2);
  auto res = check_gradients({&a, &b}, [](G& g, const std::vector<G::Ref>& in) {
    auto s = g.add(in[0], g.scale(in[1], -1.7));
    auto w1 = weighted_sum(g, s, 100);
    auto w2 = weighted_sum(g, in[0], 101);
    return g.axpby(0.3, w1, 0.7, w2);
  });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("linear matches a hand matmul") {
  G g;
  Tensor<double> x({2, 2});  // rows [1,2], [3,4]
  x(0, 0) = 1;
  x(0, 1) = 2;
  x(1, 0) = 3;
  x(1, 1) = 4;
  Tensor<double> w({2, 3});  // [[1,0,2],[0,1,3]]
  w(0, 0) = 1;
  w(0, 2) = 2;
  w(1, 1) = 1;
  w(1, 2) = 3;
  Tensor<double> b({3});
  b(2) = -1;
  auto y = g.linear(g.leaf(x, false), g.leaf(w, false), g.leaf(b, false));
  CHECK(g.value(y)(0, 0) == doctest::Approx(1.0));
  CHECK(g.value(y)(0, 1) == doctest::Approx(2.0));
  CHECK(g.value(y)(0, 2) == doctest::Approx(7.0));   // 1*2 + 2*3 - 1
  CHECK(g.value(y)(1, 2) == doctest::Approx(17.0));  // 3*2 + 4*3 - 1
}

TEST_CASE("linear gradients (x, w, b)") {
  Tensor<double> x({2, 4, 5}), w({5, 3}), b({3});
  randomize(x, 3);
  randomize(w, 4);
  randomize(b, 5);
  auto res = check_gradients({&x, &w, &b}, [](G& g, const std::vector<G::Ref>& in) {
    return weighted_sum(g, g.linear(in[0], in[1], in[2]), 102);
  });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("gelu forward at reference points") {
  G g;
  Tensor<double> x({3});
  x(0) = 0.0;
  x(1) = 1.0;
  x(2) = -1.0;
  auto y = g.gelu(g.leaf(x, false));
  CHECK(g.value(y)(0) == doctest::Approx(0.0));
  CHECK(g.value(y)(1) == doctest::Approx(0.8413447461).epsilon(1e-9));
  CHECK(g.value(y)(2) == doctest::Approx(-0.1586552539).epsilon(1e-9));
}

TEST_CASE("gelu gradients") {
  Tensor<double> x({4, 4});
  randomize(x, 6);
  auto res = check_gradients({&x}, [](G& g, const std::vector<G::Ref>& in) {
    return weighted_sum(g, g.gelu(in[0]), 103);
  });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("layer_norm normalizes rows") {
  G g;
  Tensor<double> x({2, 6});
  randomize(x, 7);
  Tensor<double> gamma({6}), beta({6});
  gamma.fill(1.0);
  auto y = g.layer_norm(g.leaf(x, false), g.leaf(gamma, false), g.leaf(beta, false), 1e-12);
  for (int r = 0; r < 2; ++r) {
    double mean = 0, var = 0;
    for (int d = 0; d < 6; ++d) mean += g.value(y)(r, d);
    mean /= 6;
    for (int d = 0; d < 6; ++d) {
      double c = g.value(y)(r, d) - mean;
      var += c * c;
    }
    var /= 6;
    CHECK(std::fabs(mean) < 1e-9);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("layer_norm gradients (x, gamma, beta)") {
  Tensor<double> x({2, 3, 6}), gamma({6}), beta({6});
  randomize(x, 8);
  randomize(gamma, 9);
  randomize(beta, 10);
  for (int i = 0; i < 6; ++i) gamma(i) += 1.0;  // keep scale away from zero
  auto res = check_gradients({&x, &gamma, &beta}, [](G& g, const std::vector<G::Ref>& in) {
    return weighted_sum(g, g.layer_norm(in[0], in[1], in[2], 1e-5), 104);
  });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("conv1d output length and a hand-checked value") {
  G g;
  // B=1, Tin=5, Cin=1; K=3, Cout=1; stride 2 -> Tout = (5-3)/2+1 = 2.
  Tensor<double> x({1, 5, 1});
  for (int t = 0; t < 5; ++t) x(0, t, 0) = t + 1;
  Tensor<double> w({3, 1, 1});
  w(0, 0, 0) = 1;
  w(1, 0, 0) = 2;
  w(2, 0, 0) = 3;
  Tensor<double> b({1});
  b(0) = 0.5;
  auto y = g.conv1d(g.leaf(x, false), g.leaf(w, false), g.leaf(b, false), 2);
  REQUIRE(g.value(y).dim(1) == 2);
  CHECK(g.value(y)(0, 0, 0) == doctest::Approx(1 + 4 + 9 + 0.5));
  CHECK(g.value(y)(0, 1, 0) == doctest::Approx(3 + 8 + 15 + 0.5));
}

TEST_CASE("conv1d gradients") {
  Tensor<double> x({2, 7, 3}), w({3, 3, 4}), b({4});
  randomize(x, 11);
  randomize(w, 12);
  randomize(b, 13);
  auto res = check_gradients({&x, &w, &b}, [](G& g, const std::vector<G::Ref>& in) {
    return weighted_sum(g, g.conv1d(in[0], in[1], in[2], 2), 105);
  });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("depthwise_conv1d same padding, hand-checked edges") {
  G g;
  // B=1, T=3, D=1, K=3: edges see one implicit zero.
  Tensor<double> x({1, 3, 1});
  x(0, 0, 0) = 1;
  x(0, 1, 0) = 2;
  x(0, 2, 0) = 3;
  Tensor<double> w({3, 1});
  w(0, 0) = 10;  // left tap (t-1)
  w(1, 0) = 1;   // center
  w(2, 0) = 0.1; // right tap (t+1)
  Tensor<double> b({1});
  auto y = g.depthwise_conv1d(g.leaf(x, false), g.leaf(w, false), g.leaf(b, false));
  CHECK(g.value(y)(0, 0, 0) == doctest::Approx(0 * 10 + 1 * 1 + 2 * 0.1));
  CHECK(g.value(y)(0, 1, 0) == doctest::Approx(1 * 10 + 2 * 1 + 3 * 0.1));
  CHECK(g.value(y)(0, 2, 0) == doctest::Approx(2 * 10 + 3 * 1 + 0 * 0.1));
}

TEST_CASE("depthwise_conv1d gradients") {
  Tensor<double> x({2, 6, 4}), w({3, 4}), b({4});
  randomize(x, 14);
  randomize(w, 15);
  randomize(b, 16);
  auto res = check_gradients({&x, &w, &b}, [](G& g, const std::vector<G::Ref>& in) {
    return weighted_sum(g, g.depthwise_conv1d(in[0], in[1], in[2]), 106);
  });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("mask_fill_rows replaces flagged rows and routes gradients") {
  Tensor<uint8_t> plan({2, 3});
  plan(0, 1) = 1;
  plan(1, 0) = 1;
  Tensor<double> x({2, 3, 4}), m({4});
  randomize(x, 17);
  randomize(m, 18);

  G g;
  auto rx = g.leaf(x, false);
  auto rm = g.leaf(m, false);
  auto y = g.mask_fill_rows(rx, plan, rm);
  for (int f = 0; f < 4; ++f) {
    CHECK(g.value(y)(0, 1, f) == m(f));
    CHECK(g.value(y)(1, 0, f) == m(f));
    CHECK(g.value(y)(0, 0, f) == x(0, 0, f));
  }

  auto res = check_gradients({&x, &m}, [&plan](G& gg, const std::vector<G::Ref>& in) {
    return weighted_sum(gg, gg.mask_fill_rows(in[0], plan, in[1]), 107);
  });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("zero_pad_rows zeroes the tail and blocks gradient flow there") {
  Tensor<double> x({2, 4, 3});
  randomize(x, 19);
  G g;
  auto y = g.zero_pad_rows(g.leaf(x, true), {4, 2});
  for (int f = 0; f < 3; ++f) {
    CHECK(g.value(y)(1, 2, f) == 0.0);
    CHECK(g.value(y)(1, 3, f) == 0.0);
    CHECK(g.value(y)(0, 3, f) == x(0, 3, f));
  }
  auto res = check_gradients({&x}, [](G& gg, const std::vector<G::Ref>& in) {
    return weighted_sum(gg, gg.zero_pad_rows(in[0], {4, 2}), 108);
  });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("time_select picks strided rows with an offset") {
  Tensor<double> x({1, 6, 2});
  randomize(x, 20);
  G g;
  // out[t] = x[2t + 1], 3 outputs, all valid.
  auto y = g.time_select(g.leaf(x, false), 2, 1, 3, {3});
  for (int t = 0; t < 3; ++t)
    for (int f = 0; f < 2; ++f) CHECK(g.value(y)(0, t, f) == x(0, 2 * t + 1, f));

  auto res = check_gradients({&x}, [](G& gg, const std::vector<G::Ref>& in) {
    return weighted_sum(gg, gg.time_select(in[0], 2, 1, 3, {2}), 109);
  });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("rel_offset_index clips at +-max_rel_dist") {
  CHECK(rel_offset_index(0, 0, 2) == 2);
  CHECK(rel_offset_index(3, 0, 2) == 4);   // +3 clipped to +2
  CHECK(rel_offset_index(0, 5, 2) == 0);   // -5 clipped to -2
  CHECK(rel_offset_index(2, 1, 2) == 3);   // +1
}

TEST_CASE("attention with zero logits is a uniform average over valid keys") {
  G g;
  const int B = 1, T = 4, D = 4, H = 2;
  Tensor<double> q({B, T, D}), k({B, T, D}), v({B, T, D}), rb({H, 5});
  randomize(v, 21);
  Tensor<double> probs;
  auto y = g.attention_core(g.leaf(q, false), g.leaf(k, false), g.leaf(v, false),
                            g.leaf(rb, false), H, 2, {3}, &probs);
  // probs is [B, H, T, T]; flat-index batch 0 by hand (Tensor is rank<=3).
  auto P = [&](int h, int t, int s) { return probs.data[static_cast<size_t>((h * T + t) * T + s)]; };
  // Valid length 3: weights 1/3 on the first three keys, 0 on key 3.
  for (int h = 0; h < H; ++h)
    for (int t = 0; t < 3; ++t) {
      for (int s = 0; s < 3; ++s) CHECK(P(h, t, s) == doctest::Approx(1.0 / 3));
      CHECK(P(h, t, 3) == 0.0);
    }
  for (int e = 0; e < D; ++e) {
    double expect = (v(0, 0, e) + v(0, 1, e) + v(0, 2, e)) / 3.0;
    CHECK(g.value(y)(0, 0, e) == doctest::Approx(expect));
    CHECK(g.value(y)(0, 3, e) == 0.0);  // padding query row
  }
}

TEST_CASE("attention with a single valid frame attends only to itself") {
  G g;
  const int B = 1, T = 3, D = 2, H = 1;
  Tensor<double> q({B, T, D}), k({B, T, D}), v({B, T, D}), rb({H, 3});
  randomize(q, 22);
  randomize(k, 23);
  randomize(v, 24);
  Tensor<double> probs;
  auto y = g.attention_core(g.leaf(q, false), g.leaf(k, false), g.leaf(v, false),
                            g.leaf(rb, false), H, 1, {1}, &probs);
  CHECK(probs.data[0] == doctest::Approx(1.0));  // [b=0,h=0,t=0,s=0]
  for (int e = 0; e < D; ++e) CHECK(g.value(y)(0, 0, e) == doctest::Approx(v(0, 0, e)));
}

TEST_CASE("attention_core gradients (q, k, v, relbias) with ragged lengths") {
  const int B = 2, T = 4, D = 4, H = 2, R = 2;
  Tensor<double> q({B, T, D}), k({B, T, D}), v({B, T, D}), rb({H, 2 * R + 1});
  randomize(q, 25);
  randomize(k, 26);
  randomize(v, 27);
  randomize(rb, 28);
  auto res = check_gradients({&q, &k, &v, &rb}, [](G& g, const std::vector<G::Ref>& in) {
    return weighted_sum(
        g, g.attention_core(in[0], in[1], in[2], in[3], H, R, {4, 2}, nullptr), 110);
  });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("relative bias steers attention between equal keys") {
  G g;
  const int T = 3, D = 2;
  Tensor<double> q({1, T, D}), k({1, T, D}), v({1, T, D}), rb({1, 3});
  // Equal q/k make content logits identical; only the offset bias differs.
  q.fill(0.3);
  k.fill(0.3);
  for (int t = 0; t < T; ++t) {
    v(0, t, 0) = t;
    v(0, t, 1) = -t;
  }
  rb(0, 2) = 5.0;  // strongly prefer offset +1 (key one step in the past)
  Tensor<double> probs;
  g.attention_core(g.leaf(q, false), g.leaf(k, false), g.leaf(v, false), g.leaf(rb, false), 1, 1,
                   {3}, &probs);
  // Query 1 sees keys at offsets {+1, 0, -1}, none clipped; the boosted
  // offset +1 is key 0. probs is [1,1,T,T].
  CHECK(probs.data[static_cast<size_t>(1 * T + 0)] > 0.9);
  // Query 2 sees key 0 at offset +2, which CLIPS to +1: keys 0 and 1 then
  // share the boosted bucket and split the mass.
  CHECK(probs.data[static_cast<size_t>(2 * T + 0)] == doctest::Approx(
            probs.data[static_cast<size_t>(2 * T + 1)]));
}

TEST_CASE("dropout: rate zero is the identity node") {
  G g;
  Tensor<double> x({5});
  randomize(x, 29);
  auto r = g.leaf(x, false);
  CHECK(g.dropout(r, 0.0, nullptr) == r);
}

TEST_CASE("dropout scales kept values and is seed-deterministic") {
  Tensor<double> x({1000});
  x.fill(1.0);
  G g;
  RngStream rng(777);
  auto y = g.dropout(g.leaf(x, false), 0.25, &rng);
  int kept = 0;
  for (int i = 0; i < 1000; ++i) {
    double v = g.value(y)(i);
    if (v != 0.0) {
      CHECK(v == doctest::Approx(1.0 / 0.75));
      ++kept;
    }
  }
  CHECK(kept > 700);
  CHECK(kept < 800);

  G g2;
  RngStream rng2(777);
  auto y2 = g2.dropout(g2.leaf(x, false), 0.25, &rng2);
  for (int i = 0; i < 1000; ++i) CHECK(g2.value(y2)(i) == g.value(y)(i));
}

TEST_CASE("dropout gradients with a fixed stream") {
  Tensor<double> x({3, 5});
  randomize(x, 30);
  auto res = check_gradients({&x}, [](G& g, const std::vector<G::Ref>& in) {
    RngStream rng(4242);  // fresh identical stream per rebuild
    return weighted_sum(g, g.dropout(in[0], 0.4, &rng), 111);
  });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("composite chain: conv -> gelu -> layer_norm -> linear") {
  Tensor<double> x({2, 9, 3}), cw({3, 3, 6}), cb({6}), gamma({6}), beta({6}), lw({6, 4}), lb({4});
  randomize(x, 31);
  randomize(cw, 32);
  randomize(cb, 33);
  gamma.fill(1.0);
  randomize(beta, 34);
  randomize(lw, 35);
  randomize(lb, 36);
  auto res = check_gradients(
      {&x, &cw, &cb, &gamma, &beta, &lw, &lb}, [](G& g, const std::vector<G::Ref>& in) {
        auto h = g.conv1d(in[0], in[1], in[2], 2);
        h = g.gelu(h);
        h = g.layer_norm(h, in[3], in[4], 1e-5);
        h = g.linear(h, in[5], in[6]);
        return weighted_sum(g, h, 112);
      });
  CHECK(res.max_rel_err < kGradTol);
}

TEST_CASE("backward ignores nodes that do not require gradients") {
  G g;
  Tensor<double> a({2}), b({2});
  a.fill(1.0);
  b.fill(2.0);
  auto ra = g.leaf(a, true);
  auto rb = g.leaf(b, false);
  auto y = g.add(ra, rb);
  auto loss = weighted_sum(g, y, 113);
  g.backward(loss);
  CHECK(g.grad(ra).numel() == 2);
  CHECK(g.requires_grad(rb) == false);
}

TEST_CASE("backward rejects non-scalar losses") {
  G g;
  Tensor<double> a({3});
  auto r = g.leaf(a, true);
  CHECK_THROWS_AS(g.backward(r), ShapeError);
}
