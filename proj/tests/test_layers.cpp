#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gradcheck.hpp"
#include "hred/embedding_io.hpp"
#include "hred/layers.hpp"

using namespace hred;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ParamStore tiny_gru_params() {
  ParamStore p;
  p["g.W_r"] = Tensor::matrix(2, 2, {0.1, 0.2, 0.3, 0.4});
  p["g.U_r"] = Tensor::matrix(2, 2, {0.5, 0.0, 0.0, 0.5});
  p["g.b_r"] = Tensor::vector({0.0, 0.1});
  p["g.W_z"] = Tensor::matrix(2, 2, {-0.2, 0.1, 0.0, 0.3});
  p["g.U_z"] = Tensor::matrix(2, 2, {0.0, 1.0, 1.0, 0.0});
  p["g.b_z"] = Tensor::vector({0.2, -0.1});
  p["g.W_h"] = Tensor::matrix(2, 2, {0.7, -0.3, 0.2, 0.6});
  p["g.U_h"] = Tensor::matrix(2, 2, {0.6, 0.8, -0.8, 0.6});
  p["g.b_h"] = Tensor::vector({-0.05, 0.05});
  return p;
}

}  // namespace

TEST_CASE("embed: identity projection returns the table row") {
  EmbeddingLayer layer{"embed", 3, 3, 3};
  ParamStore p;
  p["embed.E"] = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  p["embed.X"] = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(embed_value(layer, p, 1) == Tensor::vector({0, 1, 0}));
}

TEST_CASE("embed: hand-multiplied low-rank product") {
  EmbeddingLayer layer{"embed", 3, 2, 2};
  ParamStore p;
  p["embed.E"] = Tensor::matrix(3, 2, {1, 0, 0.5, -1, 2, 3});
  p["embed.X"] = Tensor::matrix(2, 2, {1, 2, 3, 4});
  // X * [2, 3] = [1*2 + 2*3, 3*2 + 4*3]
  CHECK(embed_value(layer, p, 2) == Tensor::vector({8, 18}));
  // X * [0.5, -1] = [0.5 - 2, 1.5 - 4]
  CHECK(embed_value(layer, p, 1) == Tensor::vector({-1.5, -2.5}));
  CHECK_THROWS_AS(embed_value(layer, p, 3), std::out_of_range);
}

TEST_CASE("embed: gradient w.r.t. E touches only the looked-up row") {
  EmbeddingLayer layer{"embed", 5, 3, 4};
  ParamStore p;
  Rng rng(1);
  layer.init(p, rng);
  Graph g;
  ParamBinding bind(g, p);
  Var loss = ag::sum(ag::square(layer.embed(bind, 2)));
  g.backward(loss);
  GradStore grads;
  bind.accumulate_grads(grads);
  const Tensor& gE = grads.at("embed.E");
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      if (r == 2) CHECK(gE.at(r, c) != 0.0);
      else CHECK(gE.at(r, c) == 0.0);
    }
}

TEST_CASE("gru_step: zero weights and zero state stay at zero") {
  GruCell cell{"g", 3, 3};
  ParamStore p;
  Rng rng(0);
  cell.init(p, rng);
  for (auto& [n, t] : p) std::fill(t.values().begin(), t.values().end(), 0.0);
  const Tensor h = gru_step_value(cell, p, Tensor({3}), Tensor::vector({1, -2, 3}));
  CHECK(h == Tensor({3}));
}

TEST_CASE("gru_step: matches hand-computed gates") {
  GruCell cell{"g", 2, 2};
  const ParamStore p = tiny_gru_params();
  const double h0[2] = {0.3, -0.6};
  const double x[2] = {1.0, 0.5};

  // Scalar oracle written out gate by gate.
  const double r0 = sig(0.1 * x[0] + 0.2 * x[1] + 0.5 * h0[0] + 0.0);
  const double r1 = sig(0.3 * x[0] + 0.4 * x[1] + 0.5 * h0[1] + 0.1);
  const double z0 = sig(-0.2 * x[0] + 0.1 * x[1] + 1.0 * h0[1] + 0.2);
  const double z1 = sig(0.0 * x[0] + 0.3 * x[1] + 1.0 * h0[0] - 0.1);
  const double rh0 = r0 * h0[0], rh1 = r1 * h0[1];
  const double c0 = std::tanh(0.7 * x[0] - 0.3 * x[1] + 0.6 * rh0 + 0.8 * rh1 - 0.05);
  const double c1 = std::tanh(0.2 * x[0] + 0.6 * x[1] - 0.8 * rh0 + 0.6 * rh1 + 0.05);
  const double e0 = (1 - z0) * h0[0] + z0 * c0;
  const double e1 = (1 - z1) * h0[1] + z1 * c1;

  const Tensor h = gru_step_value(cell, p, Tensor::vector({h0[0], h0[1]}), Tensor::vector({x[0], x[1]}));
  CHECK(h[0] == doctest::Approx(e0).epsilon(1e-14));
  CHECK(h[1] == doctest::Approx(e1).epsilon(1e-14));
}

TEST_CASE("gru_step: output bounded by max(|h_prev|, 1)") {
  GruCell cell{"g", 3, 4};
  ParamStore p;
  Rng rng(8);
  cell.init(p, rng);
  hred::testing::randomize(p, rng, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor h0({4}), x({3});
    for (double& v : h0.values()) v = 3.0 * rng.normal();
    for (double& v : x.values()) v = 3.0 * rng.normal();
    const Tensor h = gru_step_value(cell, p, h0, x);
    CHECK(h.all_finite());
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(h[i]) <= std::max(std::abs(h0[i]), 1.0) + 1e-15);
  }
}

TEST_CASE("gru_step: shape mismatch is an error") {
  GruCell cell{"g", 2, 2};
  const ParamStore p = tiny_gru_params();
  CHECK_THROWS_AS(gru_step_value(cell, p, Tensor({3}), Tensor({2})), ShapeError);
  CHECK_THROWS_AS(gru_step_value(cell, p, Tensor({2}), Tensor({5})), ShapeError);
}

TEST_CASE("gru_step: parameter and input gradients match finite differences") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    GruCell cell{"g", 3, 4};
    ParamStore p;
    Rng rng(seed);
    cell.init(p, rng);
    hred::testing::randomize(p, rng, 0.8);
    Tensor h0({4}), x({3});
    for (double& v : h0.values()) v = rng.normal() * 0.5;
    for (double& v : x.values()) v = rng.normal();
    p["in.h0"] = h0;
    p["in.x"] = x;
    const auto r = hred::testing::check_params(
        [&](ParamBinding& bind) {
          Var h = cell.step(bind, bind("in.h0"), bind("in.x"));
          h = cell.step(bind, h, bind("in.x"));
          return ag::sum(ag::mul(h, h));
        },
        p);
    CAPTURE(r.where);
    CHECK(r.worst < hred::testing::kFdTolerance);
  }
}

TEST_CASE("logits: zero output weights give uniform softmax") {
  OutputLayer layer{"out", 6, 3, 0};
  ParamStore p;
  Rng rng(0);
  layer.init(p, rng);
  p["out.O"] = Tensor({6, 3});
  p["out.b"] = Tensor({6});
  const Tensor l = logits_value(layer, p, Tensor::vector({0.4, -2, 1}));
  CHECK(l == Tensor({6}));
  Graph g;
  for (double v : ag::softmax(g.constant(l)).value().values()) CHECK(v == doctest::Approx(1.0 / 6));
}

TEST_CASE("logits: hand-computed matvec") {
  OutputLayer layer{"out", 4, 2, 0};
  ParamStore p;
  p["out.O"] = Tensor::matrix(4, 2, {1, 0, 0, 1, 1, 1, -1, 2});
  p["out.b"] = Tensor::vector({0, 0.5, 0, -1});
  // h = [2, -1]: [2, -1 + 0.5, 2 - 1, -2 - 2 - 1]
  CHECK(logits_value(layer, p, Tensor::vector({2, -1})) == Tensor::vector({2, -0.5, 1, -5}));
}

TEST_CASE("logits: maxout with pieces p and -p yields |p h|") {
  OutputLayer layer{"out", 2, 2, 2};
  ParamStore p;
  const Tensor piece = Tensor::matrix(2, 2, {1.0, -2.0, 0.5, 3.0});
  Tensor neg = piece;
  for (double& v : neg.values()) v = -v;
  p["out.P0"] = piece;
  p["out.P1"] = neg;
  p["out.c0"] = Tensor({2});
  p["out.c1"] = Tensor({2});
  p["out.O"] = Tensor::matrix(2, 2, {1, 0, 0, 1});
  p["out.b"] = Tensor({2});
  // p h = [1*1 - 2*2, 0.5*1 + 3*2] = [-3, 6.5]
  CHECK(logits_value(layer, p, Tensor::vector({1, 2})) == Tensor::vector({3, 6.5}));
}

TEST_CASE("logits: gradients with and without maxout") {
  for (std::size_t pieces : {0u, 2u, 3u}) {
    CAPTURE(pieces);
    OutputLayer layer{"out", 5, 3, pieces};
    ParamStore p;
    Rng rng(pieces + 10);
    layer.init(p, rng);
    hred::testing::randomize(p, rng, 1.0);
    Tensor h({3});
    for (double& v : h.values()) v = rng.normal();
    p["in.h"] = h;
    const auto r = hred::testing::check_params(
        [&](ParamBinding& bind) { return ag::pick(ag::log_softmax(layer.logits(bind, bind("in.h"))), 2); }, p);
    CAPTURE(r.where);
    CHECK(r.worst < hred::testing::kFdTolerance);
  }
}

TEST_CASE("l2_pool examples") {
  const std::vector<Tensor> single{Tensor::vector({-3, 4, 0})};
  CHECK(l2_pool_value(single) == Tensor::vector({3, 4, 0}));

  const std::vector<Tensor> two{Tensor::vector({3, 0}), Tensor::vector({0, 4})};
  const Tensor pooled = l2_pool_value(two);
  CHECK(pooled[0] == doctest::Approx(3 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(pooled[1] == doctest::Approx(4 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(pooled[0] == doctest::Approx(2.1213).epsilon(1e-4));
  CHECK(pooled[1] == doctest::Approx(2.8284).epsilon(1e-4));

  const std::vector<Tensor> zeros{Tensor({2}), Tensor({2}), Tensor({2})};
  CHECK(l2_pool_value(zeros) == Tensor({2}));
  CHECK_THROWS_AS(l2_pool_value(std::vector<Tensor>{}), std::invalid_argument);
}

TEST_CASE("l2_pool is permutation invariant") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor> states;
    for (int k = 0; k < 5; ++k) {
      Tensor t({3});
      for (double& v : t.values()) v = rng.normal();
      states.push_back(t);
    }
    const Tensor a = l2_pool_value(states);
    std::reverse(states.begin(), states.end());
    std::swap(states[0], states[2]);
    CHECK(max_abs_diff(a, l2_pool_value(states)) < 1e-14);
  }
}

TEST_CASE("l2_pool gradient") {
  Rng rng(21);
  std::vector<Tensor> in;
  for (int k = 0; k < 3; ++k) {
    Tensor t({4});
    for (double& v : t.values()) v = rng.normal();
    in.push_back(t);
  }
  const auto r = hred::testing::check_inputs(
      [](Graph&, const std::vector<Var>& v) { return ag::sum(ag::mul(l2_pool(v), l2_pool(v))); }, in);
  CHECK(r.worst < hred::testing::kFdTolerance);
}

TEST_CASE("embedding file reader") {
  std::istringstream in("3 2\nhello 0.5 -1\nworld 1e-3 2\n\nfoo 0 0\n");
  const EmbeddingTable t = read_embeddings(in);
  CHECK(t.dim == 2);
  CHECK(t.vectors.size() == 3);
  CHECK(t.vectors.at("hello") == std::vector<double>{0.5, -1});
  CHECK(t.vectors.at("world")[0] == 1e-3);

  std::istringstream ragged("a 1 2\nb 1\n");
  CHECK_THROWS_AS(read_embeddings(ragged), std::runtime_error);
  std::istringstream bad("a 1 x\n");
  CHECK_THROWS_AS(read_embeddings(bad), std::runtime_error);
}
