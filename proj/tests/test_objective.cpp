#include <cmath>

#include "doctest.h"
#include "peohoi/gradcheck.hpp"
#include "peohoi/objective.hpp"

using namespace peohoi;

TEST_CASE("cb_weight: algebraic identity at n=1 and limits") {
  for (double beta : {0.0, 0.5, 0.9, 0.999, 0.9999}) CHECK(cb_weight(1, beta) == doctest::Approx(1.0));
  // CB(n) strictly decreasing in n, converging to (1 - beta)
  double beta = 0.999;
  double prev = cb_weight(1, beta);
  for (int64_t n : {2, 5, 10, 100, 1000, 100000}) {
    double w = cb_weight(n, beta);
    CHECK(w < prev);
    prev = w;
  }
  CHECK(cb_weight(1000000000, beta) == doctest::Approx(1.0 - beta).epsilon(1e-9));
  // zero counts are floored to one
  CHECK(cb_weight(0, beta) == doctest::Approx(1.0));
}

TEST_CASE("cb_focal_loss: hand oracles") {
  Graph<double> g;
  auto prob = [&](double p) {
    Tensor<double> t({1, 1});
    t.data[0] = p;
    return g.constant(std::move(t));
  };
  Tensor<double> y({1, 1});
  y.data[0] = 1.0;

  // gamma=0, CB=1, y=1, p=0.5 -> plain BCE = ln 2
  auto l1 = cb_focal_loss(prob(0.5), y, {1.0}, 0.0);
  CHECK(g.value(l1).data[0] == doctest::Approx(0.6931).epsilon(1e-3));

  // gamma=2, CB(2, beta=0.5) = 0.6667: 0.6667 * 0.25 * ln 2 = 0.1155
  double cb = cb_weight(2, 0.5);
  CHECK(cb == doctest::Approx(2.0 / 3).epsilon(1e-9));
  auto l2 = cb_focal_loss(prob(0.5), y, {cb}, 2.0);
  CHECK(g.value(l2).data[0] == doctest::Approx(0.1155).epsilon(2e-3));

  // perfect prediction -> loss ~ 0
  auto l3 = cb_focal_loss(prob(1.0 - 1e-9), y, {1.0}, 2.0);
  CHECK(g.value(l3).data[0] < 1e-6);
}

TEST_CASE("cb_focal_loss: focal term decreases in p_t; loss nonnegative and finite") {
  Graph<double> g;
  Tensor<double> y({1, 1});
  y.data[0] = 1.0;
  double prev = 1e300;
  for (double p : {0.05, 0.2, 0.4, 0.6, 0.8, 0.95, 0.999}) {
    Tensor<double> t({1, 1});
    t.data[0] = p;
    auto l = cb_focal_loss(g.constant(t), y, {1.0}, 2.0);
    double v = g.value(l).data[0];
    CHECK(v >= 0.0);
    CHECK(std::isfinite(v));
    CHECK(v < prev);
    prev = v;
  }
  // saturated probabilities stay finite under the clamp
  Tensor<double> t({1, 2});
  t.data[0] = 0.0;
  t.data[1] = 1.0;
  Tensor<double> y2({1, 2});
  y2.data[0] = 1.0;
  auto l = cb_focal_loss(g.constant(t), y2, {1.0, 1.0}, 2.0);
  CHECK(std::isfinite(g.value(l).data[0]));
}

TEST_CASE("total_loss: arithmetic and affinity in the auxiliary term") {
  Graph<double> g;
  auto scalar = [&](double v) {
    Tensor<double> t({1});
    t.data[0] = v;
    return g.constant(std::move(t));
  };
  CHECK(g.value(total_loss(scalar(1.0), scalar(0.5), 0.8)).data[0] == doctest::Approx(1.4));
  CHECK(g.value(total_loss(scalar(0.7), scalar(123.0), 0.0)).data[0] == doctest::Approx(0.7));
  // affine in the second argument with slope lambda
  double lambda = 0.8;
  double base = g.value(total_loss(scalar(1.0), scalar(0.0), lambda)).data[0];
  for (double x : {0.25, 0.5, 2.0}) {
    double v = g.value(total_loss(scalar(1.0), scalar(x), lambda)).data[0];
    CHECK(v == doctest::Approx(base + lambda * x).epsilon(1e-12));
  }
}

TEST_CASE("LossConfig: validation and the literal gamma tie") {
  LossConfig c;
  c.validate();
  CHECK(c.lambda == 0.8);
  CHECK(c.effective_gamma() == 2.0);
  c.paper_literal = true;
  CHECK(c.effective_gamma() == c.beta_cb);

  LossConfig bad;
  bad.beta_cb = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  LossConfig bad2;
  bad2.lambda = -0.1;
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
}

TEST_CASE("cb_focal_loss: 64-bit gradient check through a sigmoid head") {
  Rng rng(77);
  ParamSet<double> ps;
  auto& W = add_weight(ps, "W", 5, 4, rng);
  auto& b = add_bias(ps, "b", 4);
  Tensor<double> x({3, 5});
  for (auto& v : x.data) v = rng.uniform(-1, 1);
  Tensor<double> y({3, 4});
  y.at(0, 1) = 1;
  y.at(1, 0) = 1;
  y.at(2, 3) = 1;
  y.at(2, 2) = 1;
  std::vector<double> cbw = {1.0, 0.8, 1.2, 0.5};
  auto build = [&](Graph<double>& g) {
    auto p = sigmoid(affine(g.constant(x), W, b));
    return cb_focal_loss(p, y, cbw, 2.0);
  };
  auto rep = grad_check<double>(ps, build, 1e-4);
  CHECK(rep.max_rel_err < 1e-5);
}
