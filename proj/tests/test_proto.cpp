#include <cmath>

#include "doctest.h"
#include "peohoi/gradcheck.hpp"
#include "peohoi/proto.hpp"
#include "test_helpers.hpp"

using namespace peohoi;

namespace {

ProtoParams<double> make_proto(ParamSet<double>& ps, int num_pred, int d_v, int d_w, int hidden,
                               int d_p, Rng& rng) {
  ProtoParams<double> p;
  p.bank = &ps.add("bank", init_uniform<double>({num_pred, d_w}, d_w, rng));
  p.sel_W = &add_weight(ps, "sel.W", d_v, d_w, rng);
  p.sel_b = &add_bias(ps, "sel.b", d_w);
  int d_f = d_v + d_w;
  p.fq_W = &add_weight(ps, "q.W", d_f, d_f, rng);
  p.fq_b = &add_bias(ps, "q.b", d_f);
  p.fk_W = &add_weight(ps, "k.W", d_f, d_f, rng);
  p.fv_W = &add_weight(ps, "v.W", d_f, d_f, rng);
  p.fv_b = &add_bias(ps, "v.b", d_f);
  p.ffn1_W = &add_weight(ps, "ffn1.W", d_f, hidden, rng);
  p.ffn1_b = &add_bias(ps, "ffn1.b", hidden);
  p.ffn2_W = &add_weight(ps, "ffn2.W", hidden, d_p, rng);
  p.ffn2_b = &add_bias(ps, "ffn2.b", d_p);
  p.ln = make_layer_norm(ps, "ln", d_p);
  p.cls_W = &add_weight(ps, "cls.W", d_p, num_pred, rng);
  p.cls_b = &add_bias(ps, "cls.b", num_pred);
  return p;
}

Tensor<double> rnd(std::vector<int> shape, Rng& rng) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-1, 1);
  return t;
}

}  // namespace

TEST_CASE("select_prototypes: identical bank rows collapse to that row") {
  ParamSet<double> ps;
  Rng rng(1);
  auto p = make_proto(ps, 4, 3, 2, 5, 3, rng);
  for (int l = 0; l < 4; ++l) {
    p.bank->value.at(l, 0) = 0.25;
    p.bank->value.at(l, 1) = -1.5;
  }
  Graph<double> g;
  auto fu = g.constant(rnd({2, 3}, rng));
  auto s_mix = select_prototypes(fu, p, ProtoSelect::mixture);
  std::vector<std::vector<int>> gt = {{1}, {0, 3}};
  auto s_tf = select_prototypes(fu, p, ProtoSelect::teacher_forced, &gt);
  for (int i = 0; i < 2; ++i) {
    CHECK(g.value(s_mix).at(i, 0) == doctest::Approx(0.25));
    CHECK(g.value(s_mix).at(i, 1) == doctest::Approx(-1.5));
    CHECK(g.value(s_tf).at(i, 0) == doctest::Approx(0.25));
    CHECK(g.value(s_tf).at(i, 1) == doctest::Approx(-1.5));
  }
}

TEST_CASE("select_prototypes: mixture is a convex combination of bank rows") {
  ParamSet<double> ps;
  Rng rng(2);
  auto p = make_proto(ps, 5, 3, 2, 5, 3, rng);
  Graph<double> g;
  auto fu = g.constant(rnd({3, 3}, rng));
  auto proj = affine(fu, *p.sel_W, *p.sel_b);
  auto weights = softmax_rows(scale(matmul_nt(proj, g.param(*p.bank)), 1.0 / std::sqrt(2.0)));
  for (int i = 0; i < 3; ++i) {
    double sum = 0;
    for (int l = 0; l < 5; ++l) sum += g.value(weights).at(i, l);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
  }
  // and the selected vector equals weights * bank
  auto s = select_prototypes(fu, p, ProtoSelect::mixture);
  auto ref = matmul(weights, g.param(*p.bank));
  for (size_t i = 0; i < g.value(s).data.size(); ++i)
    CHECK(g.value(s).data[i] == doctest::Approx(g.value(ref).data[i]).epsilon(1e-12));
}

TEST_CASE("select_prototypes: teacher-forced with a single label picks that bank row") {
  ParamSet<double> ps;
  Rng rng(3);
  auto p = make_proto(ps, 5, 3, 2, 5, 3, rng);
  Graph<double> g;
  auto fu = g.constant(rnd({1, 3}, rng));
  std::vector<std::vector<int>> gt = {{2}};
  auto s = select_prototypes(fu, p, ProtoSelect::teacher_forced, &gt);
  CHECK(g.value(s).at(0, 0) == doctest::Approx(p.bank->value.at(2, 0)));
  CHECK(g.value(s).at(0, 1) == doctest::Approx(p.bank->value.at(2, 1)));
}

TEST_CASE("select_prototypes: teacher-forced without labels is a usage error") {
  ParamSet<double> ps;
  Rng rng(4);
  auto p = make_proto(ps, 5, 3, 2, 5, 3, rng);
  Graph<double> g;
  auto fu = g.constant(rnd({1, 3}, rng));
  CHECK_THROWS_AS(select_prototypes(fu, p, ProtoSelect::teacher_forced), UsageError);
}

TEST_CASE("prototype_embed: single-pair attention is exactly f_V(F)") {
  ParamSet<double> ps;
  Rng rng(5);
  const int d_v = 3, d_w = 2, d_f = 5;
  auto p = make_proto(ps, 4, d_v, d_w, 6, 4, rng);
  Graph<double> g;
  auto fu = g.constant(rnd({1, d_v}, rng));
  auto s = select_prototypes(fu, p, ProtoSelect::mixture);

  // reference: F' = F + f_V(F), then the FFN/LN stack
  auto f = concat_cols<double>({fu, s});
  auto fprime = add(f, affine(f, *p.fv_W, *p.fv_b));
  auto h = relu(affine(fprime, *p.ffn1_W, *p.ffn1_b));
  auto ref = layer_norm_rows(affine(h, *p.ffn2_W, *p.ffn2_b), *p.ln.gain, *p.ln.bias);

  auto out = prototype_embed(fu, s, p);
  REQUIRE(g.value(out).cols() == 4);
  for (size_t i = 0; i < g.value(out).data.size(); ++i)
    CHECK(g.value(out).data[i] == doctest::Approx(g.value(ref).data[i]).epsilon(1e-9));
  (void)d_f;
}

TEST_CASE("prototype_embed: zero f_V isolates the residual branch") {
  ParamSet<double> ps;
  Rng rng(6);
  auto p = make_proto(ps, 4, 3, 2, 6, 4, rng);
  p.fv_W->value.fill(0);
  p.fv_b->value.fill(0);
  Graph<double> g;
  auto fu = g.constant(rnd({3, 3}, rng));
  auto s = select_prototypes(fu, p, ProtoSelect::mixture);
  auto out = prototype_embed(fu, s, p);

  auto f = concat_cols<double>({fu, s});
  auto h = relu(affine(f, *p.ffn1_W, *p.ffn1_b));
  auto ref = layer_norm_rows(affine(h, *p.ffn2_W, *p.ffn2_b), *p.ln.gain, *p.ln.bias);
  for (size_t i = 0; i < g.value(out).data.size(); ++i)
    CHECK(g.value(out).data[i] == doctest::Approx(g.value(ref).data[i]).epsilon(1e-12));
}

TEST_CASE("prototype_embed: 64-bit gradient check over the whole module") {
  ParamSet<double> ps;
  Rng rng(7);
  const int d_v = 4, d_w = 3;
  auto p = make_proto(ps, 5, d_v, d_w, 6, 4, rng);
  Tensor<double> fu = rnd({3, d_v}, rng);
  Tensor<double> upstream = rnd({3, 4}, rng);
  auto build = [&](Graph<double>& g) {
    auto u = g.constant(fu);
    auto s = select_prototypes(u, p, ProtoSelect::mixture);
    auto out = prototype_embed(u, s, p);
    return sum_all(mul(out, g.constant(upstream)));
  };
  auto rep = grad_check<double>(ps, build, 1e-4);
  CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("prototype_classify: zero logits give 0.5 (sigmoid) and uniform (softmax)") {
  ParamSet<double> ps;
  Rng rng(8);
  auto p = make_proto(ps, 6, 3, 2, 5, 4, rng);
  p.cls_W->value.fill(0);
  p.cls_b->value.fill(0);
  Graph<double> g;
  auto feats = g.constant(rnd({2, 4}, rng));
  auto probs = prototype_classify(feats, p, /*softmax_head=*/false);
  for (double v : g.value(probs).data) CHECK(v == doctest::Approx(0.5));
  auto probs_sm = prototype_classify(feats, p, /*softmax_head=*/true);
  for (double v : g.value(probs_sm).data) CHECK(v == doctest::Approx(1.0 / 6));
}

TEST_CASE("prototype_classify: probabilities stay in (0,1)") {
  ParamSet<double> ps;
  Rng rng(9);
  auto p = make_proto(ps, 6, 3, 2, 5, 4, rng);
  Graph<double> g;
  auto feats = g.constant(rnd({4, 4}, rng));
  for (bool sm : {false, true}) {
    auto probs = prototype_classify(feats, p, sm);
    for (double v : g.value(probs).data) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("propensity: direct evaluation at N=1000") {
  FrequencyTable f;
  f.total_pairs = 1000;
  f.label_counts = {100, 1, 0};
  PropensityTable t = propensity(f);
  CHECK(t.C == doctest::Approx(5.9078).epsilon(1e-4));
  CHECK(t.alpha[0] == doctest::Approx(0.9442).epsilon(1e-3));
  CHECK(t.omega[0] == doctest::Approx(1.0591).epsilon(1e-3));
  CHECK(t.alpha[1] == doctest::Approx(0.1448).epsilon(1e-3));
  CHECK(t.omega[1] == doctest::Approx(std::log(1000.0)).epsilon(1e-6));
  // zero-frequency labels are floored to N_l = 1
  CHECK(t.omega[2] == t.omega[1]);
}

TEST_CASE("propensity: exact reciprocal pairing and monotonicity") {
  FrequencyTable f;
  f.total_pairs = 5000;
  f.label_counts = {1, 2, 10, 100, 5000, 1000000000};
  PropensityTable t = propensity(f);
  for (size_t l = 0; l < t.alpha.size(); ++l) {
    CHECK(t.omega[l] == 1.0 / t.alpha[l]);  // exact
    CHECK(t.omega[l] * t.alpha[l] == 1.0);  // exact
    CHECK(t.alpha[l] > 0.0);
    CHECK(t.alpha[l] <= 1.0);
    CHECK(t.omega[l] >= 1.0);
    if (l > 0) {
      CHECK(t.alpha[l] > t.alpha[l - 1]);  // strictly increasing in N_l
      CHECK(t.omega[l] < t.omega[l - 1]);  // rare labels get strictly larger weight
    }
  }
  CHECK(t.alpha.back() > 1.0 - 1e-6);  // alpha -> 1 as N_l -> infinity
}

TEST_CASE("propensity: tiny training sets demand an explicit C override") {
  FrequencyTable f;
  f.total_pairs = 2;  // log(2) - 1 < 0
  f.label_counts = {1, 1};
  CHECK_THROWS_AS(propensity(f), ConfigError);
  PropensityTable t = propensity(f, 0.0);
  for (double a : t.alpha) CHECK(a == 1.0);
  for (double w : t.omega) CHECK(w == 1.0);
}

TEST_CASE("pwce_loss: hand oracles") {
  Graph<double> g;
  auto mk_prob = [&](double p) {
    Tensor<double> t({1, 1});
    t.data[0] = p;
    return g.constant(std::move(t));
  };
  Tensor<double> y({1, 1});
  y.data[0] = 1.0;

  // omega=1, y=1, p=0.5 -> -ln(0.5)
  auto l1 = pwce_loss(mk_prob(0.5), y, {1.0});
  CHECK(g.value(l1).data[0] == doctest::Approx(0.6931).epsilon(1e-3));

  // y=1, p -> 1: loss -> 0
  auto l2 = pwce_loss(mk_prob(1.0 - 1e-9), y, {1.0});
  CHECK(g.value(l2).data[0] < 1e-5);

  // omega=2 doubles the loss
  auto l3 = pwce_loss(mk_prob(0.5), y, {2.0});
  CHECK(g.value(l3).data[0] == doctest::Approx(1.3863).epsilon(1e-3));
}

TEST_CASE("pwce_loss: nonnegative; equals mean BCE when all weights are 1") {
  Rng rng(10);
  Graph<double> g;
  const int B = 4, L = 6;
  Tensor<double> pt({B, L}), y({B, L});
  for (auto& v : pt.data) v = rng.uniform(0.05, 0.95);
  for (auto& v : y.data) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
  auto probs = g.constant(pt);
  auto loss = pwce_loss(probs, y, std::vector<double>(L, 1.0));
  double manual = 0;
  for (int i = 0; i < B; ++i)
    for (int l = 0; l < L; ++l) {
      double p = pt.at(i, l), yy = y.at(i, l);
      manual -= yy * std::log(p) + (1 - yy) * std::log(1 - p);
    }
  manual /= B;
  CHECK(g.value(loss).data[0] == doctest::Approx(manual).epsilon(1e-9));
  CHECK(g.value(loss).data[0] >= 0.0);
}

TEST_CASE("pwce_loss: 64-bit gradient check through classifier") {
  ParamSet<double> ps;
  Rng rng(11);
  auto p = make_proto(ps, 5, 3, 2, 5, 4, rng);
  Tensor<double> feats = rnd({3, 4}, rng);
  Tensor<double> y({3, 5});
  y.at(0, 1) = 1;
  y.at(1, 0) = 1;
  y.at(1, 4) = 1;
  y.at(2, 2) = 1;
  std::vector<double> omega = {1.5, 3.0, 1.0, 2.0, 5.0};
  auto build = [&](Graph<double>& g) {
    auto probs = prototype_classify(g.constant(feats), p, false);
    return pwce_loss(probs, y, omega);
  };
  auto rep = grad_check<double>(ps, build, 1e-5);
  CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("prototype pipeline: inference ignores ground-truth labels") {
  // mixture-mode embedding depends only on features; flipping labels must
  // leave the output bit-identical
  using peohoi::testing::make_frame;
  Dims dims{6, 4, 3};
  auto model = peohoi::testing::toy_model<double>(dims, AblationMode::pen_pwce, 31, 12);
  Rng rng(12);
  FrameRecord frame = make_frame(0, 3, dims, rng);

  Graph<double> g1, g2;
  auto out1 = model.frame_forward(g1, frame, /*teacher_forced=*/false);
  FrameRecord tampered = frame;
  for (auto& p : tampered.pairs) {
    p.labels_spatial = {7};
    p.labels_action = {41};
  }
  auto out2 = model.frame_forward(g2, tampered, /*teacher_forced=*/false);
  CHECK(g1.value(out1.proto_feats).data == g2.value(out2.proto_feats).data);
  CHECK(g1.value(out1.ho_s).data == g2.value(out2.ho_s).data);
}
