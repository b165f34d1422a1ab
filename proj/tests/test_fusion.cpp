#include "doctest.h"
#include "peohoi/fusion.hpp"
#include "peohoi/gradcheck.hpp"
#include "test_helpers.hpp"

using namespace peohoi;
using peohoi::testing::make_pair;

namespace {

// toy dims: d_v=2, d_w=1, d_g=1 -> plain concat width 3*2+1+1 = 8
FusionParams<double> make_params(ParamSet<double>& ps, int d_in1, int d_in2, int d_model, Rng& rng) {
  FusionParams<double> fp;
  fp.fc1_W = &add_weight(ps, "fc1.W", d_in1, d_model, rng);
  fp.fc1_b = &add_bias(ps, "fc1.b", d_model);
  fp.fc2_W = &add_weight(ps, "fc2.W", d_in2, d_model, rng);
  fp.fc2_b = &add_bias(ps, "fc2.b", d_model);
  return fp;
}

}  // namespace

TEST_CASE("fusion: zero parameters give zero embeddings") {
  ParamSet<double> ps;
  Rng rng(1);
  auto fp = make_params(ps, 8, 9, 4, rng);
  fp.fc1_W->value.fill(0);
  Graph<double> g;
  auto mk = [&](std::initializer_list<double> v, int cols) {
    Tensor<double> t({1, cols});
    std::copy(v.begin(), v.end(), t.data.begin());
    return g.constant(std::move(t));
  };
  auto out = fuse_pairs(mk({1, 2}, 2), mk({3, 4}, 2), mk({5, 6}, 2), mk({7}, 1), mk({8}, 1), fp);
  for (double v : g.value(out).data) CHECK(v == 0.0);
}

TEST_CASE("fusion: hand affine oracle at toy dims") {
  // one pair, d_v=2, d_w=1, d_g=1, d_model=1; weights chosen so the output is
  // the weighted slot sum 1*f_h + 2*f_o + 3*f_u + 4*w + 5*gaze + 0.5
  ParamSet<double> ps;
  Rng rng(2);
  auto fp = make_params(ps, 8, 9, 1, rng);
  for (int i = 0; i < 2; ++i) {
    fp.fc1_W->value.at(i, 0) = 1;
    fp.fc1_W->value.at(2 + i, 0) = 2;
    fp.fc1_W->value.at(4 + i, 0) = 3;
  }
  fp.fc1_W->value.at(6, 0) = 4;
  fp.fc1_W->value.at(7, 0) = 5;
  fp.fc1_b->value.data[0] = 0.5;

  Graph<double> g;
  auto mk = [&](std::initializer_list<double> v, int cols) {
    Tensor<double> t({1, cols});
    std::copy(v.begin(), v.end(), t.data.begin());
    return g.constant(std::move(t));
  };
  auto out = fuse_pairs(mk({0.5, -1.0}, 2), mk({2.0, 0.25}, 2), mk({1.0, 1.0}, 2), mk({-2.0}, 1),
                        mk({3.0}, 1), fp);
  // 1*(0.5-1.0) + 2*(2.25) + 3*2 + 4*(-2) + 5*3 + 0.5 = 17.5
  CHECK(g.value(out).data[0] == doctest::Approx(17.5).epsilon(1e-12));
}

TEST_CASE("fusion: per-pair purity (permuting pairs permutes outputs)") {
  ParamSet<double> ps;
  Rng rng(3);
  auto fp = make_params(ps, 8, 9, 4, rng);
  Rng drng(5);
  Dims dims{2, 1, 1};
  // rows for two pairs, swapped order
  auto rows = [&](bool swapped) {
    Graph<double> g;
    Tensor<double> fh({2, 2}), fo({2, 2}), fu({2, 2}), w({2, 1}), gz({2, 1});
    Rng r(99);
    for (auto* t : {&fh, &fo, &fu, &w, &gz})
      for (auto& v : t->data) v = r.uniform(-1, 1);
    if (swapped) {
      for (auto* t : {&fh, &fo, &fu, &w, &gz}) {
        int c = t->cols();
        for (int j = 0; j < c; ++j) std::swap(t->data[j], t->data[c + j]);
      }
    }
    auto out = fuse_pairs(g.constant(fh), g.constant(fo), g.constant(fu), g.constant(w),
                          g.constant(gz), fp);
    return g.value(out);
  };
  auto a = rows(false);
  auto b = rows(true);
  for (int j = 0; j < 4; ++j) {
    CHECK(a.at(0, j) == b.at(1, j));
    CHECK(a.at(1, j) == b.at(0, j));
  }
  (void)dims;
  (void)drng;
}

TEST_CASE("fusion: slot wiring with one-hot probe weights") {
  // the prototype path must read the prototype slot and never the raw union
  // slot; the plain path must read feat_u
  ParamSet<double> ps;
  Rng rng(4);
  const int d_v = 2, d_p = 3, d_w = 1, d_g = 1;
  auto fp = make_params(ps, 3 * d_v + d_w + d_g, 2 * d_v + d_p + d_w + d_g, 1, rng);

  Graph<double> g;
  auto row = [&](std::vector<double> v) {
    Tensor<double> t({1, int(v.size())});
    std::copy(v.begin(), v.end(), t.data.begin());
    return g.constant(std::move(t));
  };
  auto fh = row({0.1, 0.2});
  auto fo = row({0.3, 0.4});
  auto w = row({0.5});
  auto gz = row({0.6});

  auto out_proto = [&](std::vector<double> proto) {
    return g.value(fuse_pairs_prototype(fh, fo, row(std::move(proto)), w, gz, fp)).data[0];
  };
  double p1 = out_proto({1.0, 2.0, 3.0});
  double p2 = out_proto({-1.0, 0.0, 9.0});
  CHECK(p1 != p2);  // generic weights: proto slot is live

  auto out_plain = [&](std::vector<double> fu) {
    return g.value(fuse_pairs(fh, fo, row(std::move(fu)), w, gz, fp)).data[0];
  };
  double u1 = out_plain({1.0, 2.0});
  double u2 = out_plain({5.0, -7.0});
  CHECK(u1 != u2);  // feat_u slot live on the plain path

  // one-hot probe on the prototype path: a weight vector that only reads the
  // proto slot must ignore every other slot (fresh graph: parameter values
  // are snapshotted when first mounted)
  fp.fc2_W->value.fill(0);
  fp.fc2_b->value.fill(0);
  fp.fc2_W->value.at(2 * d_v + 1, 0) = 1.0;  // second proto coordinate
  Graph<double> g2;
  auto row2 = [&](std::vector<double> v) {
    Tensor<double> t({1, int(v.size())});
    std::copy(v.begin(), v.end(), t.data.begin());
    return g2.constant(std::move(t));
  };
  CHECK(g2.value(fuse_pairs_prototype(row2({0.1, 0.2}), row2({0.3, 0.4}), row2({7.0, 8.0, 9.0}),
                                      row2({0.5}), row2({0.6}), fp))
            .data[0] == 8.0);
  CHECK(g2.value(fuse_pairs_prototype(row2({9, 9}), row2({9, 9}), row2({7.0, 8.0, 9.0}), row2({9}),
                                      row2({9}), fp))
            .data[0] == 8.0);
}

TEST_CASE("fusion: gradient flows to every input slot") {
  ParamSet<double> ps;
  Rng rng(6);
  const int d_v = 2, d_w = 1, d_g = 1;
  auto fp = make_params(ps, 3 * d_v + d_w + d_g, 2 * d_v + d_v + d_w + d_g, 3, rng);
  ps.add("fh", Tensor<double>::matrix({{0.3, -0.4}}));
  ps.add("fo", Tensor<double>::matrix({{0.5, 0.9}}));
  ps.add("fu", Tensor<double>::matrix({{-0.2, 0.7}}));
  ps.add("w", Tensor<double>::matrix({{0.8}}));
  ps.add("gz", Tensor<double>::matrix({{-0.6}}));
  Tensor<double> upstream({1, 3});
  for (auto& v : upstream.data) v = rng.uniform(0.5, 1.5);

  auto build = [&](Graph<double>& g) {
    auto out = fuse_pairs(g.param(*ps.find("fh")), g.param(*ps.find("fo")), g.param(*ps.find("fu")),
                          g.param(*ps.find("w")), g.param(*ps.find("gz")), fp);
    return sum_all(mul(out, g.constant(upstream)));
  };
  auto rep = grad_check<double>(ps, build, 1e-6);
  CHECK(rep.max_rel_err < 1e-6);
  for (const char* name : {"fh", "fo", "fu", "w", "gz"}) {
    bool nonzero = false;
    for (double v : ps.find(name)->grad.data)
      if (v != 0.0) nonzero = true;
    CHECK_MESSAGE(nonzero, name);
  }
}
