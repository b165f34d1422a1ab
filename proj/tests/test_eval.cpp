#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "peohoi/eval.hpp"
#include "peohoi/trainer.hpp"
#include "test_helpers.hpp"

using namespace peohoi;

namespace {

// Independent oracle: walk every recall level reached at some rank and take
// the maximum precision at or beyond it, then sum recall increments. Written
// deliberately as the naive O(n * P) scan.
double brute_force_ap(const std::vector<double>& scores, const std::vector<uint8_t>& positive) {
  const int n = int(scores.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  int total_pos = 0;
  for (uint8_t p : positive) total_pos += p;

  std::vector<double> precision_at_rank(n);
  std::vector<int> tp_at_rank(n);
  int tp = 0;
  for (int k = 0; k < n; ++k) {
    if (positive[order[k]]) ++tp;
    tp_at_rank[k] = tp;
    precision_at_rank[k] = double(tp) / double(k + 1);
  }
  double area = 0;
  for (int level = 1; level <= total_pos; ++level) {
    double best = 0;
    for (int k = 0; k < n; ++k)
      if (tp_at_rank[k] >= level) best = std::max(best, precision_at_rank[k]);
    area += best / double(total_pos);
  }
  return area;
}

}  // namespace

TEST_CASE("average_precision: perfect ranking, hand case, error cases") {
  CHECK(average_precision({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  // scores [0.9(+), 0.8(-), 0.7(+)] -> 0.5*1 + 0.5*(2/3) = 0.8333
  CHECK(average_precision({0.9, 0.8, 0.7}, {1, 0, 1}) == doctest::Approx(0.833333).epsilon(1e-4));
  CHECK_THROWS_AS(average_precision({0.5, 0.4}, {0, 0}), UsageError);
  CHECK_THROWS_AS(average_precision({0.5}, {0, 1}), DimError);
}

TEST_CASE("average_precision: invariant under strictly increasing score transforms") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 2 + rng.uniform_int(15);
    std::vector<double> scores(n);
    std::vector<uint8_t> pos(n);
    bool any = false;
    for (int i = 0; i < n; ++i) {
      scores[i] = rng.uniform(-2, 2);
      pos[i] = rng.bernoulli(0.4);
      any |= pos[i] == 1;
    }
    if (!any) pos[0] = 1;
    double base = average_precision(scores, pos);
    std::vector<double> warped(n);
    for (int i = 0; i < n; ++i) warped[i] = std::exp(3.0 * scores[i]) + 7.0;
    CHECK(average_precision(warped, pos) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("average_precision: matches the brute-force PR-curve oracle on 1000 random instances") {
  Rng rng(29);
  double max_diff = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 1 + rng.uniform_int(20);
    std::vector<double> scores(n);
    std::vector<uint8_t> pos(n);
    bool any = false;
    for (int i = 0; i < n; ++i) {
      // coarse scores so ties happen often
      scores[i] = std::floor(rng.uniform(0, 6)) / 4.0;
      pos[i] = rng.bernoulli(0.35);
      any |= pos[i] == 1;
    }
    if (!any) pos[rng.uniform_int(n)] = 1;
    double got = average_precision(scores, pos);
    double want = brute_force_ap(scores, pos);
    max_diff = std::max(max_diff, std::abs(got - want));
  }
  CHECK(max_diff <= 1e-12);
}

TEST_CASE("sample_variance: reference columns and the constant case") {
  // hand-checked unbiased variances of the three published mAP columns
  CHECK(sample_variance({44.72, 45.13, 44.63, 44.43}) == doctest::Approx(0.0866917).epsilon(1e-4));
  CHECK(sample_variance({62.48, 62.78, 62.26, 61.90}) == doctest::Approx(0.1374333).epsilon(1e-4));
  CHECK(sample_variance({29.88, 30.37, 29.90, 29.83}) == doctest::Approx(0.0633667).epsilon(1e-4));
  CHECK(sample_variance({3.5, 3.5, 3.5}) == 0.0);
  CHECK_THROWS_AS(sample_variance({1.0}), UsageError);
}

TEST_CASE("map_report: perfect predictions give mAP 1.0 across all splits") {
  SynthConfig sc;
  sc.num_videos = 4;
  sc.test_videos = 2;
  sc.frames_per_video = 6;
  sc.pairs_per_frame = 2;
  sc.num_object_categories = 4;
  sc.dims = {4, 3, 3};
  sc.noise_rate = 0;
  sc.seed = 3;
  auto data = generate_synthetic(sc);
  FrequencyTable freqs = compute_frequencies(data.train);

  // oracle scores: 1 for true labels, 0 elsewhere
  std::vector<PairScores> preds;
  const int off = data.test.label_space.action_offset();
  for (int v = 0; v < int(data.test.videos.size()); ++v) {
    const auto& video = data.test.videos[v];
    for (int f = 0; f < int(video.frames.size()); ++f) {
      for (int p = 0; p < int(video.frames[f].pairs.size()); ++p) {
        PairScores ps;
        ps.video_idx = v;
        ps.frame_pos = f;
        ps.pair_idx = p;
        ps.scores.assign(data.test.label_space.num_predicates(), 0.f);
        for (int l : video.frames[f].pairs[p].labels_spatial) ps.scores[l] = 1.f;
        for (int l : video.frames[f].pairs[p].labels_action) ps.scores[off + l] = 1.f;
        preds.push_back(ps);
      }
    }
  }
  EvalReport rep = map_report(preds, data.test, freqs, 3);
  CHECK(rep.map_full == doctest::Approx(1.0));
  if (rep.classes_rare > 0) CHECK(rep.map_rare == doctest::Approx(1.0));
  if (rep.classes_non_rare > 0) CHECK(rep.map_non_rare == doctest::Approx(1.0));
  CHECK(rep.classes_full == rep.classes_rare + rep.classes_non_rare);
  CHECK(int64_t(rep.ap.size()) == rep.classes_full);

  // deterministic: identical inputs give identical reports
  EvalReport rep2 = map_report(preds, data.test, freqs, 3);
  CHECK(rep.ap == rep2.ap);

  // predicate-level averaging covers at most num_predicates classes
  EvalReport repp = map_report(preds, data.test, freqs, 3, MapAveraging::predicate);
  CHECK(repp.classes_full <= data.test.label_space.num_predicates());
  CHECK(repp.map_full == doctest::Approx(1.0));
}

TEST_CASE("map_report: random scores land near the permutation baseline") {
  SynthConfig sc;
  sc.num_videos = 6;
  sc.test_videos = 4;
  sc.frames_per_video = 8;
  sc.pairs_per_frame = 3;
  sc.num_object_categories = 3;
  sc.dims = {4, 3, 3};
  sc.noise_rate = 0;
  sc.seed = 8;
  auto data = generate_synthetic(sc);
  FrequencyTable freqs = compute_frequencies(data.train);

  auto random_pred = [&](uint64_t seed) {
    Rng rng(seed);
    std::vector<PairScores> preds;
    for (int v = 0; v < int(data.test.videos.size()); ++v) {
      const auto& video = data.test.videos[v];
      for (int f = 0; f < int(video.frames.size()); ++f)
        for (int p = 0; p < int(video.frames[f].pairs.size()); ++p) {
          PairScores ps;
          ps.video_idx = v;
          ps.frame_pos = f;
          ps.pair_idx = p;
          ps.scores.resize(data.test.label_space.num_predicates());
          for (auto& s : ps.scores) s = float(rng.uniform());
          preds.push_back(ps);
        }
    }
    return preds;
  };

  // permutation-baseline oracle: distribution of mAP under random scoring
  std::vector<double> samples;
  for (uint64_t s = 0; s < 120; ++s)
    samples.push_back(map_report(random_pred(1000 + s), data.test, freqs, 3).map_full);
  double mean = 0;
  for (double v : samples) mean += v;
  mean /= double(samples.size());
  double sigma = std::sqrt(sample_variance(samples));

  double got = map_report(random_pred(7777), data.test, freqs, 3).map_full;
  CHECK(std::abs(got - mean) <= 3.0 * sigma);
  // far below the perfect-score ceiling
  CHECK(got < 0.9);
}

TEST_CASE("silhouette: hand oracle on two tight 1-D clusters") {
  std::vector<std::vector<float>> feats = {{0.0f}, {0.1f}, {10.0f}, {10.1f}};
  std::vector<int> labels = {0, 0, 1, 1};
  SilhouetteResult r = silhouette(feats, labels, 1);
  REQUIRE(r.computable);
  CHECK(r.score == doctest::Approx(0.990).epsilon(1e-3));
  CHECK(r.classes == 2);
  CHECK(r.samples == 4);
}

TEST_CASE("silhouette: classes drawn from one distribution score near zero") {
  Rng rng(41);
  std::vector<std::vector<float>> feats;
  std::vector<int> labels;
  for (int i = 0; i < 500; ++i) {
    feats.push_back({float(rng.normal()), float(rng.normal())});
    labels.push_back(i % 2);
  }
  SilhouetteResult r = silhouette(feats, labels, 10);
  REQUIRE(r.computable);
  CHECK(std::abs(r.score) < 0.1);
}

TEST_CASE("silhouette: invariant under global isometry") {
  Rng rng(43);
  std::vector<std::vector<float>> feats;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    int c = i % 3;
    feats.push_back({float(3.0 * c + 0.3 * rng.normal()), float(-2.0 * c + 0.3 * rng.normal())});
    labels.push_back(c);
  }
  SilhouetteResult base = silhouette(feats, labels, 2);
  REQUIRE(base.computable);

  // rotate by a fixed angle and translate
  double ct = std::cos(0.7), st = std::sin(0.7);
  std::vector<std::vector<float>> moved;
  for (auto& f : feats)
    moved.push_back({float(ct * f[0] - st * f[1] + 5.0), float(st * f[0] + ct * f[1] - 11.0)});
  SilhouetteResult rot = silhouette(moved, labels, 2);
  CHECK(rot.score == doctest::Approx(base.score).epsilon(1e-6));
}

TEST_CASE("silhouette: fewer than two surviving classes is not computable") {
  std::vector<std::vector<float>> feats = {{0.f}, {1.f}, {2.f}, {3.f}};
  SilhouetteResult r = silhouette(feats, {0, 0, 0, 1}, 2);
  CHECK(!r.computable);
  SilhouetteResult r2 = silhouette(feats, {0, 0, 1, 1}, 5);
  CHECK(!r2.computable);
}

TEST_CASE("separability_report: wires raw and prototype features with class filtering") {
  SynthConfig sc;
  sc.num_videos = 3;
  sc.test_videos = 2;
  sc.frames_per_video = 6;
  sc.pairs_per_frame = 2;
  sc.num_object_categories = 3;
  sc.dims = {6, 4, 3};
  sc.noise_rate = 0;
  sc.seed = 13;
  auto data = generate_synthetic(sc);
  EmbeddingTable words(4);
  auto model = peohoi::testing::toy_model<float>(sc.dims, AblationMode::pen, 5, 8);
  auto preds = infer_dataset(model, data.test, /*want_proto_features=*/true);
  REQUIRE(!preds.empty());
  REQUIRE(!preds[0].proto_feat.empty());
  SeparabilityReport rep = separability_report(data.test, preds, 2);
  CHECK(rep.min_count == 2);
  if (rep.raw.computable) {
    CHECK(rep.raw.score >= -1.0);
    CHECK(rep.raw.score <= 1.0);
  }
  if (rep.proto.computable) {
    CHECK(rep.proto.samples == rep.raw.samples);
  }
}
