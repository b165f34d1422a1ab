#include "peohoi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace peohoi {

double average_precision(const std::vector<double>& scores, const std::vector<uint8_t>& positive) {
  if (scores.size() != positive.size()) throw DimError("average_precision: size mismatch");
  int64_t num_pos = std::count(positive.begin(), positive.end(), uint8_t(1));
  if (num_pos == 0) throw UsageError("average_precision: no positives");

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  // precision at each positive rank, then the running max from the right is
  // the interpolated envelope; each positive contributes (1/P) * envelope
  std::vector<double> prec_at_pos;
  prec_at_pos.reserve(num_pos);
  int64_t tp = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    if (positive[order[k]]) {
      ++tp;
      prec_at_pos.push_back(double(tp) / double(k + 1));
    }
  }
  double ap = 0, env = 0;
  for (auto it = prec_at_pos.rbegin(); it != prec_at_pos.rend(); ++it) {
    env = std::max(env, *it);
    ap += env;
  }
  return ap / double(num_pos);
}

namespace {

struct Instance {
  double score = 0;
  uint8_t positive = 0;
};

}  // namespace

EvalReport map_report(const std::vector<PairScores>& predictions, const Dataset& data,
                      const FrequencyTable& train_freqs, int64_t rare_threshold,
                      MapAveraging averaging) {
  if (int(train_freqs.label_counts.size()) != data.label_space.num_predicates())
    throw ConfigError("map_report: frequency table does not match the dataset label space");
  const int num_pred = data.label_space.num_predicates();
  const int off = data.label_space.action_offset();

  // collect candidate lists per evaluated class, in deterministic prediction order
  std::map<TripletKey, std::vector<Instance>> lists;
  std::map<TripletKey, int64_t> positives;
  for (const PairScores& ps : predictions) {
    if (ps.video_idx < 0 || ps.video_idx >= int(data.videos.size()))
      throw DimError("map_report: prediction references an unknown video");
    const VideoRecord& video = data.videos[ps.video_idx];
    const PairRecord& rec = video.frames[ps.frame_pos].pairs[ps.pair_idx];
    if (int(ps.scores.size()) != num_pred)
      throw DimError("map_report: score vector length does not match the label space");
    std::vector<uint8_t> is_pos(num_pred, 0);
    for (int l : rec.labels_spatial) is_pos[l] = 1;
    for (int l : rec.labels_action) is_pos[off + l] = 1;
    for (int l = 0; l < num_pred; ++l) {
      TripletKey key = averaging == MapAveraging::triplet ? TripletKey{rec.object_category, l}
                                                          : TripletKey{-1, l};
      lists[key].push_back({double(ps.scores[l]), is_pos[l]});
      if (is_pos[l]) ++positives[key];
    }
  }

  EvalReport rep;
  rep.rare_threshold = rare_threshold;
  rep.averaging = averaging;
  double sum_full = 0, sum_rare = 0, sum_non_rare = 0;
  for (auto& [key, list] : lists) {
    auto pit = positives.find(key);
    if (pit == positives.end() || pit->second == 0) continue;  // no test positives
    std::vector<double> scores(list.size());
    std::vector<uint8_t> pos(list.size());
    for (size_t i = 0; i < list.size(); ++i) {
      scores[i] = list[i].score;
      pos[i] = list[i].positive;
    }
    double ap = average_precision(scores, pos);
    rep.ap[key] = ap;
    rep.positives[key] = pit->second;

    int64_t train_count = averaging == MapAveraging::triplet
                              ? train_freqs.triplet_count(key)
                              : train_freqs.label_count(key.second);
    sum_full += ap;
    ++rep.classes_full;
    if (train_count < rare_threshold) {
      sum_rare += ap;
      ++rep.classes_rare;
    } else {
      sum_non_rare += ap;
      ++rep.classes_non_rare;
    }
  }
  if (rep.classes_full > 0) rep.map_full = sum_full / double(rep.classes_full);
  if (rep.classes_rare > 0) rep.map_rare = sum_rare / double(rep.classes_rare);
  if (rep.classes_non_rare > 0) rep.map_non_rare = sum_non_rare / double(rep.classes_non_rare);
  return rep;
}

double sample_variance(const std::vector<double>& values) {
  if (values.size() < 2) throw UsageError("sample_variance: need at least two values");
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / double(values.size() - 1);
}

SilhouetteResult silhouette(const std::vector<std::vector<float>>& features,
                            const std::vector<int>& class_labels, int min_count) {
  if (features.size() != class_labels.size()) throw DimError("silhouette: size mismatch");
  SilhouetteResult res;

  std::map<int, int> counts;
  for (int c : class_labels) ++counts[c];
  std::map<int, int> keep;  // class -> dense index
  for (auto& [c, n] : counts)
    if (n >= std::max(min_count, 2)) keep.emplace(c, int(keep.size()));
  if (keep.size() < 2) return res;  // not computable

  std::vector<const std::vector<float>*> pts;
  std::vector<int> cls;
  for (size_t i = 0; i < features.size(); ++i) {
    auto it = keep.find(class_labels[i]);
    if (it == keep.end()) continue;
    pts.push_back(&features[i]);
    cls.push_back(it->second);
  }
  const int n = int(pts.size());
  const int k = int(keep.size());
  std::vector<int64_t> class_size(k, 0);
  for (int c : cls) ++class_size[c];

  auto dist = [](const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0;
    for (size_t j = 0; j < a.size(); ++j) {
      double d = double(a[j]) - double(b[j]);
      s += d * d;
    }
    return std::sqrt(s);
  };

  double total = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> sum_to_class(k, 0.0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      sum_to_class[cls[j]] += dist(*pts[i], *pts[j]);
    }
    double a = class_size[cls[i]] > 1 ? sum_to_class[cls[i]] / double(class_size[cls[i]] - 1) : 0.0;
    double b = std::numeric_limits<double>::max();
    for (int c = 0; c < k; ++c) {
      if (c == cls[i] || class_size[c] == 0) continue;
      b = std::min(b, sum_to_class[c] / double(class_size[c]));
    }
    double denom = std::max(a, b);
    total += denom > 0 ? (b - a) / denom : 0.0;
  }
  res.computable = true;
  res.score = total / double(n);
  res.classes = k;
  res.samples = n;
  return res;
}

SeparabilityReport separability_report(const Dataset& data, const std::vector<PairScores>& predictions,
                                       int min_count) {
  SeparabilityReport rep;
  rep.min_count = min_count;
  std::vector<std::vector<float>> raw_feats, proto_feats;
  std::vector<int> raw_cls, proto_cls;
  const int off = data.label_space.action_offset();
  for (const PairScores& ps : predictions) {
    const PairRecord& rec = data.videos[ps.video_idx].frames[ps.frame_pos].pairs[ps.pair_idx];
    if (rec.labels_action.size() != 1) continue;  // ambiguous instances are dropped
    int cls = off + rec.labels_action[0];
    ++rep.class_counts[cls];
    raw_feats.push_back(rec.feat_u);
    raw_cls.push_back(cls);
    if (!ps.proto_feat.empty()) {
      proto_feats.push_back(ps.proto_feat);
      proto_cls.push_back(cls);
    }
  }
  rep.raw = silhouette(raw_feats, raw_cls, min_count);
  if (!proto_feats.empty()) rep.proto = silhouette(proto_feats, proto_cls, min_count);
  return rep;
}

}  // namespace peohoi
