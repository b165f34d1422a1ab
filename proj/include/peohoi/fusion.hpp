#pragma once

#include "peohoi/dataset.hpp"
#include "peohoi/graph.hpp"

namespace peohoi {

// Pair-feature fusion: a single FC over the concatenation of per-pair inputs.
// The plain path fuses [feat_h, feat_o, feat_u, word, gaze]; the
// prototype-enhanced path replaces the raw union slot with the prototype
// module's output, [feat_h, feat_o, proto, word, gaze]. Concatenation order is
// fixed left-to-right so checkpoints stay portable.
template <typename T>
struct FusionParams {
  Parameter<T>* fc1_W = nullptr;  // (3*d_v + d_w + d_g) -> d_model
  Parameter<T>* fc1_b = nullptr;
  Parameter<T>* fc2_W = nullptr;  // (2*d_v + d_p + d_w + d_g) -> d_model
  Parameter<T>* fc2_b = nullptr;
};

template <typename T>
Val<T> fuse_pairs(Val<T> feat_h, Val<T> feat_o, Val<T> feat_u, Val<T> words, Val<T> gaze,
                  const FusionParams<T>& p) {
  if (!p.fc1_W) throw UsageError("fuse_pairs: plain fusion parameters not allocated");
  Val<T> cat = concat_cols<T>({feat_h, feat_o, feat_u, words, gaze});
  return affine(cat, *p.fc1_W, *p.fc1_b);
}

template <typename T>
Val<T> fuse_pairs_prototype(Val<T> feat_h, Val<T> feat_o, Val<T> proto, Val<T> words, Val<T> gaze,
                            const FusionParams<T>& p) {
  if (!p.fc2_W) throw UsageError("fuse_pairs_prototype: prototype fusion parameters not allocated");
  Val<T> cat = concat_cols<T>({feat_h, feat_o, proto, words, gaze});
  return affine(cat, *p.fc2_W, *p.fc2_b);
}

// single-record convenience used by tests and by per-pair callers
template <typename T>
Val<T> fuse_pair(Graph<T>& g, const PairRecord& rec, const std::vector<float>& word,
                 const FusionParams<T>& p) {
  auto row = [&](const std::vector<float>& v) {
    Tensor<T> t({1, int(v.size())});
    for (size_t i = 0; i < v.size(); ++i) t.data[i] = T(v[i]);
    return g.constant(std::move(t));
  };
  return fuse_pairs(row(rec.feat_h), row(rec.feat_o), row(rec.feat_u), row(word), row(rec.gaze), p);
}

}  // namespace peohoi
