#pragma once

#include "peohoi/dataset.hpp"
#include "peohoi/embeddings.hpp"
#include "peohoi/model.hpp"
#include "peohoi/synth.hpp"

namespace peohoi::testing {

inline PairRecord make_pair(int h_id, int o_id, int category, const Dims& dims, Rng& rng) {
  PairRecord p;
  p.human_track_id = h_id;
  p.object_track_id = o_id;
  p.object_category = category;
  p.human_box = {0.1f, 0.1f, 0.4f, 0.9f};
  p.object_box = {0.5f, 0.3f, 0.7f, 0.5f};
  p.union_box = {0.1f, 0.1f, 0.7f, 0.9f};
  auto fill = [&](std::vector<float>& v, int n) {
    v.resize(n);
    for (auto& x : v) x = float(rng.uniform(-1, 1));
  };
  fill(p.feat_h, dims.d_v);
  fill(p.feat_o, dims.d_v);
  fill(p.feat_u, dims.d_v);
  fill(p.gaze, dims.d_g);
  p.labels_spatial = {int(rng.uniform_int(8))};
  p.labels_action = {int(rng.uniform_int(42))};
  return p;
}

inline FrameRecord make_frame(int index, int pairs, const Dims& dims, Rng& rng, int categories = 3) {
  FrameRecord f;
  f.frame_index = index;
  for (int i = 0; i < pairs; ++i)
    f.pairs.push_back(make_pair(0, i + 1, rng.uniform_int(categories), dims, rng));
  return f;
}

// toy model configuration small enough for 64-bit finite differences
inline ModelConfig toy_config(const Dims& dims, AblationMode mode, int d_model = 16, int heads = 2,
                              int window = 3) {
  ModelConfig cfg;
  cfg.dims = dims;
  cfg.d_model = d_model;
  cfg.heads = heads;
  cfg.window = window;
  cfg.ffn_dim = d_model;
  cfg.mode = mode;
  cfg.resolve();
  return cfg;
}

template <typename T>
Model<T> toy_model(const Dims& dims, AblationMode mode, uint64_t seed = 77, int d_model = 16) {
  LabelSpace ls = default_label_space(3);
  EmbeddingTable words(dims.d_w);
  return Model<T>(toy_config(dims, mode, d_model), ls, words, seed);
}

}  // namespace peohoi::testing
