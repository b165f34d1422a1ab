#pragma once

#include <array>

#include "peohoi/dataset.hpp"
#include "peohoi/graph.hpp"

// Spatio-temporal encoders.
//
// Spatial: the frame's fused pair embeddings plus a learnable global token
// pass through residual multi-head self-attention, then
// LN_out(LN_in(x) + FFN(LN_in(x))). The global token's output row is the
// frame context vector c_t.
//
// Temporal: for a tracked pair, its spatial outputs over a causal window of W
// frames (left zero-padded, masked) get an all-sine positional encoding and
// residual masked self-attention with LN. The current-frame token then
// cross-attends into [refined window tokens ; projected context vectors ;
// projected gaze vectors], and the result passes LN_out(LN_in(x) + FFN(x)).

namespace peohoi {

template <typename T>
struct EncoderParams {
  Parameter<T>* global_token = nullptr;  // [d_model]
  MhaParams<T> sp_att;
  LayerNormParams<T> sp_ln_in{};
  Parameter<T>*sp_ffn1_W = nullptr, *sp_ffn1_b = nullptr;
  Parameter<T>*sp_ffn2_W = nullptr, *sp_ffn2_b = nullptr;
  LayerNormParams<T> sp_ln_out{};

  MhaParams<T> tm_att;
  LayerNormParams<T> tm_ln_att{};
  Parameter<T>*c_proj_W = nullptr, *c_proj_b = nullptr;  // d_model -> d_model
  Parameter<T>*g_proj_W = nullptr, *g_proj_b = nullptr;  // d_g -> d_model
  MhaParams<T> cross_att;
  LayerNormParams<T> tm_ln_in{};
  Parameter<T>*tm_ffn1_W = nullptr, *tm_ffn1_b = nullptr;
  Parameter<T>*tm_ffn2_W = nullptr, *tm_ffn2_b = nullptr;
  LayerNormParams<T> tm_ln_out{};

  Parameter<T>*head_sp_W = nullptr, *head_sp_b = nullptr;  // d_model -> |spatial|
  Parameter<T>*head_ac_W = nullptr, *head_ac_b = nullptr;  // d_model -> |action|
};

template <typename T>
struct SpatialOut {
  Val<T> pair_outputs;  // [P x d_model]
  Val<T> context;       // [1 x d_model], the global token's row
};

template <typename T>
SpatialOut<T> spatial_encode(Val<T> pair_embeddings, const EncoderParams<T>& p) {
  Graph<T>& g = *pair_embeddings.g;
  const int pairs = g.value(pair_embeddings).rows();
  if (pairs < 1) throw UsageError("spatial_encode: need at least one pair");
  const int d = g.value(pair_embeddings).cols();
  Val<T> tau = reshape(g.param(*p.global_token), {1, d});
  Val<T> tokens = concat_rows<T>({pair_embeddings, tau});
  Val<T> x = add(tokens, multi_head_attention(tokens, tokens, p.sp_att));
  Val<T> a = layer_norm_rows(x, *p.sp_ln_in.gain, *p.sp_ln_in.bias);
  Val<T> f = affine(relu(affine(a, *p.sp_ffn1_W, *p.sp_ffn1_b)), *p.sp_ffn2_W, *p.sp_ffn2_b);
  Val<T> y = layer_norm_rows(add(a, f), *p.sp_ln_out.gain, *p.sp_ln_out.bias);
  return {slice_rows(y, 0, pairs), slice_rows(y, pairs, 1)};
}

// all-sine positional encoding: PE(pos, i) = sin(pos / base^(i / d_model))
template <typename T>
Tensor<T> positional_encoding(int pos, int d_model, double base = 1000.0) {
  if (pos < 0) throw UsageError("positional_encoding: pos must be >= 0");
  Tensor<T> t({1, d_model});
  for (int i = 0; i < d_model; ++i)
    t.data[i] = T(std::sin(double(pos) / std::pow(base, double(i) / double(d_model))));
  return t;
}

template <typename T>
Tensor<T> positional_encoding_matrix(int length, int d_model, double base = 1000.0) {
  Tensor<T> t({length, d_model});
  for (int pos = 0; pos < length; ++pos) {
    Tensor<T> row = positional_encoding<T>(pos, d_model, base);
    std::copy(row.data.begin(), row.data.end(), t.data.begin() + size_t(pos) * d_model);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Sliding windows. A window covers the W trailing recorded frames of a video
// (current frame last); slots where the tracked pair is absent are invalid
// and later zero-padded.
// ---------------------------------------------------------------------------

struct WindowSlot {
  int frame_pos = -1;  // index into VideoRecord::frames, -1 before video start
  int pair_idx = -1;   // index into FrameRecord::pairs, -1 when the pair is absent
  bool pair_valid = false;
  bool frame_valid = false;  // frame exists and has at least one pair (so c_t exists)
};

struct WindowPlan {
  int video_idx = 0;
  int frame_pos = 0;  // current frame (position within the video's frame list)
  int pair_idx = 0;   // the pair instance being predicted
  std::vector<WindowSlot> slots;  // size W; slot W-1 is the current frame
};

// One window per (pair, frame) instance, matched across frames by
// (human_track_id, object_track_id).
inline std::vector<WindowPlan> build_windows(const VideoRecord& video, int window, int video_idx = 0) {
  if (window < 1) throw ConfigError("build_windows: window length must be >= 1");
  std::vector<WindowPlan> plans;
  const int frames = int(video.frames.size());
  for (int t = 0; t < frames; ++t) {
    const FrameRecord& cur = video.frames[t];
    for (int pi = 0; pi < int(cur.pairs.size()); ++pi) {
      WindowPlan plan;
      plan.video_idx = video_idx;
      plan.frame_pos = t;
      plan.pair_idx = pi;
      plan.slots.resize(window);
      const int h = cur.pairs[pi].human_track_id;
      const int o = cur.pairs[pi].object_track_id;
      for (int k = 0; k < window; ++k) {
        int pos = t - (window - 1) + k;
        WindowSlot& slot = plan.slots[k];
        if (pos < 0) continue;
        slot.frame_pos = pos;
        const FrameRecord& fr = video.frames[pos];
        slot.frame_valid = !fr.pairs.empty();
        for (int j = 0; j < int(fr.pairs.size()); ++j) {
          if (fr.pairs[j].human_track_id == h && fr.pairs[j].object_track_id == o) {
            slot.pair_idx = j;
            slot.pair_valid = true;
            break;
          }
        }
      }
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

// Inputs to the temporal encoder for one window; rows are window slots.
template <typename T>
struct WindowBatch {
  Val<T> tokens;                    // [W x d_model] spatial outputs, zero rows when invalid
  std::vector<uint8_t> token_valid; // size W
  Val<T> contexts;                  // [W x d_model] frame context vectors, zero rows when invalid
  std::vector<uint8_t> context_valid;
  Val<T> gaze;                      // [W x d_g] the pair's gaze per slot, zero when invalid
};

template <typename T>
Val<T> temporal_encode(const WindowBatch<T>& batch, const EncoderParams<T>& p, double pe_base = 1000.0) {
  Graph<T>& g = *batch.tokens.g;
  const auto& tok = g.value(batch.tokens);
  const int W = tok.rows();
  const int d = tok.cols();
  if (int(batch.token_valid.size()) != W || int(batch.context_valid.size()) != W)
    throw DimError("temporal_encode: mask length mismatch");
  if (!batch.token_valid[W - 1])
    throw UsageError("temporal_encode: the current-frame slot must be valid");

  Val<T> x = add(batch.tokens, g.constant(positional_encoding_matrix<T>(W, d, pe_base)));
  std::vector<uint8_t> self_mask(size_t(W) * W);
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j) self_mask[size_t(i) * W + j] = batch.token_valid[j];
  Val<T> att = multi_head_attention(x, x, p.tm_att, &self_mask);
  Val<T> refined = layer_norm_rows(add(x, att), *p.tm_ln_att.gain, *p.tm_ln_att.bias);

  Val<T> query = slice_rows(refined, W - 1, 1);
  Val<T> c_keys = affine(batch.contexts, *p.c_proj_W, *p.c_proj_b);
  Val<T> g_keys = affine(batch.gaze, *p.g_proj_W, *p.g_proj_b);
  Val<T> keys = concat_rows<T>({refined, c_keys, g_keys});
  std::vector<uint8_t> cross_mask(size_t(3) * W);
  for (int j = 0; j < W; ++j) {
    cross_mask[j] = batch.token_valid[j];
    cross_mask[W + j] = batch.context_valid[j];
    cross_mask[2 * W + j] = batch.token_valid[j];
  }
  Val<T> fused = add(query, multi_head_attention(query, keys, p.cross_att, &cross_mask));

  Val<T> a = layer_norm_rows(fused, *p.tm_ln_in.gain, *p.tm_ln_in.bias);
  Val<T> f = affine(relu(affine(fused, *p.tm_ffn1_W, *p.tm_ffn1_b)), *p.tm_ffn2_W, *p.tm_ffn2_b);
  return layer_norm_rows(add(a, f), *p.tm_ln_out.gain, *p.tm_ln_out.bias);
}

// P_t = [sigmoid(f_s(x)) ; sigmoid(f_a(x))]
template <typename T>
struct Predictions {
  Val<T> spatial;   // [n x |spatial|]
  Val<T> action;    // [n x |action|]
  Val<T> combined;  // [n x |spatial| + |action|]
};

template <typename T>
Predictions<T> predict_heads(Val<T> ho_st, const EncoderParams<T>& p) {
  Val<T> sp = sigmoid(affine(ho_st, *p.head_sp_W, *p.head_sp_b));
  Val<T> ac = sigmoid(affine(ho_st, *p.head_ac_W, *p.head_ac_b));
  return {sp, ac, concat_cols<T>({sp, ac})};
}

}  // namespace peohoi
