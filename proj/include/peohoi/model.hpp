#pragma once

#include <map>
#include <optional>
#include <string>

#include "peohoi/embeddings.hpp"
#include "peohoi/encoder.hpp"
#include "peohoi/fusion.hpp"
#include "peohoi/objective.hpp"
#include "peohoi/proto.hpp"

namespace peohoi {

enum class AblationMode { baseline, pen, pen_pwce };

inline AblationMode parse_mode(const std::string& s) {
  if (s == "baseline") return AblationMode::baseline;
  if (s == "pen") return AblationMode::pen;
  if (s == "pen_pwce") return AblationMode::pen_pwce;
  throw ConfigError(strf("unknown ablation mode '", s, "' (want baseline|pen|pen_pwce)"));
}

inline std::string mode_name(AblationMode m) {
  switch (m) {
    case AblationMode::baseline: return "baseline";
    case AblationMode::pen: return "pen";
    default: return "pen_pwce";
  }
}

struct ModelConfig {
  Dims dims;            // d_v / d_w / d_g, from the dataset header
  int d_model = 256;
  int heads = 8;
  int window = 5;
  double pe_base = 1000.0;
  int d_p = 0;           // prototype output dim; 0 -> d_v
  int proto_hidden = 0;  // prototype FFN hidden dim; 0 -> d_v + d_w
  int ffn_dim = 0;       // encoder FFN hidden dim; 0 -> 2 * d_model
  AblationMode mode = AblationMode::pen_pwce;
  ProtoSelect proto_select = ProtoSelect::mixture;  // training-time selection rule
  bool proto_softmax_head = false;

  void resolve() {
    if (d_p <= 0) d_p = dims.d_v;
    if (proto_hidden <= 0) proto_hidden = dims.d_v + dims.d_w;
    if (ffn_dim <= 0) ffn_dim = 2 * d_model;
  }
  void validate() const {
    if (d_model < 1 || heads < 1 || window < 1) throw ConfigError("model dims must be positive");
    if (d_model % heads != 0)
      throw ConfigError(strf("d_model=", d_model, " not divisible by heads=", heads));
    if (pe_base <= 1.0) throw ConfigError("pe_base must be > 1");
  }
  bool uses_proto() const { return mode != AblationMode::baseline; }
};

template <typename T>
struct FrameOut {
  Val<T> feat_u;       // [P x d_v] raw union features
  Val<T> proto_feats;  // [P x d_p] (proto modes only)
  Val<T> fused;        // [P x d_model]
  Val<T> ho_s;         // [P x d_model]
  Val<T> context;      // [1 x d_model]
};

template <typename T>
struct StepLoss {
  Val<T> total;
  Val<T> focal;
  Val<T> pwce;  // zero leaf outside pen_pwce mode
};

// The full relation head: fusion, prototype module, spatio-temporal encoders
// and prediction heads, owning every learnable tensor.
template <typename T>
class Model {
 public:
  ModelConfig cfg;
  LabelSpace labels;
  ParamSet<T> params;

  FusionParams<T> fusion;
  ProtoParams<T> proto;
  EncoderParams<T> enc;
  Parameter<T>* object_words = nullptr;  // frozen [num_objects x d_w] buffer

  // Test hook: routes the raw union feature straight through in place of the
  // prototype module's output (requires d_p == d_v).
  bool test_proto_passthrough = false;

  Model(ModelConfig config, LabelSpace label_space, const EmbeddingTable& words, uint64_t seed)
      : cfg(std::move(config)), labels(std::move(label_space)) {
    cfg.resolve();
    cfg.validate();
    labels.validate();
    if (words.dim() != cfg.dims.d_w)
      throw ConfigError(strf("embedding dim ", words.dim(), " != d_w ", cfg.dims.d_w));
    Rng rng(seed_for(seed, "init"));
    const int d_v = cfg.dims.d_v, d_w = cfg.dims.d_w, d_g = cfg.dims.d_g;
    const int d_model = cfg.d_model;
    const int num_pred = labels.num_predicates();

    {
      Tensor<T> ow({labels.num_objects(), d_w});
      for (int o = 0; o < labels.num_objects(); ++o) {
        auto v = words.lookup(labels.object_categories[o]);
        for (int j = 0; j < d_w; ++j) ow.at(o, j) = T(v[j]);
      }
      object_words = &params.add("embed.object_words", std::move(ow), /*trainable=*/false);
    }

    if (cfg.mode == AblationMode::baseline) {
      fusion.fc1_W = &add_weight(params, "fusion.fc1.W", 3 * d_v + d_w + d_g, d_model, rng);
      fusion.fc1_b = &add_bias(params, "fusion.fc1.b", d_model);
    } else {
      fusion.fc2_W = &add_weight(params, "fusion.fc2.W", 2 * d_v + cfg.d_p + d_w + d_g, d_model, rng);
      fusion.fc2_b = &add_bias(params, "fusion.fc2.b", d_model);
    }

    if (cfg.uses_proto()) {
      Tensor<T> bank({num_pred, d_w});
      for (int l = 0; l < num_pred; ++l) {
        auto v = words.lookup(labels.predicate_name(l));
        for (int j = 0; j < d_w; ++j) bank.at(l, j) = T(v[j]);
      }
      proto.bank = &params.add("proto.bank", std::move(bank));
      proto.sel_W = &add_weight(params, "proto.sel.W", d_v, d_w, rng);
      proto.sel_b = &add_bias(params, "proto.sel.b", d_w);
      const int d_f = d_v + d_w;
      proto.fq_W = &add_weight(params, "proto.q.W", d_f, d_f, rng);
      proto.fq_b = &add_bias(params, "proto.q.b", d_f);
      proto.fk_W = &add_weight(params, "proto.k.W", d_f, d_f, rng);
      proto.fv_W = &add_weight(params, "proto.v.W", d_f, d_f, rng);
      proto.fv_b = &add_bias(params, "proto.v.b", d_f);
      proto.ffn1_W = &add_weight(params, "proto.ffn1.W", d_f, cfg.proto_hidden, rng);
      proto.ffn1_b = &add_bias(params, "proto.ffn1.b", cfg.proto_hidden);
      proto.ffn2_W = &add_weight(params, "proto.ffn2.W", cfg.proto_hidden, cfg.d_p, rng);
      proto.ffn2_b = &add_bias(params, "proto.ffn2.b", cfg.d_p);
      proto.ln = make_layer_norm(params, "proto.ln", cfg.d_p);
      proto.cls_W = &add_weight(params, "proto.cls.W", cfg.d_p, num_pred, rng);
      proto.cls_b = &add_bias(params, "proto.cls.b", num_pred);
    }

    enc.global_token = &params.add("enc.tau", init_uniform<T>({d_model}, d_model, rng));
    enc.sp_att = make_mha_params(params, "enc.sp.att", d_model, cfg.heads, rng);
    enc.sp_ln_in = make_layer_norm(params, "enc.sp.ln_in", d_model);
    enc.sp_ffn1_W = &add_weight(params, "enc.sp.ffn1.W", d_model, cfg.ffn_dim, rng);
    enc.sp_ffn1_b = &add_bias(params, "enc.sp.ffn1.b", cfg.ffn_dim);
    enc.sp_ffn2_W = &add_weight(params, "enc.sp.ffn2.W", cfg.ffn_dim, d_model, rng);
    enc.sp_ffn2_b = &add_bias(params, "enc.sp.ffn2.b", d_model);
    enc.sp_ln_out = make_layer_norm(params, "enc.sp.ln_out", d_model);

    enc.tm_att = make_mha_params(params, "enc.tm.att", d_model, cfg.heads, rng);
    enc.tm_ln_att = make_layer_norm(params, "enc.tm.ln_att", d_model);
    enc.c_proj_W = &add_weight(params, "enc.tm.cproj.W", d_model, d_model, rng);
    enc.c_proj_b = &add_bias(params, "enc.tm.cproj.b", d_model);
    enc.g_proj_W = &add_weight(params, "enc.tm.gproj.W", d_g, d_model, rng);
    enc.g_proj_b = &add_bias(params, "enc.tm.gproj.b", d_model);
    enc.cross_att = make_mha_params(params, "enc.tm.cross", d_model, cfg.heads, rng);
    enc.tm_ln_in = make_layer_norm(params, "enc.tm.ln_in", d_model);
    enc.tm_ffn1_W = &add_weight(params, "enc.tm.ffn1.W", d_model, cfg.ffn_dim, rng);
    enc.tm_ffn1_b = &add_bias(params, "enc.tm.ffn1.b", cfg.ffn_dim);
    enc.tm_ffn2_W = &add_weight(params, "enc.tm.ffn2.W", cfg.ffn_dim, d_model, rng);
    enc.tm_ffn2_b = &add_bias(params, "enc.tm.ffn2.b", d_model);
    enc.tm_ln_out = make_layer_norm(params, "enc.tm.ln_out", d_model);

    enc.head_sp_W = &add_weight(params, "heads.spatial.W", d_model, labels.num_spatial(), rng);
    enc.head_sp_b = &add_bias(params, "heads.spatial.b", labels.num_spatial());
    enc.head_ac_W = &add_weight(params, "heads.action.W", d_model, labels.num_action(), rng);
    enc.head_ac_b = &add_bias(params, "heads.action.b", labels.num_action());
  }

  // combined multi-label target row for one pair
  Tensor<T> target_row(const PairRecord& p) const {
    Tensor<T> y({1, labels.num_predicates()});
    for (int l : p.labels_spatial) y.data[l] = T(1);
    for (int l : p.labels_action) y.data[labels.action_offset() + l] = T(1);
    return y;
  }

  std::vector<std::vector<int>> combined_labels(const FrameRecord& frame) const {
    std::vector<std::vector<int>> out;
    out.reserve(frame.pairs.size());
    for (const auto& p : frame.pairs) {
      std::vector<int> ls(p.labels_spatial);
      for (int l : p.labels_action) ls.push_back(labels.action_offset() + l);
      out.push_back(std::move(ls));
    }
    return out;
  }

  // fusion -> prototype module -> spatial encoder for one frame
  FrameOut<T> frame_forward(Graph<T>& g, const FrameRecord& frame, bool teacher_forced = false) {
    const int pairs = int(frame.pairs.size());
    if (pairs < 1) throw UsageError("frame_forward: frame has no pairs");
    const int d_v = cfg.dims.d_v, d_g = cfg.dims.d_g;

    Tensor<T> fh({pairs, d_v}), fo({pairs, d_v}), fu({pairs, d_v}), gz({pairs, d_g});
    std::vector<int> categories(pairs);
    for (int i = 0; i < pairs; ++i) {
      const PairRecord& p = frame.pairs[i];
      for (int j = 0; j < d_v; ++j) {
        fh.at(i, j) = T(p.feat_h[j]);
        fo.at(i, j) = T(p.feat_o[j]);
        fu.at(i, j) = T(p.feat_u[j]);
      }
      for (int j = 0; j < d_g; ++j) gz.at(i, j) = T(p.gaze[j]);
      categories[i] = p.object_category;
    }
    FrameOut<T> out;
    Val<T> feat_h = g.constant(std::move(fh));
    Val<T> feat_o = g.constant(std::move(fo));
    out.feat_u = g.constant(std::move(fu));
    Val<T> gaze = g.constant(std::move(gz));
    Val<T> words = gather_rows(g.param(*object_words), categories);

    if (cfg.uses_proto()) {
      if (test_proto_passthrough) {
        if (cfg.d_p != cfg.dims.d_v)
          throw UsageError("proto passthrough requires d_p == d_v");
        out.proto_feats = out.feat_u;
      } else {
        std::optional<std::vector<std::vector<int>>> gt;
        if (teacher_forced && cfg.proto_select == ProtoSelect::teacher_forced)
          gt = combined_labels(frame);
        Val<T> s = select_prototypes(out.feat_u, proto,
                                     gt ? ProtoSelect::teacher_forced : ProtoSelect::mixture,
                                     gt ? &*gt : nullptr);
        out.proto_feats = prototype_embed(out.feat_u, s, proto);
      }
      out.fused = fuse_pairs_prototype(feat_h, feat_o, out.proto_feats, words, gaze, fusion);
    } else {
      out.fused = fuse_pairs(feat_h, feat_o, out.feat_u, words, gaze, fusion);
    }
    SpatialOut<T> sp = spatial_encode(out.fused, enc);
    out.ho_s = sp.pair_outputs;
    out.context = sp.context;
    return out;
  }

  // assembles the temporal-encoder inputs for one window from cached frames
  WindowBatch<T> make_window_batch(Graph<T>& g, const VideoRecord& video, const WindowPlan& plan,
                                   const std::map<int, FrameOut<T>>& frames) {
    const int W = int(plan.slots.size());
    const int d_model = cfg.d_model, d_g = cfg.dims.d_g;
    WindowBatch<T> batch;
    batch.token_valid.resize(W);
    batch.context_valid.resize(W);

    std::vector<Val<T>> token_rows(W), ctx_rows(W);
    Tensor<T> gaze({W, d_g});
    Val<T> zero_row = g.constant(Tensor<T>::zeros({1, d_model}));
    for (int k = 0; k < W; ++k) {
      const WindowSlot& slot = plan.slots[k];
      batch.token_valid[k] = slot.pair_valid;
      batch.context_valid[k] = slot.frame_valid;
      if (slot.frame_valid) {
        const FrameOut<T>& fo = frames.at(slot.frame_pos);
        ctx_rows[k] = fo.context;
        if (slot.pair_valid) {
          token_rows[k] = slice_rows(fo.ho_s, slot.pair_idx, 1);
          const auto& gvec = video.frames[slot.frame_pos].pairs[slot.pair_idx].gaze;
          for (int j = 0; j < d_g; ++j) gaze.at(k, j) = T(gvec[j]);
        } else {
          token_rows[k] = zero_row;
        }
      } else {
        token_rows[k] = zero_row;
        ctx_rows[k] = zero_row;
      }
    }
    batch.tokens = concat_rows(token_rows);
    batch.contexts = concat_rows(ctx_rows);
    batch.gaze = g.constant(std::move(gaze));
    return batch;
  }

  // one window -> P_t row [1 x num_predicates]
  Val<T> window_scores(Graph<T>& g, const VideoRecord& video, const WindowPlan& plan,
                       const std::map<int, FrameOut<T>>& frames) {
    WindowBatch<T> batch = make_window_batch(g, video, plan, frames);
    Val<T> ho_st = temporal_encode(batch, enc, cfg.pe_base);
    return predict_heads(ho_st, enc).combined;
  }

  // Forward pass for one training step over a batch of windows. Frames are
  // computed once per step and shared between the windows that touch them.
  StepLoss<T> step_loss(Graph<T>& g, const Dataset& data, const std::vector<WindowPlan>& batch,
                        const std::vector<double>& class_weights, const std::vector<double>& omega,
                        const LossConfig& loss_cfg) {
    if (batch.empty()) throw UsageError("step_loss: empty batch");
    const bool teacher = cfg.proto_select == ProtoSelect::teacher_forced;

    // frame cache per video: (video_idx, frame_pos) -> FrameOut
    std::map<std::pair<int, int>, FrameOut<T>> cache;
    auto frame_out = [&](int vi, int pos) -> FrameOut<T>& {
      auto key = std::make_pair(vi, pos);
      auto it = cache.find(key);
      if (it == cache.end())
        it = cache.emplace(key, frame_forward(g, data.videos[vi].frames[pos], teacher)).first;
      return it->second;
    };

    std::vector<Val<T>> score_rows, proto_prob_rows;
    Tensor<T> targets({int(batch.size()), labels.num_predicates()});
    int row = 0;
    for (const WindowPlan& plan : batch) {
      const VideoRecord& video = data.videos[plan.video_idx];
      std::map<int, FrameOut<T>> frames;
      for (const WindowSlot& slot : plan.slots)
        if (slot.frame_valid) frames.emplace(slot.frame_pos, frame_out(plan.video_idx, slot.frame_pos));
      score_rows.push_back(window_scores(g, video, plan, frames));

      const PairRecord& rec = video.frames[plan.frame_pos].pairs[plan.pair_idx];
      Tensor<T> y = target_row(rec);
      std::copy(y.data.begin(), y.data.end(),
                targets.data.begin() + size_t(row) * labels.num_predicates());
      ++row;

      if (cfg.mode == AblationMode::pen_pwce) {
        const FrameOut<T>& fo = frames.at(plan.frame_pos);
        Val<T> probs = prototype_classify(fo.proto_feats, proto, cfg.proto_softmax_head);
        proto_prob_rows.push_back(slice_rows(probs, plan.pair_idx, 1));
      }
    }

    StepLoss<T> out;
    Val<T> scores = concat_rows(score_rows);
    out.focal = cb_focal_loss(scores, targets, class_weights, loss_cfg.effective_gamma());
    if (cfg.mode == AblationMode::pen_pwce) {
      Val<T> probs = concat_rows(proto_prob_rows);
      out.pwce = pwce_loss(probs, targets, omega);
      out.total = total_loss(out.focal, out.pwce, loss_cfg.lambda);
    } else {
      out.pwce = g.constant(Tensor<T>::zeros({1}));
      out.total = out.focal;
    }
    return out;
  }
};

// Per-pair inference output for evaluation and the separability study.
struct PairScores {
  int video_idx = 0;
  int frame_pos = 0;
  int pair_idx = 0;
  std::vector<float> scores;      // [num_predicates]
  std::vector<float> proto_feat;  // filled when requested and available
};

// Pure inference over a whole dataset (mixture prototype selection, no
// labels). Windows follow the model's configured length.
template <typename T>
std::vector<PairScores> infer_video(Model<T>& model, const Dataset& data, int video_idx,
                                    bool want_proto_features) {
  const VideoRecord& video = data.videos[video_idx];
  std::vector<PairScores> out;
  Graph<T> g;
  std::map<int, FrameOut<T>> frames;
  for (int pos = 0; pos < int(video.frames.size()); ++pos)
    if (!video.frames[pos].pairs.empty())
      frames.emplace(pos, model.frame_forward(g, video.frames[pos], /*teacher_forced=*/false));

  for (const WindowPlan& plan : build_windows(video, model.cfg.window, video_idx)) {
    Val<T> scores = model.window_scores(g, video, plan, frames);
    PairScores ps;
    ps.video_idx = video_idx;
    ps.frame_pos = plan.frame_pos;
    ps.pair_idx = plan.pair_idx;
    const auto& s = g.value(scores);
    ps.scores.assign(s.data.size(), 0.f);
    for (size_t i = 0; i < s.data.size(); ++i) ps.scores[i] = float(s.data[i]);
    if (want_proto_features && model.cfg.uses_proto()) {
      const FrameOut<T>& fo = frames.at(plan.frame_pos);
      const auto& pf = g.value(fo.proto_feats);
      int d_p = pf.cols();
      ps.proto_feat.resize(d_p);
      for (int j = 0; j < d_p; ++j) ps.proto_feat[j] = float(pf.at(plan.pair_idx, j));
    }
    out.push_back(std::move(ps));
  }
  return out;
}

}  // namespace peohoi
