#pragma once

#include <optional>

#include "peohoi/dataset.hpp"
#include "peohoi/graph.hpp"

// Prototype embedding of HO-pair union features.
//
// Each pair's union feature is concatenated with a predicate prototype vector
// drawn from a learnable bank (rows initialized from predicate word
// embeddings). The concatenated tokens of one frame pass through a
// residual self-attention block and a small FFN+LN stack, yielding the
// prototype-embedded union feature. An auxiliary classifier over that feature
// is trained with a propensity-weighted cross-entropy so rare predicates pull
// their weight when the union feature space gets organized.

namespace peohoi {

enum class ProtoSelect { mixture, teacher_forced };

inline ProtoSelect parse_proto_select(const std::string& s) {
  if (s == "mixture") return ProtoSelect::mixture;
  if (s == "teacher_forced") return ProtoSelect::teacher_forced;
  throw ConfigError(strf("unknown prototype selection mode '", s, "'"));
}

template <typename T>
struct ProtoParams {
  Parameter<T>* bank = nullptr;   // [num_predicates x d_w]
  Parameter<T>* sel_W = nullptr;  // d_v -> d_w similarity projection
  Parameter<T>* sel_b = nullptr;
  Parameter<T>*fq_W = nullptr, *fq_b = nullptr;  // d_F -> d_F
  Parameter<T>* fk_W = nullptr;                  // no bias: softmax cancels a shared key offset
  Parameter<T>*fv_W = nullptr, *fv_b = nullptr;
  Parameter<T>*ffn1_W = nullptr, *ffn1_b = nullptr;  // d_F -> hidden
  Parameter<T>*ffn2_W = nullptr, *ffn2_b = nullptr;  // hidden -> d_p
  LayerNormParams<T> ln{};
  Parameter<T>*cls_W = nullptr, *cls_b = nullptr;  // d_p -> num_predicates
};

// Prototype vector per pair.
//
// mixture (default, label-free): project the union feature into the
// prototype space, take softmax similarities against the bank rows and blend.
// teacher_forced (training only): average the bank rows of the ground-truth
// predicates; pairs without labels fall back to the mixture rule.
template <typename T>
Val<T> select_prototypes(Val<T> feat_u, const ProtoParams<T>& p, ProtoSelect mode,
                         const std::vector<std::vector<int>>* gt_combined = nullptr) {
  Graph<T>& g = *feat_u.g;
  Val<T> bank = g.param(*p.bank);
  const int d_w = p.bank->value.shape[1];
  Val<T> proj = affine(feat_u, *p.sel_W, *p.sel_b);
  Val<T> sims = scale(matmul_nt(proj, bank), T(1) / std::sqrt(T(d_w)));
  Val<T> mix_weights = softmax_rows(sims);
  Val<T> mixture = matmul(mix_weights, bank);
  if (mode == ProtoSelect::mixture) return mixture;

  if (!gt_combined) throw UsageError("teacher_forced prototype selection needs ground-truth labels");
  const int n = feat_u.g->value(feat_u).rows();
  if (int(gt_combined->size()) != n)
    throw DimError("select_prototypes: label list size does not match pair count");
  std::vector<Val<T>> rows;
  rows.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto& labels = (*gt_combined)[i];
    if (labels.empty()) {
      rows.push_back(slice_rows(mixture, i, 1));
    } else {
      rows.push_back(mean_rows(gather_rows(bank, labels)));
    }
  }
  return n == 1 ? rows[0] : concat_rows(rows);
}

// The frame's pairs are the attention tokens: F = concat(feat_u, s) per pair,
// F' = F + Attention(f_Q F, f_K F, f_V F) scaled by sqrt(d_F), then
// LN(FC(RELU(FC(F')))) gives the prototype-embedded union features.
template <typename T>
Val<T> prototype_embed(Val<T> feat_u, Val<T> prototypes, const ProtoParams<T>& p) {
  Graph<T>& g = *feat_u.g;
  Val<T> f = concat_cols<T>({feat_u, prototypes});
  Val<T> q = affine(f, *p.fq_W, *p.fq_b);
  Val<T> k = matmul(f, g.param(*p.fk_W));
  Val<T> v = affine(f, *p.fv_W, *p.fv_b);
  Val<T> fprime = add(f, attention(q, k, v).out);
  Val<T> h = relu(affine(fprime, *p.ffn1_W, *p.ffn1_b));
  return layer_norm_rows(affine(h, *p.ffn2_W, *p.ffn2_b), *p.ln.gain, *p.ln.bias);
}

// FC -> ReLU -> per-class sigmoid by default; softmax head kept as the
// literal variant behind a flag.
template <typename T>
Val<T> prototype_classify(Val<T> proto_features, const ProtoParams<T>& p, bool softmax_head = false) {
  Val<T> z = relu(affine(proto_features, *p.cls_W, *p.cls_b));
  return softmax_head ? softmax_rows(z) : sigmoid(z);
}

// ---------------------------------------------------------------------------
// Propensity scores. alpha_l = 1 / (1 + C / N_l) with C = log(N) - 1 by
// default (natural log, N = total training pairs); omega_l = 1 / alpha_l.
// Zero-frequency labels are floored to N_l = 1 so the weights stay finite.
// ---------------------------------------------------------------------------

struct PropensityTable {
  double C = 0;
  std::vector<double> alpha;
  std::vector<double> omega;
};

inline PropensityTable propensity(const FrequencyTable& freqs,
                                  std::optional<double> c_override = std::nullopt) {
  PropensityTable t;
  if (c_override) {
    if (*c_override < 0) throw ConfigError("propensity: C override must be >= 0");
    t.C = *c_override;
  } else {
    if (freqs.total_pairs < 3)
      throw ConfigError(
          "propensity: log(N) - 1 <= 0 for this training set; pass an explicit C override");
    t.C = std::log(double(freqs.total_pairs)) - 1.0;
  }
  t.alpha.resize(freqs.label_counts.size());
  t.omega.resize(freqs.label_counts.size());
  for (size_t l = 0; l < freqs.label_counts.size(); ++l) {
    double n = double(std::max<int64_t>(freqs.label_counts[l], 1));
    double omega = 1.0 + t.C / n;
    double alpha = 1.0 / omega;
    t.omega[l] = 1.0 / alpha;  // re-rounded reciprocal pair: omega == 1/alpha bitwise
    t.alpha[l] = alpha;
  }
  return t;
}

// Propensity-weighted binary cross-entropy over multi-label targets:
// L = -(1/B) sum_i sum_l omega_l [y log p + (1-y) log(1-p)], p clamped to
// [1e-7, 1-1e-7].
template <typename T>
Val<T> pwce_loss(Val<T> probs, const Tensor<T>& targets, const std::vector<double>& omega) {
  Graph<T>& g = *probs.g;
  const auto& P = g.value(probs);
  if (!P.same_shape(targets)) throw DimError("pwce_loss: probability/target shape mismatch");
  int batch = P.rows(), labels = P.cols();
  if (int(omega.size()) != labels) throw DimError("pwce_loss: weight vector size mismatch");

  Tensor<T> w({labels});
  for (int l = 0; l < labels; ++l) w.data[l] = T(omega[l]);
  Val<T> y = g.constant(targets);
  Val<T> pc = clamp(probs, T(1e-7), T(1) - T(1e-7));
  Val<T> pos = mul(y, log_elem(pc));
  Val<T> neg = mul(affine_const(y, T(-1), T(1)), log_elem(affine_const(pc, T(-1), T(1))));
  Val<T> weighted = mul_rowvec(add(pos, neg), g.constant(std::move(w)));
  return scale(sum_all(weighted), T(-1) / T(batch));
}

}  // namespace peohoi
