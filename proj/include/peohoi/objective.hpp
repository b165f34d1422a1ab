#pragma once

#include <optional>

#include "peohoi/graph.hpp"

namespace peohoi {

// Loss hyperparameters. The class-balance base and the focusing exponent are
// separate knobs (beta_cb, gamma); paper_literal ties gamma to beta_cb.
struct LossConfig {
  double beta_cb = 0.999;  // class-balance base, in [0, 1)
  double gamma = 2.0;      // focusing exponent, >= 0
  double lambda = 0.8;     // weight of the propensity-weighted term
  int64_t rare_threshold = 25;
  std::optional<double> propensity_c;  // override for the propensity coefficient
  bool paper_literal = false;

  void validate() const {
    if (beta_cb < 0 || beta_cb >= 1) throw ConfigError("loss.beta_cb must be in [0,1)");
    if (gamma < 0) throw ConfigError("loss.gamma must be >= 0");
    if (lambda < 0) throw ConfigError("loss.lambda must be >= 0");
    if (rare_threshold < 1) throw ConfigError("rare threshold must be >= 1");
  }
  double effective_gamma() const { return paper_literal ? beta_cb : gamma; }
};

// effective-sample-number weight: CB(n) = (1 - beta) / (1 - beta^n); CB(1) = 1
inline double cb_weight(int64_t n, double beta_cb) {
  int64_t nf = std::max<int64_t>(n, 1);
  if (beta_cb == 0.0) return 1.0;
  return (1.0 - beta_cb) / (1.0 - std::pow(beta_cb, double(nf)));
}

inline std::vector<double> cb_weights(const std::vector<int64_t>& class_counts, double beta_cb) {
  std::vector<double> w(class_counts.size());
  for (size_t i = 0; i < class_counts.size(); ++i) w[i] = cb_weight(class_counts[i], beta_cb);
  return w;
}

// Class-balanced focal loss, applied per label over multi-label targets:
// p_t = y p + (1-y)(1-p);  L = -(1/B) sum_i sum_l CB(n_l) (1-p_t)^gamma log(p_t)
template <typename T>
Val<T> cb_focal_loss(Val<T> probs, const Tensor<T>& targets, const std::vector<double>& class_weights,
                     double gamma) {
  Graph<T>& g = *probs.g;
  const auto& P = g.value(probs);
  if (!P.same_shape(targets)) throw DimError("cb_focal_loss: probability/target shape mismatch");
  int batch = P.rows(), labels = P.cols();
  if (int(class_weights.size()) != labels) throw DimError("cb_focal_loss: class weight size mismatch");

  Tensor<T> w({labels});
  for (int l = 0; l < labels; ++l) w.data[l] = T(class_weights[l]);
  Val<T> y = g.constant(targets);
  Val<T> pc = clamp(probs, T(1e-7), T(1) - T(1e-7));
  // p_t = y*p + (1-y)*(1-p)
  Val<T> pt = add(mul(y, pc), mul(affine_const(y, T(-1), T(1)), affine_const(pc, T(-1), T(1))));
  Val<T> focal = mul(pow_const(affine_const(pt, T(-1), T(1)), T(gamma)), log_elem(pt));
  Val<T> weighted = mul_rowvec(focal, g.constant(std::move(w)));
  return scale(sum_all(weighted), T(-1) / T(batch));
}

// L = L_focal + lambda * L_PWCE
template <typename T>
Val<T> total_loss(Val<T> l_focal, Val<T> l_pwce, double lambda) {
  return add(l_focal, scale(l_pwce, T(lambda)));
}

}  // namespace peohoi
