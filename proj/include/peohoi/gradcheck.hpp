#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "peohoi/graph.hpp"

namespace peohoi {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_coord = -1;
  int coords_checked = 0;
};

// Central finite differences against the tape's analytic gradients.
//
// `build` must construct the scalar loss on a fresh graph from the current
// parameter values; it is re-invoked with perturbed parameters, so it has to
// be deterministic. Relative error uses an additive floor so coordinates
// where both gradients vanish compare as zero.
template <typename T, typename BuildFn>
GradCheckReport grad_check(ParamSet<T>& params, BuildFn build, T eps,
                           int max_coords_per_param = 200, uint64_t seed = 1234,
                           const std::vector<std::string>& name_prefixes = {}) {
  auto selected = [&](const std::string& name) {
    if (name_prefixes.empty()) return true;
    for (const auto& prefix : name_prefixes)
      if (name.rfind(prefix, 0) == 0) return true;
    return false;
  };
  params.zero_grads();
  std::vector<Tensor<T>> analytic;
  {
    Graph<T> g;
    g.check_finite = true;
    Val<T> loss = build(g);
    if (g.value(loss).numel() != 1) throw UsageError("grad_check: loss must be scalar");
    g.backward(loss);
    for (auto& p : params) analytic.push_back(p.grad);
  }

  auto eval_loss = [&]() -> double {
    Graph<T> g;
    g.check_finite = true;
    Val<T> loss = build(g);
    return double(g.value(loss).data[0]);
  };

  // The additive floor absorbs finite-difference noise on near-zero
  // coordinates; it is anchored to each parameter's own gradient magnitude so
  // a coordinate far below its parameter's scale is judged absolutely.
  const double abs_floor = sizeof(T) == 8 ? 1e-6 : 1e-4;
  Rng rng(seed);
  GradCheckReport rep;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<T>& p = params[pi];
    if (!p.trainable || !selected(p.name)) continue;
    double grad_inf = 0;
    for (T g : analytic[pi].data) grad_inf = std::max(grad_inf, std::abs(double(g)));
    const double floor = std::max(0.01 * grad_inf, abs_floor);
    int n = int(p.value.numel());
    std::vector<int> coords;
    if (n <= max_coords_per_param) {
      coords.resize(n);
      for (int i = 0; i < n; ++i) coords[i] = i;
    } else {
      for (int i = 0; i < max_coords_per_param; ++i) coords.push_back(rng.uniform_int(n));
    }
    for (int c : coords) {
      T saved = p.value.data[c];
      p.value.data[c] = saved + eps;
      double fp = eval_loss();
      p.value.data[c] = saved - eps;
      double fm = eval_loss();
      p.value.data[c] = saved;
      double fd = (fp - fm) / (2.0 * double(eps));
      double an = double(analytic[pi].data[c]);
      double rel = std::abs(fd - an) / (std::abs(fd) + std::abs(an) + floor);
      ++rep.coords_checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = p.name;
        rep.worst_coord = c;
      }
    }
  }
  return rep;
}

}  // namespace peohoi
