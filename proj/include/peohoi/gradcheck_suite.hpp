#pragma once

#include "peohoi/gradcheck.hpp"
#include "peohoi/synth.hpp"
#include "peohoi/trainer.hpp"

// Finite-difference verification of every differentiable module at toy
// dimensions, in either precision. Each entry checks the parameters named by
// its prefix filter; the combined entry checks the whole parameter set
// through the full training loss.

namespace peohoi {

struct ModuleCheck {
  std::string name;
  double max_rel_err = 0;
  std::string worst_param;
  int coords = 0;
};

template <typename T>
std::vector<ModuleCheck> run_gradcheck_suite(T eps, int max_coords = 120, uint64_t seed = 4242,
                                             int d_model = 32) {
  SynthConfig sc;
  sc.num_videos = 1;
  sc.test_videos = 1;
  sc.frames_per_video = 4;
  sc.pairs_per_frame = 3;
  sc.num_object_categories = 4;
  sc.dims = {6, 4, 3};
  sc.noise_rate = 0;
  sc.seed = seed;
  SynthOutput data = generate_synthetic(sc);
  const Dataset& ds = data.train;
  const VideoRecord& video = ds.videos[0];
  EmbeddingTable words(sc.dims.d_w);

  ModelConfig base_cfg;
  base_cfg.dims = sc.dims;
  base_cfg.d_model = d_model;
  base_cfg.heads = 2;
  base_cfg.window = 3;
  base_cfg.ffn_dim = d_model;

  auto make_model = [&](AblationMode mode) {
    ModelConfig cfg = base_cfg;
    cfg.mode = mode;
    return Model<T>(cfg, ds.label_space, words, seed_for(seed, "model"));
  };

  FrequencyTable freqs = compute_frequencies(ds);
  LossConfig loss_cfg;
  loss_cfg.rare_threshold = 2;
  loss_cfg.propensity_c = 2.0;  // toy sets are too small for the automatic C
  std::vector<double> class_w = cb_weights(freqs.label_counts, loss_cfg.beta_cb);
  std::vector<double> omega = propensity(freqs, loss_cfg.propensity_c).omega;

  Rng rng(seed_for(seed, "readout"));
  auto readout = [&](int rows, int cols) {
    Tensor<T> t({rows, cols});
    for (auto& v : t.data) v = T(rng.uniform(-1, 1));
    return t;
  };
  const FrameRecord& frame = video.frames[0];
  const int pairs = int(frame.pairs.size());

  // later windows carry history, so prefer the tail of the plan list
  std::vector<WindowPlan> plans = build_windows(video, base_cfg.window, 0);
  size_t take = std::min<size_t>(4, plans.size());
  std::vector<WindowPlan> batch(plans.end() - take, plans.end());

  std::vector<ModuleCheck> checks;
  auto run = [&](const std::string& name, Model<T>& model, auto build,
                 std::vector<std::string> prefixes) {
    auto rep = grad_check<T>(model.params, build, eps, max_coords, seed_for(seed, name), prefixes);
    checks.push_back({name, rep.max_rel_err, rep.worst_param, rep.coords_checked});
  };

  {
    auto model = make_model(AblationMode::baseline);
    Tensor<T> up = readout(pairs, d_model);
    run("fusion", model, [&](Graph<T>& g) {
      FrameOut<T> out = model.frame_forward(g, frame);
      return sum_all(mul(out.fused, g.constant(up)));
    }, {"fusion."});
  }
  {
    auto model = make_model(AblationMode::pen);
    Tensor<T> up = readout(pairs, d_model);
    run("fusion_prototype", model, [&](Graph<T>& g) {
      FrameOut<T> out = model.frame_forward(g, frame);
      return sum_all(mul(out.fused, g.constant(up)));
    }, {"fusion."});
  }
  {
    auto model = make_model(AblationMode::pen);
    Tensor<T> up = readout(pairs, model.cfg.d_p);
    run("prototype_embed", model, [&](Graph<T>& g) {
      FrameOut<T> out = model.frame_forward(g, frame);
      return sum_all(mul(out.proto_feats, g.constant(up)));
    }, {"proto.bank", "proto.sel", "proto.q", "proto.k", "proto.v", "proto.ffn", "proto.ln"});
  }
  {
    auto model = make_model(AblationMode::pen_pwce);
    Tensor<T> targets({pairs, ds.label_space.num_predicates()});
    for (int i = 0; i < pairs; ++i) {
      for (int l : frame.pairs[i].labels_spatial) targets.at(i, l) = T(1);
      for (int l : frame.pairs[i].labels_action)
        targets.at(i, ds.label_space.action_offset() + l) = T(1);
    }
    run("pwce_loss", model, [&](Graph<T>& g) {
      FrameOut<T> out = model.frame_forward(g, frame);
      Val<T> probs = prototype_classify(out.proto_feats, model.proto, false);
      return pwce_loss(probs, targets, omega);
    }, {"proto."});
  }
  {
    auto model = make_model(AblationMode::baseline);
    Tensor<T> up1 = readout(pairs, d_model);
    Tensor<T> up2 = readout(1, d_model);
    run("spatial_encoder", model, [&](Graph<T>& g) {
      FrameOut<T> out = model.frame_forward(g, frame);
      return add(sum_all(mul(out.ho_s, g.constant(up1))),
                 sum_all(mul(out.context, g.constant(up2))));
    }, {"enc.sp.", "enc.tau"});
  }
  {
    auto model = make_model(AblationMode::baseline);
    Tensor<T> up = readout(int(batch.size()), d_model);
    run("temporal_encoder", model, [&](Graph<T>& g) {
      std::map<int, FrameOut<T>> frames;
      std::vector<Val<T>> outs;
      for (const auto& plan : batch) {
        for (const auto& slot : plan.slots)
          if (slot.frame_valid && !frames.count(slot.frame_pos))
            frames.emplace(slot.frame_pos, model.frame_forward(g, video.frames[slot.frame_pos]));
        WindowBatch<T> wb = model.make_window_batch(g, video, plan, frames);
        outs.push_back(temporal_encode(wb, model.enc, model.cfg.pe_base));
      }
      return sum_all(mul(concat_rows(outs), g.constant(up)));
    }, {"enc.tm."});
  }
  {
    auto model = make_model(AblationMode::baseline);
    Tensor<T> up = readout(int(batch.size()), ds.label_space.num_predicates());
    run("heads", model, [&](Graph<T>& g) {
      std::map<int, FrameOut<T>> frames;
      std::vector<Val<T>> rows;
      for (const auto& plan : batch) {
        for (const auto& slot : plan.slots)
          if (slot.frame_valid && !frames.count(slot.frame_pos))
            frames.emplace(slot.frame_pos, model.frame_forward(g, video.frames[slot.frame_pos]));
        rows.push_back(model.window_scores(g, video, plan, frames));
      }
      return sum_all(mul(concat_rows(rows), g.constant(up)));
    }, {"heads."});
  }
  {
    auto model = make_model(AblationMode::baseline);
    run("focal_loss", model, [&](Graph<T>& g) {
      return model.step_loss(g, ds, batch, class_w, omega, loss_cfg).focal;
    }, {"heads."});
  }
  {
    auto model = make_model(AblationMode::pen_pwce);
    run("combined", model, [&](Graph<T>& g) {
      return model.step_loss(g, ds, batch, class_w, omega, loss_cfg).total;
    }, {});
  }
  return checks;
}

}  // namespace peohoi
