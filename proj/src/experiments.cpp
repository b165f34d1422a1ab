#include "peohoi/experiments.hpp"

namespace peohoi {

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& data, int threads,
                               std::optional<int64_t> rare_threshold, MapAveraging averaging) {
  if (!(ckpt.labels == data.label_space))
    throw ConfigError("evaluate_checkpoint: checkpoint and dataset label spaces differ");
  if (!(ckpt.model_cfg.dims == data.dims))
    throw ConfigError("evaluate_checkpoint: checkpoint and dataset dims differ");
  auto model = model_from_checkpoint(ckpt);
  auto preds = infer_dataset(*model, data, false, threads);
  int64_t thr = rare_threshold.value_or(ckpt.train_cfg.loss.rare_threshold);
  return map_report(preds, data, ckpt.train_freqs, thr, averaging);
}

SweepReport lambda_sweep(const Dataset& train_data, const Dataset& val_data, TrainConfig base,
                         const std::vector<double>& lambdas, const EmbeddingTable& words) {
  if (lambdas.empty()) throw ConfigError("lambda_sweep: need at least one lambda");
  base.model.mode = AblationMode::pen_pwce;
  SweepReport rep;
  for (double lambda : lambdas) {
    TrainConfig cfg = base;
    cfg.loss.lambda = lambda;
    try {
      TrainResult r = train(train_data, val_data, cfg, words);
      if (r.aborted) {
        rep.errors.push_back(strf("lambda=", lambda, ": ", r.abort_reason));
        continue;
      }
      EvalReport e = evaluate_checkpoint(r.checkpoint, val_data);
      rep.rows.push_back({lambda, e.map_full, e.map_non_rare, e.map_rare});
    } catch (const Error& err) {
      rep.errors.push_back(strf("lambda=", lambda, ": ", err.what()));
    }
  }
  if (rep.rows.size() >= 2) {
    std::vector<double> full, non_rare, rare;
    for (const auto& r : rep.rows) {
      full.push_back(r.map_full);
      non_rare.push_back(r.map_non_rare);
      rare.push_back(r.map_rare);
    }
    rep.var_full = sample_variance(full);
    rep.var_non_rare = sample_variance(non_rare);
    rep.var_rare = sample_variance(rare);
  }
  return rep;
}

AblationReport ablation(const Dataset& train_data, const Dataset& val_data, TrainConfig base,
                        const EmbeddingTable& words) {
  AblationReport rep;
  for (AblationMode mode : {AblationMode::baseline, AblationMode::pen, AblationMode::pen_pwce}) {
    TrainConfig cfg = base;
    cfg.model.mode = mode;
    TrainResult r = train(train_data, val_data, cfg, words);
    if (r.aborted) throw NumericError(strf("ablation run '", mode_name(mode), "' aborted: ", r.abort_reason));
    EvalReport e = evaluate_checkpoint(r.checkpoint, val_data);
    AblationRow row;
    row.group = mode_name(mode);
    row.uses_pen = mode != AblationMode::baseline;
    row.uses_pwce = mode == AblationMode::pen_pwce;
    row.map_full = e.map_full;
    row.map_non_rare = e.map_non_rare;
    row.map_rare = e.map_rare;
    rep.rows.push_back(row);
  }
  const AblationRow& base_row = rep.rows[0];
  for (auto& row : rep.rows) {
    row.delta_full = row.map_full - base_row.map_full;
    row.delta_non_rare = row.map_non_rare - base_row.map_non_rare;
    row.delta_rare = row.map_rare - base_row.map_rare;
  }
  return rep;
}

}  // namespace peohoi
