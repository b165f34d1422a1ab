#pragma once

#include <optional>

#include "peohoi/trainer.hpp"

namespace peohoi {

struct SweepRow {
  double lambda = 0;
  double map_full = 0, map_non_rare = 0, map_rare = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  // sample variance per column; absent with fewer than two completed rows
  std::optional<double> var_full, var_non_rare, var_rare;
  std::vector<std::string> errors;  // per-lambda failures; the report stays partial
};

// Trains once per lambda with a shared seed (pen_pwce wiring) and evaluates
// on the validation set.
SweepReport lambda_sweep(const Dataset& train_data, const Dataset& val_data, TrainConfig base,
                         const std::vector<double>& lambdas, const EmbeddingTable& words);

struct AblationRow {
  std::string group;  // baseline | pen | pen_pwce
  bool uses_pen = false;
  bool uses_pwce = false;
  double map_full = 0, map_non_rare = 0, map_rare = 0;
  double delta_full = 0, delta_non_rare = 0, delta_rare = 0;  // vs the baseline row
};

struct AblationReport {
  std::vector<AblationRow> rows;  // exactly three, in wiring order
};

// Baseline / prototype module / prototype + PWCE, all from one seed.
AblationReport ablation(const Dataset& train_data, const Dataset& val_data, TrainConfig base,
                        const EmbeddingTable& words);

// shared by the harnesses and the eval subcommand
EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& data, int threads = 1,
                               std::optional<int64_t> rare_threshold = std::nullopt,
                               MapAveraging averaging = MapAveraging::triplet);

}  // namespace peohoi
