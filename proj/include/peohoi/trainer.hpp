#pragma once

#include <memory>
#include <string>
#include <vector>

#include "peohoi/eval.hpp"
#include "peohoi/model.hpp"

namespace peohoi {

struct OptimizerConfig {
  std::string kind = "adam";  // adam | sgd
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;  // sgd only

  void validate() const {
    if (kind != "adam" && kind != "sgd") throw ConfigError(strf("unknown optimizer '", kind, "'"));
    if (lr <= 0) throw ConfigError("optimizer.lr must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
      throw ConfigError("optimizer moment decays must be in [0,1)");
  }
};

struct TrainConfig {
  uint64_t seed = 1;
  int epochs = 10;
  int batch_size = 8;   // windows per step
  double clip_norm = 5.0;
  int eval_every = 1;   // epochs between validation mAP evaluations; 0 = final epoch only
  OptimizerConfig opt;
  LossConfig loss;
  ModelConfig model;

  void validate() const {
    if (epochs < 1 || batch_size < 1) throw ConfigError("epochs and batch_size must be positive");
    if (clip_norm <= 0) throw ConfigError("clip_norm must be positive");
    if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
    opt.validate();
    loss.validate();
    model.validate();
  }
};

struct StepRecord {
  int step = 0;
  double focal = 0, pwce = 0, total = 0;
  double grad_norm = 0;
};

struct EpochRecord {
  int epoch = 0;
  double val_map_full = 0, val_map_non_rare = 0, val_map_rare = 0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0;  // reported on the console, never serialized
};

// Everything needed to reproduce inference bit-identically.
struct Checkpoint {
  ModelConfig model_cfg;
  LabelSpace labels;
  FrequencyTable train_freqs;
  TrainConfig train_cfg;
  std::vector<std::pair<std::string, Tensor<float>>> params;  // manifest order
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
  bool aborted = false;          // non-finite loss; checkpoint holds the last good state
  std::string abort_reason;
};

// Deterministic mini-batch training over window instances. The three ablation
// wirings: baseline = plain fusion + focal loss; pen = prototype fusion +
// focal loss; pen_pwce = prototype fusion + focal + lambda * PWCE.
TrainResult train(const Dataset& train_data, const Dataset& val_data, TrainConfig cfg,
                  const EmbeddingTable& words);

Checkpoint snapshot_model(const Model<float>& model, const FrequencyTable& freqs,
                          const TrainConfig& cfg);

// "peohoi-ckpt/v1": one JSON manifest line, then a little-endian float32 blob
// in manifest order.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// builds a model and installs the checkpoint's parameter values
std::unique_ptr<Model<float>> model_from_checkpoint(const Checkpoint& ckpt);

std::vector<PairScores> infer_dataset(Model<float>& model, const Dataset& data,
                                      bool want_proto_features, int threads = 1);

}  // namespace peohoi
