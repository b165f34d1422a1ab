#pragma once

#include <map>
#include <string>
#include <vector>

#include "peohoi/dataset.hpp"

namespace peohoi {

// Controls for the synthetic livestream-scenario generator. The latent model
// gives every object category a Zipf-skewed predicate preference; increasing
// bias_strength couples verbs (and union features) to the object category,
// and noise_rate flips or drops observed labels while the ledger keeps the
// clean ones.
struct SynthConfig {
  int num_videos = 20;
  int test_videos = 5;
  int frames_per_video = 10;
  int pairs_per_frame = 3;
  double bias_strength = 0.5;   // in [0,1]: object-verb correlation
  double noise_rate = 0.1;      // in [0,1]: per-label flip/drop probability
  double tail_exponent = 1.0;   // Zipf skew of per-object predicate preference
  int num_object_categories = 12;
  Dims dims;                    // d_v=128, d_w=50, d_g=64 by default
  uint64_t seed = 0;            // mandatory at the CLI

  void validate() const;
};

struct CleanPairLabels {
  int human_track_id = 0;
  int object_track_id = 0;
  std::vector<int> labels_spatial;
  std::vector<int> labels_action;
};

struct CleanFrameLabels {
  std::string video_id;
  int frame_index = 0;
  std::vector<CleanPairLabels> pairs;
};

// Generator-side record of what was actually drawn: clean labels for every
// emitted pair plus exact observed-label counts over the training split.
struct SynthLedger {
  SynthConfig config;
  std::vector<CleanFrameLabels> train_clean;
  std::vector<CleanFrameLabels> test_clean;
  std::vector<int64_t> observed_train_label_counts;          // per combined predicate
  std::map<TripletKey, int64_t> observed_train_triplet_counts;
  int64_t observed_train_pairs = 0;
};

struct SynthOutput {
  Dataset train;
  Dataset test;
  SynthLedger ledger;
};

SynthOutput generate_synthetic(const SynthConfig& config);

void write_ledger(const SynthLedger& ledger, const std::string& path);

}  // namespace peohoi
