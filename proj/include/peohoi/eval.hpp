#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "peohoi/dataset.hpp"
#include "peohoi/model.hpp"

namespace peohoi {

// ---------------------------------------------------------------------------
// Rank metrics. Oracle-pair protocol: predicate scores are attached to
// ground-truth pairs, so there is no detection-matching stage and the numbers
// isolate the relation head.
// ---------------------------------------------------------------------------

// All-point interpolated area under the precision-recall curve. Items are
// ranked by descending score; ties keep their input order. Needs >= 1
// positive.
double average_precision(const std::vector<double>& scores, const std::vector<uint8_t>& positive);

enum class MapAveraging { triplet, predicate };

struct EvalReport {
  // AP per evaluated class; the key is (object_category, predicate) for
  // triplet averaging and (-1, predicate) for predicate averaging
  std::map<TripletKey, double> ap;
  std::map<TripletKey, int64_t> positives;  // test positives per evaluated class
  double map_full = 0, map_non_rare = 0, map_rare = 0;
  int64_t classes_full = 0, classes_non_rare = 0, classes_rare = 0;
  int64_t rare_threshold = 0;
  MapAveraging averaging = MapAveraging::triplet;
};

// AP per (object_category, predicate) with >= 1 test positive; mAP_full
// averages all of them, the rare/non-rare means follow split_rare on the
// training-set frequencies.
EvalReport map_report(const std::vector<PairScores>& predictions, const Dataset& data,
                      const FrequencyTable& train_freqs, int64_t rare_threshold,
                      MapAveraging averaging = MapAveraging::triplet);

// unbiased sample variance (n - 1 denominator); needs >= 2 values
double sample_variance(const std::vector<double>& values);

// ---------------------------------------------------------------------------
// Feature-space separability: mean silhouette over samples, Euclidean
// distances, classes below min_count dropped.
// ---------------------------------------------------------------------------

struct SilhouetteResult {
  bool computable = false;
  double score = 0;
  int classes = 0;
  int samples = 0;
};

SilhouetteResult silhouette(const std::vector<std::vector<float>>& features,
                            const std::vector<int>& class_labels, int min_count);

struct SeparabilityReport {
  SilhouetteResult raw;    // silhouette of raw union features
  SilhouetteResult proto;  // silhouette of prototype-embedded features
  int min_count = 0;
  std::map<int, int> class_counts;  // per combined predicate, before filtering
};

// Samples are pairs with exactly one action label (instances with ambiguous
// class are dropped); the class is that action predicate. `predictions` must
// carry proto features when proto separability is wanted.
SeparabilityReport separability_report(const Dataset& data, const std::vector<PairScores>& predictions,
                                       int min_count);

}  // namespace peohoi
