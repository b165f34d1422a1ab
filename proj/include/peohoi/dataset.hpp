#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "peohoi/labels.hpp"

namespace peohoi {

// normalized image coordinates
struct BBox {
  float x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  bool valid() const { return x_min <= x_max && y_min <= y_max; }
  bool contains(const BBox& o) const {
    return x_min <= o.x_min && y_min <= o.y_min && x_max >= o.x_max && y_max >= o.y_max;
  }
  float cx() const { return 0.5f * (x_min + x_max); }
  float cy() const { return 0.5f * (y_min + y_max); }
  bool operator==(const BBox&) const = default;
};

// One human-object candidate pair at one frame: boxes, track identities,
// appearance/union/gaze features and multi-label ground truth.
struct PairRecord {
  int human_track_id = 0;
  int object_track_id = 0;
  BBox human_box, object_box, union_box;
  int object_category = 0;
  std::vector<float> feat_h, feat_o, feat_u;
  std::vector<float> gaze;
  std::vector<int> labels_spatial;  // indices into LabelSpace::spatial_predicates
  std::vector<int> labels_action;   // indices into LabelSpace::action_predicates
  bool operator==(const PairRecord&) const = default;
};

struct FrameRecord {
  int frame_index = 0;
  std::vector<PairRecord> pairs;
  bool operator==(const FrameRecord&) const = default;
};

struct VideoRecord {
  std::string video_id;
  std::vector<FrameRecord> frames;  // frame_index strictly increasing
  bool operator==(const VideoRecord&) const = default;
};

struct Dims {
  int d_v = 128;
  int d_w = 50;
  int d_g = 64;
  bool operator==(const Dims&) const = default;
};

struct Dataset {
  LabelSpace label_space;
  Dims dims;
  std::vector<VideoRecord> videos;  // ordered by first appearance in the file

  void validate() const;
  int64_t total_pairs() const;
  bool operator==(const Dataset&) const = default;
};

// JSON-Lines dataset file ("peohoi/v1"): line 1 is a header object, each
// following line is one frame. Writing is canonical (fixed key order,
// shortest round-trip float formatting), so load(write(d)) is byte-stable.
Dataset load_dataset(const std::string& path);
void write_dataset(const Dataset& d, const std::string& path);

// ---------------------------------------------------------------------------
// Label statistics.
// ---------------------------------------------------------------------------

using TripletKey = std::pair<int, int>;  // (object_category, combined predicate index)

struct FrequencyTable {
  std::vector<int64_t> label_counts;          // positive occurrences per combined predicate
  std::map<TripletKey, int64_t> triplet_counts;
  int64_t total_pairs = 0;

  int64_t label_count(int combined) const {
    return combined >= 0 && combined < int(label_counts.size()) ? label_counts[combined] : 0;
  }
  int64_t triplet_count(const TripletKey& k) const {
    auto it = triplet_counts.find(k);
    return it == triplet_counts.end() ? 0 : it->second;
  }
};

FrequencyTable compute_frequencies(const Dataset& d);

struct RareSplit {
  std::set<TripletKey> rare;
  std::set<TripletKey> non_rare;
};

// Triplet classes with training count < threshold are rare.
RareSplit split_rare(const FrequencyTable& freqs, int64_t threshold);

}  // namespace peohoi
