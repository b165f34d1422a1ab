#pragma once

#include <string>
#include <vector>

#include "peohoi/common.hpp"

namespace peohoi {

// Ordered predicate and object vocabularies. Predicates split into spatial
// relations and action relations; the combined score vector is laid out
// [spatial..., action...].
struct LabelSpace {
  std::vector<std::string> spatial_predicates;
  std::vector<std::string> action_predicates;
  std::vector<std::string> object_categories;

  int num_spatial() const { return int(spatial_predicates.size()); }
  int num_action() const { return int(action_predicates.size()); }
  int num_predicates() const { return num_spatial() + num_action(); }
  int num_objects() const { return int(object_categories.size()); }

  // combined predicate index: spatial l -> l, action l -> num_spatial + l
  int action_offset() const { return num_spatial(); }

  const std::string& predicate_name(int combined) const {
    if (combined < 0 || combined >= num_predicates())
      throw DimError(strf("predicate index ", combined, " out of range"));
    if (combined < num_spatial()) return spatial_predicates[combined];
    return action_predicates[combined - num_spatial()];
  }

  void validate() const;
  bool operator==(const LabelSpace&) const = default;
};

// Default vocabulary: 8 spatial relations, 42 action relations, and a small
// object list suitable for synthetic scenes.
LabelSpace default_label_space(int num_objects = 12);

}  // namespace peohoi
