#include "peohoi/labels.hpp"

#include <unordered_set>

namespace peohoi {

void LabelSpace::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& v : {&spatial_predicates, &action_predicates, &object_categories}) {
    for (const auto& name : *v) {
      if (name.empty()) throw SchemaError("label space: empty name");
    }
  }
  for (const auto& n : spatial_predicates)
    if (!seen.insert(n).second) throw SchemaError(strf("duplicate predicate name: ", n));
  for (const auto& n : action_predicates)
    if (!seen.insert(n).second) throw SchemaError(strf("duplicate predicate name: ", n));
  std::unordered_set<std::string> obj;
  for (const auto& n : object_categories)
    if (!obj.insert(n).second) throw SchemaError(strf("duplicate object category: ", n));
  if (spatial_predicates.empty() || action_predicates.empty())
    throw SchemaError("label space needs at least one spatial and one action predicate");
}

LabelSpace default_label_space(int num_objects) {
  LabelSpace ls;
  ls.spatial_predicates = {"above", "away", "behind", "beneath",
                           "in_front_of", "inside", "next_to", "towards"};
  ls.action_predicates = {
      "hold",     "push",     "pull",   "lift",   "carry",    "ride",      "watch",
      "grab",     "release",  "touch",  "hug",    "kiss",     "feed",      "bite",
      "hit",      "kick",     "lean_on", "point_to", "press",  "shake_hands_with",
      "speak_to", "squeeze",  "throw",  "wave",   "caress",   "chase",     "clean",
      "close",    "open",     "cut",    "drink_from", "drive", "eat",       "get_on",
      "get_off",  "play",     "use",    "smell",  "twist",    "wear",      "wash",
      "write_on"};
  static const char* kObjects[] = {"cup",   "bottle", "phone",  "guitar",     "piano",  "laptop",
                                   "book",  "ball",   "chair",  "table",      "microphone", "camera",
                                   "box",   "plant",  "pillow", "toy",        "bag",    "hat",
                                   "towel", "mirror", "fan",    "keyboard",   "plate",  "scarf"};
  if (num_objects < 1) throw ConfigError("default_label_space: need at least one object category");
  for (int i = 0; i < num_objects; ++i) {
    if (i < int(std::size(kObjects)))
      ls.object_categories.push_back(kObjects[i]);
    else
      ls.object_categories.push_back(strf("object_", i));
  }
  ls.validate();
  return ls;
}

}  // namespace peohoi
