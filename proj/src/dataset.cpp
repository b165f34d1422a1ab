#include "peohoi/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace peohoi {

namespace {

using nlohmann::json;

// shortest decimal that round-trips to the same float
void append_float(std::string& out, float v) {
  char buf[48];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void append_escaped(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

void append_float_array(std::string& out, const std::vector<float>& v) {
  out += '[';
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    append_float(out, v[i]);
  }
  out += ']';
}

void append_int_array(std::string& out, const std::vector<int>& v) {
  out += '[';
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  out += ']';
}

void append_box(std::string& out, const BBox& b) {
  out += '[';
  append_float(out, b.x_min);
  out += ',';
  append_float(out, b.y_min);
  out += ',';
  append_float(out, b.x_max);
  out += ',';
  append_float(out, b.y_max);
  out += ']';
}

void append_name_array(std::string& out, const std::vector<std::string>& v) {
  out += '[';
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    append_escaped(out, v[i]);
  }
  out += ']';
}

float json_float(const json& j, const char* what, int line) {
  if (!j.is_number()) throw SchemaError(strf("line ", line, ": ", what, " is not a number"));
  return float(j.get<double>());
}

std::vector<float> json_floats(const json& j, size_t want, const char* what, int line) {
  if (!j.is_array() || j.size() != want)
    throw SchemaError(strf("line ", line, ": ", what, " must be an array of length ", want));
  std::vector<float> out(want);
  for (size_t i = 0; i < want; ++i) out[i] = json_float(j[i], what, line);
  return out;
}

std::vector<int> json_ints(const json& j, const char* what, int line) {
  if (!j.is_array()) throw SchemaError(strf("line ", line, ": ", what, " must be an array"));
  std::vector<int> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number_integer()) throw SchemaError(strf("line ", line, ": ", what, " must hold integers"));
    out.push_back(e.get<int>());
  }
  return out;
}

BBox json_box(const json& j, const char* what, int line) {
  auto v = json_floats(j, 4, what, line);
  return BBox{v[0], v[1], v[2], v[3]};
}

void check_finite(const std::vector<float>& v, const char* what) {
  for (float x : v)
    if (!std::isfinite(x)) throw SchemaError(strf("non-finite value in ", what));
}

}  // namespace

int64_t Dataset::total_pairs() const {
  int64_t n = 0;
  for (const auto& v : videos)
    for (const auto& f : v.frames) n += int64_t(f.pairs.size());
  return n;
}

void Dataset::validate() const {
  label_space.validate();
  const float tol = 1e-5f;
  for (const auto& video : videos) {
    if (video.video_id.empty()) throw SchemaError("empty video id");
    int prev = -1;
    bool first = true;
    for (const auto& frame : video.frames) {
      if (!first && frame.frame_index <= prev)
        throw SchemaError(strf("video '", video.video_id, "': frame indices not strictly increasing at ",
                               frame.frame_index));
      first = false;
      prev = frame.frame_index;
      std::set<std::pair<int, int>> seen;
      for (const auto& p : frame.pairs) {
        if (!seen.insert({p.human_track_id, p.object_track_id}).second)
          throw SchemaError(strf("video '", video.video_id, "' frame ", frame.frame_index,
                                 ": duplicate pair (", p.human_track_id, ",", p.object_track_id, ")"));
        if (int(p.feat_h.size()) != dims.d_v || int(p.feat_o.size()) != dims.d_v ||
            int(p.feat_u.size()) != dims.d_v)
          throw SchemaError(strf("video '", video.video_id, "': feature dim mismatch (expected d_v=",
                                 dims.d_v, ")"));
        if (int(p.gaze.size()) != dims.d_g)
          throw SchemaError(strf("video '", video.video_id, "': gaze dim mismatch (expected d_g=",
                                 dims.d_g, ")"));
        if (p.object_category < 0 || p.object_category >= label_space.num_objects())
          throw SchemaError(strf("object category index ", p.object_category, " out of range"));
        for (int l : p.labels_spatial)
          if (l < 0 || l >= label_space.num_spatial())
            throw SchemaError(strf("spatial label index ", l, " out of range"));
        for (int l : p.labels_action)
          if (l < 0 || l >= label_space.num_action())
            throw SchemaError(strf("action label index ", l, " out of range"));
        if (!p.human_box.valid() || !p.object_box.valid() || !p.union_box.valid())
          throw SchemaError("degenerate bounding box");
        BBox u = p.union_box;
        u.x_min -= tol; u.y_min -= tol; u.x_max += tol; u.y_max += tol;
        if (!u.contains(p.human_box) || !u.contains(p.object_box))
          throw SchemaError(strf("video '", video.video_id, "' frame ", frame.frame_index,
                                 ": union box does not contain the pair boxes"));
        check_finite(p.feat_h, "feat_h");
        check_finite(p.feat_o, "feat_o");
        check_finite(p.feat_u, "feat_u");
        check_finite(p.gaze, "gaze");
      }
    }
  }
}

void write_dataset(const Dataset& d, const std::string& path) {
  d.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(strf("cannot open '", path, "' for writing"));

  std::string line;
  line.reserve(1 << 16);
  line += "{\"schema\":\"peohoi/v1\",\"d_v\":";
  line += std::to_string(d.dims.d_v);
  line += ",\"d_w\":";
  line += std::to_string(d.dims.d_w);
  line += ",\"d_g\":";
  line += std::to_string(d.dims.d_g);
  line += ",\"objects\":";
  append_name_array(line, d.label_space.object_categories);
  line += ",\"spatial\":";
  append_name_array(line, d.label_space.spatial_predicates);
  line += ",\"action\":";
  append_name_array(line, d.label_space.action_predicates);
  line += "}\n";
  out << line;

  for (const auto& video : d.videos) {
    for (const auto& frame : video.frames) {
      line.clear();
      line += "{\"video\":";
      append_escaped(line, video.video_id);
      line += ",\"frame\":";
      line += std::to_string(frame.frame_index);
      line += ",\"pairs\":[";
      for (size_t i = 0; i < frame.pairs.size(); ++i) {
        const PairRecord& p = frame.pairs[i];
        if (i) line += ',';
        line += "{\"h_id\":";
        line += std::to_string(p.human_track_id);
        line += ",\"o_id\":";
        line += std::to_string(p.object_track_id);
        line += ",\"h_box\":";
        append_box(line, p.human_box);
        line += ",\"o_box\":";
        append_box(line, p.object_box);
        line += ",\"u_box\":";
        append_box(line, p.union_box);
        line += ",\"obj\":";
        line += std::to_string(p.object_category);
        line += ",\"f_h\":";
        append_float_array(line, p.feat_h);
        line += ",\"f_o\":";
        append_float_array(line, p.feat_o);
        line += ",\"f_u\":";
        append_float_array(line, p.feat_u);
        line += ",\"gaze\":";
        append_float_array(line, p.gaze);
        line += ",\"sp\":";
        append_int_array(line, p.labels_spatial);
        line += ",\"ac\":";
        append_int_array(line, p.labels_action);
        line += '}';
      }
      line += "]}\n";
      out << line;
    }
  }
  if (!out) throw IoError(strf("write failed for '", path, "'"));
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(strf("cannot open '", path, "'"));
  std::string text;
  Dataset d;

  int lineno = 0;
  std::string raw;
  std::unordered_map<std::string, size_t> video_index;

  while (std::getline(in, raw)) {
    ++lineno;
    if (raw.empty()) continue;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw SchemaError(strf("line ", lineno, ": malformed JSON: ", e.what()));
    }
    if (lineno == 1) {
      if (!j.is_object() || j.value("schema", "") != "peohoi/v1")
        throw SchemaError("line 1: missing or unknown schema header (want \"peohoi/v1\")");
      d.dims.d_v = j.at("d_v").get<int>();
      d.dims.d_w = j.at("d_w").get<int>();
      d.dims.d_g = j.at("d_g").get<int>();
      if (d.dims.d_v < 1 || d.dims.d_w < 1 || d.dims.d_g < 1)
        throw SchemaError("line 1: dimensions must be positive");
      d.label_space.object_categories = j.at("objects").get<std::vector<std::string>>();
      d.label_space.spatial_predicates = j.at("spatial").get<std::vector<std::string>>();
      d.label_space.action_predicates = j.at("action").get<std::vector<std::string>>();
      continue;
    }
    if (!j.is_object() || !j.contains("video") || !j.contains("frame") || !j.contains("pairs"))
      throw SchemaError(strf("line ", lineno, ": frame record needs video/frame/pairs"));
    std::string vid = j.at("video").get<std::string>();
    FrameRecord frame;
    frame.frame_index = j.at("frame").get<int>();
    const json& pairs = j.at("pairs");
    if (!pairs.is_array()) throw SchemaError(strf("line ", lineno, ": pairs must be an array"));
    for (const auto& pj : pairs) {
      PairRecord p;
      p.human_track_id = pj.at("h_id").get<int>();
      p.object_track_id = pj.at("o_id").get<int>();
      p.human_box = json_box(pj.at("h_box"), "h_box", lineno);
      p.object_box = json_box(pj.at("o_box"), "o_box", lineno);
      p.union_box = json_box(pj.at("u_box"), "u_box", lineno);
      p.object_category = pj.at("obj").get<int>();
      p.feat_h = json_floats(pj.at("f_h"), size_t(d.dims.d_v), "f_h", lineno);
      p.feat_o = json_floats(pj.at("f_o"), size_t(d.dims.d_v), "f_o", lineno);
      p.feat_u = json_floats(pj.at("f_u"), size_t(d.dims.d_v), "f_u", lineno);
      p.gaze = json_floats(pj.at("gaze"), size_t(d.dims.d_g), "gaze", lineno);
      p.labels_spatial = json_ints(pj.at("sp"), "sp", lineno);
      p.labels_action = json_ints(pj.at("ac"), "ac", lineno);
      frame.pairs.push_back(std::move(p));
    }
    auto it = video_index.find(vid);
    if (it == video_index.end()) {
      video_index.emplace(vid, d.videos.size());
      d.videos.push_back(VideoRecord{vid, {std::move(frame)}});
    } else {
      d.videos[it->second].frames.push_back(std::move(frame));
    }
  }
  if (lineno == 0) throw SchemaError("empty file: missing header line");
  try {
    d.validate();
  } catch (const SchemaError& e) {
    throw SchemaError(strf(path, ": ", e.what()));
  }
  return d;
}

FrequencyTable compute_frequencies(const Dataset& d) {
  FrequencyTable t;
  t.label_counts.assign(d.label_space.num_predicates(), 0);
  int off = d.label_space.action_offset();
  for (const auto& video : d.videos) {
    for (const auto& frame : video.frames) {
      for (const auto& p : frame.pairs) {
        ++t.total_pairs;
        for (int l : p.labels_spatial) {
          ++t.label_counts[l];
          ++t.triplet_counts[{p.object_category, l}];
        }
        for (int l : p.labels_action) {
          ++t.label_counts[off + l];
          ++t.triplet_counts[{p.object_category, off + l}];
        }
      }
    }
  }
  return t;
}

RareSplit split_rare(const FrequencyTable& freqs, int64_t threshold) {
  if (threshold < 1) throw ConfigError("split_rare: threshold must be >= 1");
  RareSplit s;
  for (const auto& [key, count] : freqs.triplet_counts) {
    if (count < threshold)
      s.rare.insert(key);
    else
      s.non_rare.insert(key);
  }
  return s;
}

}  // namespace peohoi
