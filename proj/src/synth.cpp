#include "peohoi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace peohoi {

namespace {

constexpr double kFeatureNoise = 0.35;
constexpr double kAppearanceNoise = 0.30;

struct LatentModel {
  // one row per combined predicate, in feature space R^{d_v}
  std::vector<std::vector<float>> predicate_prototypes;
  std::vector<std::vector<float>> object_offsets;     // per object category
  std::vector<std::vector<float>> object_centers;     // appearance centers
  std::vector<float> human_center;
  // per object category: sampling weights over spatial / action predicates
  std::vector<std::vector<double>> spatial_weights;
  std::vector<std::vector<double>> action_weights;
};

std::vector<float> gaussian_vec(int d, Rng& rng, double scale) {
  std::vector<float> v(d);
  for (auto& x : v) x = float(scale * rng.normal());
  return v;
}

// Zipf over a per-object ranking of the predicates, mixed with the uniform
// distribution: P(l|o) = bias * zipf_o(l) + (1 - bias) / L.
std::vector<double> biased_weights(int count, double tail, double bias, Rng& rng) {
  std::vector<int> ranking(count);
  for (int i = 0; i < count; ++i) ranking[i] = i;
  for (int i = count - 1; i > 0; --i) std::swap(ranking[i], ranking[rng.uniform_int(i + 1)]);
  std::vector<double> zipf(count);
  double z = 0;
  for (int r = 0; r < count; ++r) z += 1.0 / std::pow(double(r + 1), tail);
  for (int r = 0; r < count; ++r) zipf[ranking[r]] = 1.0 / std::pow(double(r + 1), tail) / z;
  std::vector<double> w(count);
  for (int l = 0; l < count; ++l) w[l] = bias * zipf[l] + (1.0 - bias) / count;
  return w;
}

int draw_from(const std::vector<double>& w, Rng& rng) {
  double u = rng.uniform();
  double acc = 0;
  for (size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return int(i);
  }
  return int(w.size()) - 1;
}

LatentModel build_latent(const SynthConfig& cfg, const LabelSpace& ls) {
  LatentModel m;
  Rng rng(seed_for(cfg.seed, "latent"));
  int preds = ls.num_predicates();
  m.predicate_prototypes.reserve(preds);
  for (int l = 0; l < preds; ++l) m.predicate_prototypes.push_back(gaussian_vec(cfg.dims.d_v, rng, 1.0));
  for (int o = 0; o < cfg.num_object_categories; ++o) {
    m.object_offsets.push_back(gaussian_vec(cfg.dims.d_v, rng, 1.0));
    m.object_centers.push_back(gaussian_vec(cfg.dims.d_v, rng, 1.0));
  }
  m.human_center = gaussian_vec(cfg.dims.d_v, rng, 1.0);
  for (int o = 0; o < cfg.num_object_categories; ++o) {
    m.spatial_weights.push_back(
        biased_weights(ls.num_spatial(), cfg.tail_exponent, cfg.bias_strength, rng));
    m.action_weights.push_back(
        biased_weights(ls.num_action(), cfg.tail_exponent, cfg.bias_strength, rng));
  }
  return m;
}

BBox clamp_box(BBox b) {
  auto cl = [](float v) { return std::min(1.0f, std::max(0.0f, v)); };
  b.x_min = cl(b.x_min);
  b.y_min = cl(b.y_min);
  b.x_max = cl(std::max(b.x_max, b.x_min));
  b.y_max = cl(std::max(b.y_max, b.y_min));
  return b;
}

BBox union_of(const BBox& a, const BBox& b) {
  return BBox{std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min),
              std::max(a.x_max, b.x_max), std::max(a.y_max, b.y_max)};
}

// Applies flip/drop noise to one clean label set; indices are within a group
// of `group_size` predicates.
std::vector<int> noisy_labels(const std::vector<int>& clean, int group_size, double rate, Rng& rng) {
  std::vector<int> out;
  for (int l : clean) {
    if (rate > 0 && rng.bernoulli(rate)) {
      if (rng.bernoulli(0.5)) continue;  // drop
      if (group_size > 1) {
        int repl = rng.uniform_int(group_size - 1);
        if (repl >= l) ++repl;
        out.push_back(repl);
      } else {
        out.push_back(l);
      }
    } else {
      out.push_back(l);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct TrackState {
  int object_track_id = 0;
  int category = 0;
  int first_frame = 0;  // presence interval within the video, inclusive
  int last_frame = 0;
  float cx = 0, cy = 0, w = 0, h = 0;
};

void generate_split(const SynthConfig& cfg, const LabelSpace& ls, const LatentModel& latent,
                    const std::string& split_name, int num_videos, Dataset* out,
                    std::vector<CleanFrameLabels>* clean_out) {
  int sp_count = ls.num_spatial();
  int ac_count = ls.num_action();
  int off = ls.action_offset();
  for (int v = 0; v < num_videos; ++v) {
    Rng rng(seed_for(cfg.seed, strf(split_name, "/video/", v)));
    VideoRecord video;
    video.video_id = strf(split_name, "_", v);

    std::vector<TrackState> tracks(cfg.pairs_per_frame);
    for (int k = 0; k < cfg.pairs_per_frame; ++k) {
      TrackState& t = tracks[k];
      t.object_track_id = k + 1;
      t.category = rng.uniform_int(cfg.num_object_categories);
      t.first_frame = 0;
      t.last_frame = cfg.frames_per_video - 1;
      // all but the first track may enter late or leave early, so real windows
      // exercise the padding mask
      if (k > 0 && cfg.frames_per_video > 2 && rng.bernoulli(0.5)) {
        t.first_frame = rng.uniform_int(cfg.frames_per_video / 2);
        t.last_frame = cfg.frames_per_video - 1 - rng.uniform_int(cfg.frames_per_video / 3 + 1);
        if (t.last_frame < t.first_frame) t.last_frame = t.first_frame;
      }
      t.cx = float(rng.uniform(0.15, 0.85));
      t.cy = float(rng.uniform(0.2, 0.8));
      t.w = float(rng.uniform(0.08, 0.2));
      t.h = float(rng.uniform(0.08, 0.2));
    }

    float human_cx = float(rng.uniform(0.35, 0.65));
    for (int f = 0; f < cfg.frames_per_video; ++f) {
      FrameRecord frame;
      frame.frame_index = f;
      CleanFrameLabels clean_frame;
      clean_frame.video_id = video.video_id;
      clean_frame.frame_index = f;

      BBox human{human_cx - 0.12f, 0.25f, human_cx + 0.12f, 0.9f};
      human.x_min += float(rng.uniform(-0.02, 0.02));
      human.x_max += float(rng.uniform(-0.02, 0.02));
      human = clamp_box(human);

      for (auto& t : tracks) {
        if (f < t.first_frame || f > t.last_frame) continue;
        t.cx += float(rng.uniform(-0.03, 0.03));
        t.cy += float(rng.uniform(-0.03, 0.03));
        t.cx = std::min(0.9f, std::max(0.1f, t.cx));
        t.cy = std::min(0.9f, std::max(0.1f, t.cy));
        BBox obj = clamp_box({t.cx - t.w / 2, t.cy - t.h / 2, t.cx + t.w / 2, t.cy + t.h / 2});

        int sp = draw_from(latent.spatial_weights[t.category], rng);
        int ac = draw_from(latent.action_weights[t.category], rng);

        PairRecord p;
        p.human_track_id = 0;
        p.object_track_id = t.object_track_id;
        p.human_box = human;
        p.object_box = obj;
        p.union_box = union_of(human, obj);
        p.object_category = t.category;

        p.feat_u.assign(cfg.dims.d_v, 0.f);
        const auto& ps = latent.predicate_prototypes[sp];
        const auto& pa = latent.predicate_prototypes[off + ac];
        const auto& offs = latent.object_offsets[t.category];
        for (int i = 0; i < cfg.dims.d_v; ++i) {
          double base = 0.5 * (double(ps[i]) + double(pa[i]));
          p.feat_u[i] = float(base + cfg.bias_strength * double(offs[i]) + kFeatureNoise * rng.normal());
        }
        p.feat_h.resize(cfg.dims.d_v);
        p.feat_o.resize(cfg.dims.d_v);
        for (int i = 0; i < cfg.dims.d_v; ++i) {
          p.feat_h[i] = float(double(latent.human_center[i]) + kAppearanceNoise * rng.normal());
          p.feat_o[i] = float(double(latent.object_centers[t.category][i]) + kAppearanceNoise * rng.normal());
        }
        // gaze points from the streamer toward the object it interacts with
        p.gaze.assign(cfg.dims.d_g, 0.f);
        {
          double dx = double(obj.cx()) - double(human.cx());
          double dy = double(obj.cy()) - double(human.cy());
          double n = std::sqrt(dx * dx + dy * dy);
          if (n < 1e-6) n = 1.0;
          p.gaze[0] = float(dx / n + 0.05 * rng.normal());
          if (cfg.dims.d_g > 1) p.gaze[1] = float(dy / n + 0.05 * rng.normal());
          for (int i = 2; i < cfg.dims.d_g; ++i) p.gaze[i] = float(0.1 * rng.normal());
        }

        CleanPairLabels cl;
        cl.human_track_id = 0;
        cl.object_track_id = t.object_track_id;
        cl.labels_spatial = {sp};
        cl.labels_action = {ac};

        p.labels_spatial = noisy_labels(cl.labels_spatial, sp_count, cfg.noise_rate, rng);
        p.labels_action = noisy_labels(cl.labels_action, ac_count, cfg.noise_rate, rng);

        clean_frame.pairs.push_back(std::move(cl));
        frame.pairs.push_back(std::move(p));
      }
      clean_out->push_back(std::move(clean_frame));
      video.frames.push_back(std::move(frame));
    }
    out->videos.push_back(std::move(video));
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (num_videos < 1 || test_videos < 1) throw ConfigError("synth: need at least one video per split");
  if (frames_per_video < 1) throw ConfigError("synth: frames_per_video must be positive");
  if (pairs_per_frame < 1) throw ConfigError("synth: pairs_per_frame must be positive");
  if (bias_strength < 0 || bias_strength > 1) throw ConfigError("synth: bias_strength must be in [0,1]");
  if (noise_rate < 0 || noise_rate > 1) throw ConfigError("synth: noise_rate must be in [0,1]");
  if (tail_exponent < 0) throw ConfigError("synth: tail_exponent must be >= 0");
  if (num_object_categories < 1) throw ConfigError("synth: need at least one object category");
  if (dims.d_v < 2 || dims.d_w < 1 || dims.d_g < 2)
    throw ConfigError("synth: dims too small (need d_v >= 2, d_w >= 1, d_g >= 2)");
}

SynthOutput generate_synthetic(const SynthConfig& config) {
  config.validate();
  LabelSpace ls = default_label_space(config.num_object_categories);

  SynthOutput out;
  out.train.label_space = ls;
  out.train.dims = config.dims;
  out.test.label_space = ls;
  out.test.dims = config.dims;
  out.ledger.config = config;

  LatentModel latent = build_latent(config, ls);
  generate_split(config, ls, latent, "train", config.num_videos, &out.train, &out.ledger.train_clean);
  generate_split(config, ls, latent, "test", config.test_videos, &out.test, &out.ledger.test_clean);

  FrequencyTable freqs = compute_frequencies(out.train);
  out.ledger.observed_train_label_counts = freqs.label_counts;
  out.ledger.observed_train_triplet_counts = freqs.triplet_counts;
  out.ledger.observed_train_pairs = freqs.total_pairs;

  out.train.validate();
  out.test.validate();
  return out;
}

void write_ledger(const SynthLedger& ledger, const std::string& path) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema"] = "peohoi-ledger/v1";
  j["config"] = {{"num_videos", ledger.config.num_videos},
                 {"test_videos", ledger.config.test_videos},
                 {"frames_per_video", ledger.config.frames_per_video},
                 {"pairs_per_frame", ledger.config.pairs_per_frame},
                 {"bias_strength", ledger.config.bias_strength},
                 {"noise_rate", ledger.config.noise_rate},
                 {"tail_exponent", ledger.config.tail_exponent},
                 {"num_object_categories", ledger.config.num_object_categories},
                 {"d_v", ledger.config.dims.d_v},
                 {"d_w", ledger.config.dims.d_w},
                 {"d_g", ledger.config.dims.d_g},
                 {"seed", ledger.config.seed}};
  j["observed_train_pairs"] = ledger.observed_train_pairs;
  j["observed_train_label_counts"] = ledger.observed_train_label_counts;
  ordered_json triplets = ordered_json::array();
  for (const auto& [key, count] : ledger.observed_train_triplet_counts)
    triplets.push_back({{"obj", key.first}, {"pred", key.second}, {"count", count}});
  j["observed_train_triplet_counts"] = std::move(triplets);

  auto clean_to_json = [](const std::vector<CleanFrameLabels>& frames) {
    ordered_json arr = ordered_json::array();
    for (const auto& f : frames) {
      ordered_json pairs = ordered_json::array();
      for (const auto& p : f.pairs)
        pairs.push_back({{"h_id", p.human_track_id},
                         {"o_id", p.object_track_id},
                         {"sp", p.labels_spatial},
                         {"ac", p.labels_action}});
      arr.push_back({{"video", f.video_id}, {"frame", f.frame_index}, {"pairs", std::move(pairs)}});
    }
    return arr;
  };
  j["train_clean"] = clean_to_json(ledger.train_clean);
  j["test_clean"] = clean_to_json(ledger.test_clean);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(strf("cannot open '", path, "' for writing"));
  out << j.dump(2) << "\n";
  if (!out) throw IoError(strf("write failed for '", path, "'"));
}

}  // namespace peohoi
