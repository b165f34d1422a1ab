#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "peohoi/dataset.hpp"
#include "peohoi/embeddings.hpp"
#include "peohoi/synth.hpp"

using namespace peohoi;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto p = fs::temp_directory_path() / "peohoi_data_tests";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

SynthConfig small_config(uint64_t seed) {
  SynthConfig cfg;
  cfg.num_videos = 3;
  cfg.test_videos = 1;
  cfg.frames_per_video = 6;
  cfg.pairs_per_frame = 2;
  cfg.num_object_categories = 5;
  cfg.dims = {8, 6, 4};
  cfg.seed = seed;
  return cfg;
}

Dataset tiny_dataset() {
  Dataset d;
  d.label_space = default_label_space(3);
  d.dims = {2, 2, 2};
  PairRecord p;
  p.human_track_id = 0;
  p.object_track_id = 1;
  p.human_box = {0.1f, 0.1f, 0.4f, 0.9f};
  p.object_box = {0.5f, 0.3f, 0.7f, 0.5f};
  p.union_box = {0.1f, 0.1f, 0.7f, 0.9f};
  p.object_category = 1;
  p.feat_h = {0.25f, -1.5f};
  p.feat_o = {0.1f, 3.0f};
  p.feat_u = {-0.75f, 0.33f};
  p.gaze = {1.0f, 0.0f};
  p.labels_spatial = {6};
  p.labels_action = {0};
  d.videos.push_back({"vid_a", {FrameRecord{0, {p}}, FrameRecord{2, {}}}});
  return d;
}

}  // namespace

TEST_CASE("dataset: write/load round trip is structurally identical and byte-stable") {
  auto dir = temp_dir();
  Dataset d = tiny_dataset();
  auto path = (dir / "tiny.jsonl").string();
  write_dataset(d, path);
  Dataset d2 = load_dataset(path);
  CHECK(d2 == d);

  auto path2 = (dir / "tiny2.jsonl").string();
  write_dataset(d2, path2);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("dataset: frames with no pairs are accepted") {
  auto dir = temp_dir();
  Dataset d = tiny_dataset();
  auto path = (dir / "empty_frame.jsonl").string();
  write_dataset(d, path);
  Dataset d2 = load_dataset(path);
  REQUIRE(d2.videos.size() == 1);
  CHECK(d2.videos[0].frames[1].pairs.empty());
}

TEST_CASE("dataset: empty dataset writes a header line only") {
  auto dir = temp_dir();
  Dataset d;
  d.label_space = default_label_space(2);
  d.dims = {2, 2, 2};
  auto path = (dir / "header_only.jsonl").string();
  write_dataset(d, path);
  std::string text = slurp(path);
  CHECK(text.find("peohoi/v1") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  Dataset d2 = load_dataset(path);
  CHECK(d2.videos.empty());
  CHECK(d2.dims == d.dims);
}

TEST_CASE("dataset: out-of-range label index is rejected with a schema error") {
  auto dir = temp_dir();
  Dataset d = tiny_dataset();
  d.videos[0].frames[0].pairs[0].labels_spatial = {8};  // only 8 spatial predicates: 0..7
  auto path = (dir / "bad_label.jsonl").string();
  CHECK_THROWS_AS(write_dataset(d, path), SchemaError);

  // same via file ingestion: error message carries the line number
  Dataset ok = tiny_dataset();
  write_dataset(ok, path);
  std::string text = slurp(path);
  auto pos = text.find("\"sp\":[6]");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 8, "\"sp\":[9]");
  std::ofstream(path, std::ios::binary) << text;
  CHECK_THROWS_AS(load_dataset(path), SchemaError);
}

TEST_CASE("dataset: malformed line reports its line number") {
  auto dir = temp_dir();
  auto path = (dir / "malformed.jsonl").string();
  write_dataset(tiny_dataset(), path);
  std::ofstream app(path, std::ios::binary | std::ios::app);
  app << "{not json\n";
  app.close();
  try {
    load_dataset(path);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("dataset: feature arity mismatch against the header is rejected") {
  auto dir = temp_dir();
  auto path = (dir / "dim_mismatch.jsonl").string();
  write_dataset(tiny_dataset(), path);
  std::string text = slurp(path);
  auto pos = text.find("\"f_u\":[-0.75,0.33]");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 18, "\"f_u\":[-0.75]");
  std::ofstream(path, std::ios::binary) << text;
  CHECK_THROWS_AS(load_dataset(path), SchemaError);
}

TEST_CASE("dataset: non-finite feature is rejected on write") {
  auto dir = temp_dir();
  Dataset d = tiny_dataset();
  d.videos[0].frames[0].pairs[0].feat_u[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(write_dataset(d, (dir / "nan.jsonl").string()), SchemaError);
}

TEST_CASE("compute_frequencies: single positive, duplication, additivity") {
  Dataset d = tiny_dataset();
  d.videos[0].frames[0].pairs[0].labels_spatial = {};
  d.videos[0].frames[0].pairs[0].labels_action = {0};  // "hold"
  FrequencyTable t = compute_frequencies(d);
  CHECK(t.total_pairs == 1);
  CHECK(t.label_count(d.label_space.action_offset() + 0) == 1);
  int64_t total = 0;
  for (auto c : t.label_counts) total += c;
  CHECK(total == 1);
  CHECK(t.triplet_count({1, d.label_space.action_offset() + 0}) == 1);

  // duplicated frame doubles every count
  Dataset d2 = d;
  FrameRecord dup = d2.videos[0].frames[0];
  dup.frame_index = 5;
  d2.videos[0].frames.push_back(dup);
  FrequencyTable t2 = compute_frequencies(d2);
  CHECK(t2.total_pairs == 2 * t.total_pairs);
  for (size_t i = 0; i < t.label_counts.size(); ++i)
    CHECK(t2.label_counts[i] == 2 * t.label_counts[i]);

  // additivity under concatenation of distinct videos
  SynthOutput a = generate_synthetic(small_config(5));
  SynthOutput b = generate_synthetic(small_config(6));
  Dataset joined = a.train;
  for (auto v : b.train.videos) {
    v.video_id += "_b";
    joined.videos.push_back(std::move(v));
  }
  FrequencyTable fa = compute_frequencies(a.train);
  FrequencyTable fb = compute_frequencies(b.train);
  FrequencyTable fj = compute_frequencies(joined);
  CHECK(fj.total_pairs == fa.total_pairs + fb.total_pairs);
  for (size_t i = 0; i < fj.label_counts.size(); ++i)
    CHECK(fj.label_counts[i] == fa.label_counts[i] + fb.label_counts[i]);
  for (const auto& [key, count] : fj.triplet_counts)
    CHECK(count == fa.triplet_count(key) + fb.triplet_count(key));
}

TEST_CASE("split_rare: thresholds and partition property") {
  FrequencyTable t;
  t.label_counts.assign(4, 0);
  t.triplet_counts[{0, 0}] = 10;  // A
  t.triplet_counts[{1, 2}] = 30;  // B

  auto s1 = split_rare(t, 1);
  CHECK(s1.rare.empty());
  CHECK(s1.non_rare.size() == 2);

  auto s2 = split_rare(t, 25);
  CHECK(s2.rare == std::set<TripletKey>{{0, 0}});
  CHECK(s2.non_rare == std::set<TripletKey>{{1, 2}});

  auto s3 = split_rare(t, 31);
  CHECK(s3.rare.size() == 2);
  CHECK(s3.non_rare.empty());

  CHECK_THROWS_AS(split_rare(t, 0), ConfigError);

  // partition: rare and non_rare are disjoint and cover all observed triplets
  SynthOutput sy = generate_synthetic(small_config(7));
  FrequencyTable ft = compute_frequencies(sy.train);
  auto sp = split_rare(ft, 3);
  CHECK(sp.rare.size() + sp.non_rare.size() == ft.triplet_counts.size());
  for (const auto& k : sp.rare) CHECK(sp.non_rare.count(k) == 0);
}

TEST_CASE("embeddings: parsing, duplicates, deterministic fallback") {
  auto dir = temp_dir();
  auto path = (dir / "vectors.txt").string();
  std::ofstream(path) << "cup 0.5 -1.25 3\nhold 1 2 0.125\n";
  EmbeddingTable t = load_embeddings(path, 3);
  CHECK(t.size() == 2);
  CHECK(t.lookup("cup") == std::vector<float>{0.5f, -1.25f, 3.f});

  std::ofstream(path) << "cup 0.5 -1.25 3\ncup 9 9 9\n";
  std::vector<std::string> warnings;
  EmbeddingTable t2 = load_embeddings(path, 3, &warnings);
  CHECK(t2.lookup("cup") == std::vector<float>{9.f, 9.f, 9.f});
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("cup") != std::string::npos);

  std::ofstream(path) << "cup 0.5 -1.25\n";
  try {
    load_embeddings(path, 3);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("cup") != std::string::npos);
  }

  // unknown-token fallback: unit norm, bit-identical across instances
  EmbeddingTable a(16), b(16);
  auto va = a.lookup("never_seen");
  auto vb = b.lookup("never_seen");
  CHECK(va == vb);
  double n2 = 0;
  for (float x : va) n2 += double(x) * x;
  CHECK(n2 == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(a.lookup("other_token") != va);
}

TEST_CASE("synth: identical seeds give byte-identical files") {
  auto dir = temp_dir();
  SynthOutput o1 = generate_synthetic(small_config(42));
  SynthOutput o2 = generate_synthetic(small_config(42));
  auto p1 = (dir / "s1.jsonl").string();
  auto p2 = (dir / "s2.jsonl").string();
  write_dataset(o1.train, p1);
  write_dataset(o2.train, p2);
  CHECK(slurp(p1) == slurp(p2));
  auto l1 = (dir / "l1.json").string();
  auto l2 = (dir / "l2.json").string();
  write_ledger(o1.ledger, l1);
  write_ledger(o2.ledger, l2);
  CHECK(slurp(l1) == slurp(l2));

  SynthOutput o3 = generate_synthetic(small_config(43));
  CHECK(!(o3.train == o1.train));
}

TEST_CASE("synth: zero noise means observed labels equal the ledger's clean labels") {
  SynthConfig cfg = small_config(9);
  cfg.noise_rate = 0.0;
  SynthOutput o = generate_synthetic(cfg);
  size_t fi = 0;
  for (const auto& video : o.train.videos) {
    for (const auto& frame : video.frames) {
      REQUIRE(fi < o.ledger.train_clean.size());
      const CleanFrameLabels& cl = o.ledger.train_clean[fi++];
      CHECK(cl.video_id == video.video_id);
      REQUIRE(cl.pairs.size() == frame.pairs.size());
      for (size_t i = 0; i < frame.pairs.size(); ++i) {
        CHECK(frame.pairs[i].labels_spatial == cl.pairs[i].labels_spatial);
        CHECK(frame.pairs[i].labels_action == cl.pairs[i].labels_action);
      }
    }
  }
}

TEST_CASE("synth: ledger counts match compute_frequencies exactly") {
  SynthOutput o = generate_synthetic(small_config(11));
  FrequencyTable t = compute_frequencies(o.train);
  CHECK(t.total_pairs == o.ledger.observed_train_pairs);
  CHECK(t.label_counts == o.ledger.observed_train_label_counts);
  CHECK(t.triplet_counts == o.ledger.observed_train_triplet_counts);
}

TEST_CASE("synth: unbiased flat-tail config gives uniform predicate counts") {
  // multinomial-count oracle: with bias 0 and tail 0 every predicate in a
  // group is equally likely, so each count should sit within 3 sigma of n/L
  SynthConfig cfg;
  cfg.num_videos = 60;
  cfg.test_videos = 1;
  cfg.frames_per_video = 10;
  cfg.pairs_per_frame = 3;
  cfg.bias_strength = 0.0;
  cfg.tail_exponent = 0.0;
  cfg.noise_rate = 0.0;
  cfg.num_object_categories = 6;
  cfg.dims = {4, 4, 4};
  cfg.seed = 1;
  SynthOutput o = generate_synthetic(cfg);
  FrequencyTable t = compute_frequencies(o.train);

  auto check_group = [&](int offset, int count) {
    int64_t n = 0;
    for (int l = 0; l < count; ++l) n += t.label_counts[offset + l];
    double p = 1.0 / count;
    double mean = double(n) * p;
    double sigma = std::sqrt(double(n) * p * (1 - p));
    for (int l = 0; l < count; ++l)
      CHECK(std::abs(double(t.label_counts[offset + l]) - mean) <= 3.0 * sigma);
  };
  check_group(0, o.train.label_space.num_spatial());
  check_group(o.train.label_space.action_offset(), o.train.label_space.num_action());
}

TEST_CASE("synth: pairs absent early in a video leave frames valid") {
  SynthConfig cfg = small_config(21);
  cfg.pairs_per_frame = 3;
  SynthOutput o = generate_synthetic(cfg);
  o.train.validate();
  // at least one track somewhere should be absent for part of its video
  bool found_partial = false;
  for (const auto& video : o.train.videos) {
    std::map<int, int> appearances;
    for (const auto& frame : video.frames)
      for (const auto& p : frame.pairs) appearances[p.object_track_id]++;
    for (auto& [id, n] : appearances)
      if (n < int(video.frames.size())) found_partial = true;
  }
  CHECK(found_partial);
}
