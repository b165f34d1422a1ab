// Command-line front end: data synthesis, training, evaluation, the lambda
// sweep and ablation harnesses, gradient checking and the feature-separability
// study. Every subcommand writes a machine-readable result plus a text
// summary into --out, echoes its fully-resolved configuration, and is
// deterministic given --seed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "peohoi/config_json.hpp"
#include "peohoi/experiments.hpp"
#include "peohoi/reports.hpp"
#include "peohoi/synth.hpp"

namespace fs = std::filesystem;
using namespace peohoi;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Flat dotted-key config file ("loss.lambda": 0.8). File values sit under
// explicit command-line flags: a flag the user typed always wins.
class ConfigBag {
 public:
  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(strf("cannot open config file '", path, "'"));
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(strf("config file '", path, "': ", e.what()));
    }
    if (!j.is_object()) throw ConfigError("config file must hold a flat JSON object");
    for (auto& [key, value] : j.items()) {
      if (value.is_object() || value.is_array())
        throw ConfigError(strf("config key '", key, "': nested values are not supported"));
      values_[key] = value;
    }
  }

  template <typename T>
  void apply(const std::string& key, const CLI::Option* flag, T& target) {
    auto it = values_.find(key);
    if (it != values_.end()) {
      consumed_.insert(key);
      if (!flag || flag->count() == 0) {
        try {
          target = it->second.get<T>();
        } catch (const json::exception&) {
          throw ConfigError(strf("config key '", key, "' has the wrong type"));
        }
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : values_)
      if (!consumed_.count(key)) throw ConfigError(strf("unknown config key '", key, "'"));
  }

 private:
  std::map<std::string, json> values_;
  std::set<std::string> consumed_;
};

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(strf("cannot create output directory '", out, "': ", ec.message()));
  return dir;
}

void echo_config(const ordered_json& j, const fs::path& out_dir) {
  std::cout << "resolved config: " << j.dump() << "\n";
  std::ofstream f(out_dir / "resolved_config.json", std::ios::binary);
  if (!f) throw IoError("cannot write resolved_config.json");
  f << j.dump(2) << "\n";
}

std::vector<double> parse_lambda_list(const std::string& s) {
  std::vector<double> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    if (cur.empty()) continue;
    try {
      out.push_back(std::stod(cur));
    } catch (const std::exception&) {
      throw ConfigError(strf("bad lambda value '", cur, "'"));
    }
  }
  if (out.empty()) throw ConfigError("empty lambda list");
  return out;
}

EmbeddingTable load_words(const std::string& path, int d_w) {
  if (path.empty()) return EmbeddingTable(d_w);
  std::vector<std::string> warnings;
  EmbeddingTable t = load_embeddings(path, d_w, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  return t;
}

// shared train-style flag block for train/sweep/ablate
struct TrainFlags {
  std::string train_path, val_path, out_dir, config_path, embeddings_path;
  TrainConfig cfg;
  std::string mode = "pen_pwce";
  std::string proto_select = "mixture";
  double propensity_c = -1;  // <0 means automatic log(N)-1
  bool proto_softmax = false;

  CLI::Option *o_seed = nullptr, *o_epochs = nullptr, *o_batch = nullptr, *o_lr = nullptr,
              *o_window = nullptr, *o_rare = nullptr, *o_mode = nullptr, *o_dmodel = nullptr,
              *o_heads = nullptr, *o_clip = nullptr, *o_eval_every = nullptr, *o_beta_cb = nullptr,
              *o_gamma = nullptr, *o_opt = nullptr, *o_select = nullptr, *o_ffn = nullptr,
              *o_dp = nullptr, *o_softmax = nullptr, *o_pc = nullptr, *o_pe_base = nullptr;

  void add_common(CLI::App* cmd, bool with_mode) {
    cmd->add_option("--train", train_path, "training dataset (JSON Lines)")->required();
    cmd->add_option("--val", val_path, "validation dataset (JSON Lines)")->required();
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option("--config", config_path, "flat JSON config file (dotted keys)");
    cmd->add_option("--embeddings", embeddings_path, "word-vector file (token v1 .. v_dw)");
    o_seed = cmd->add_option("--seed", cfg.seed, "root seed");
    o_epochs = cmd->add_option("--epochs", cfg.epochs, "training epochs");
    o_batch = cmd->add_option("--batch", cfg.batch_size, "windows per step");
    o_lr = cmd->add_option("--lr", cfg.opt.lr, "learning rate");
    o_window = cmd->add_option("--window", cfg.model.window, "temporal window length");
    o_rare = cmd->add_option("--rare-threshold", cfg.loss.rare_threshold,
                             "training count below which a triplet class is rare");
    o_dmodel = cmd->add_option("--d-model", cfg.model.d_model, "encoder width");
    o_heads = cmd->add_option("--heads", cfg.model.heads, "attention heads");
    o_clip = cmd->add_option("--clip", cfg.clip_norm, "gradient clip (global norm)");
    o_eval_every = cmd->add_option("--eval-every", cfg.eval_every,
                                   "epochs between validation passes (0: final only)");
    o_beta_cb = cmd->add_option("--beta-cb", cfg.loss.beta_cb, "class-balance base");
    o_gamma = cmd->add_option("--gamma", cfg.loss.gamma, "focal exponent");
    o_opt = cmd->add_option("--optimizer", cfg.opt.kind, "adam|sgd");
    o_select = cmd->add_option("--proto-select", proto_select,
                               "prototype selection during training (mixture|teacher_forced)");
    o_ffn = cmd->add_option("--ffn-dim", cfg.model.ffn_dim, "encoder FFN width (0: 2*d_model)");
    o_dp = cmd->add_option("--d-p", cfg.model.d_p, "prototype feature dim (0: d_v)");
    o_softmax = cmd->add_flag("--proto-softmax-head", proto_softmax,
                              "softmax head on the prototype classifier");
    o_pc = cmd->add_option("--propensity-c", propensity_c,
                           "propensity coefficient override (<0: log(N)-1)");
    o_pe_base = cmd->add_option("--pe-base", cfg.model.pe_base, "positional encoding base");
    if (with_mode) o_mode = cmd->add_option("--mode", mode, "baseline|pen|pen_pwce");
  }

  void resolve(ConfigBag& bag, const CLI::Option* lambda_flag = nullptr) {
    if (!config_path.empty()) bag.load(config_path);
    bag.apply("train.seed", o_seed, cfg.seed);
    bag.apply("train.epochs", o_epochs, cfg.epochs);
    bag.apply("train.batch_size", o_batch, cfg.batch_size);
    bag.apply("train.clip_norm", o_clip, cfg.clip_norm);
    bag.apply("train.eval_every", o_eval_every, cfg.eval_every);
    bag.apply("opt.kind", o_opt, cfg.opt.kind);
    bag.apply("opt.lr", o_lr, cfg.opt.lr);
    bag.apply("opt.beta1", nullptr, cfg.opt.beta1);
    bag.apply("opt.beta2", nullptr, cfg.opt.beta2);
    bag.apply("opt.eps", nullptr, cfg.opt.eps);
    bag.apply("opt.momentum", nullptr, cfg.opt.momentum);
    bag.apply("loss.beta_cb", o_beta_cb, cfg.loss.beta_cb);
    bag.apply("loss.gamma", o_gamma, cfg.loss.gamma);
    bag.apply("loss.lambda", lambda_flag, cfg.loss.lambda);
    bag.apply("loss.rare_threshold", o_rare, cfg.loss.rare_threshold);
    bag.apply("loss.paper_literal", nullptr, cfg.loss.paper_literal);
    bag.apply("loss.propensity_c", o_pc, propensity_c);
    if (propensity_c >= 0) cfg.loss.propensity_c = propensity_c;
    bag.apply("model.d_model", o_dmodel, cfg.model.d_model);
    bag.apply("model.heads", o_heads, cfg.model.heads);
    bag.apply("model.window", o_window, cfg.model.window);
    bag.apply("model.pe_base", o_pe_base, cfg.model.pe_base);
    bag.apply("model.d_p", o_dp, cfg.model.d_p);
    bag.apply("model.proto_hidden", nullptr, cfg.model.proto_hidden);
    bag.apply("model.ffn_dim", o_ffn, cfg.model.ffn_dim);
    bag.apply("model.mode", o_mode, mode);
    bag.apply("model.proto_select", o_select, proto_select);
    bag.apply("model.proto_softmax_head", o_softmax, proto_softmax);
    cfg.model.mode = parse_mode(mode);
    cfg.model.proto_select = parse_proto_select(proto_select);
    cfg.model.proto_softmax_head = proto_softmax;
  }
};

int cmd_synth(const std::string& out_dir, SynthConfig cfg, const std::string& config_path,
              CLI::Option* flags[11]) {
  ConfigBag bag;
  if (!config_path.empty()) bag.load(config_path);
  bag.apply("synth.videos", flags[0], cfg.num_videos);
  bag.apply("synth.test_videos", flags[1], cfg.test_videos);
  bag.apply("synth.frames", flags[2], cfg.frames_per_video);
  bag.apply("synth.pairs", flags[3], cfg.pairs_per_frame);
  bag.apply("synth.bias", flags[4], cfg.bias_strength);
  bag.apply("synth.noise", flags[5], cfg.noise_rate);
  bag.apply("synth.tail", flags[6], cfg.tail_exponent);
  bag.apply("synth.objects", flags[7], cfg.num_object_categories);
  bag.apply("synth.d_v", flags[8], cfg.dims.d_v);
  bag.apply("synth.d_w", flags[9], cfg.dims.d_w);
  bag.apply("synth.d_g", flags[10], cfg.dims.d_g);
  bag.finish();
  cfg.validate();

  fs::path dir = ensure_out_dir(out_dir);
  ordered_json echo{{"command", "synth"},
                    {"out", out_dir},
                    {"seed", cfg.seed},
                    {"videos", cfg.num_videos},
                    {"test_videos", cfg.test_videos},
                    {"frames_per_video", cfg.frames_per_video},
                    {"pairs_per_frame", cfg.pairs_per_frame},
                    {"bias_strength", cfg.bias_strength},
                    {"noise_rate", cfg.noise_rate},
                    {"tail_exponent", cfg.tail_exponent},
                    {"object_categories", cfg.num_object_categories},
                    {"d_v", cfg.dims.d_v},
                    {"d_w", cfg.dims.d_w},
                    {"d_g", cfg.dims.d_g}};
  echo_config(echo, dir);

  SynthOutput out = generate_synthetic(cfg);
  write_dataset(out.train, (dir / "train.jsonl").string());
  write_dataset(out.test, (dir / "test.jsonl").string());
  write_ledger(out.ledger, (dir / "ledger.json").string());

  FrequencyTable freqs = compute_frequencies(out.train);
  std::string summary =
      strf("train: ", out.train.videos.size(), " videos, ", out.train.total_pairs(),
           " pair instances\n", "test: ", out.test.videos.size(), " videos, ",
           out.test.total_pairs(), " pair instances\n",
           "observed triplet classes in train: ", freqs.triplet_counts.size(), "\n");
  write_text_file((dir / "summary.txt").string(), summary);
  std::cout << summary;
  return 0;
}

int cmd_train(TrainFlags& tf, CLI::Option* lambda_flag) {
  ConfigBag bag;
  tf.resolve(bag, lambda_flag);
  bag.finish();

  Dataset train_data = load_dataset(tf.train_path);
  Dataset val_data = load_dataset(tf.val_path);
  tf.cfg.model.dims = train_data.dims;
  tf.cfg.model.resolve();
  tf.cfg.validate();

  fs::path dir = ensure_out_dir(tf.out_dir);
  ordered_json echo{
      {"command", "train"}, {"train", tf.train_path}, {"val", tf.val_path}, {"out", tf.out_dir}};
  echo["config"] = train_config_to_json(tf.cfg);
  echo_config(echo, dir);

  EmbeddingTable words = load_words(tf.embeddings_path, train_data.dims.d_w);
  TrainResult result = train(train_data, val_data, tf.cfg, words);

  save_checkpoint(result.checkpoint, (dir / "checkpoint.ckpt").string());
  write_train_log(result.log, (dir / "train_log.json").string());

  std::string summary;
  if (!result.log.steps.empty()) {
    summary += strf("steps: ", result.log.steps.size(), "\n");
    summary += strf("first loss: ", result.log.steps.front().total, "\n");
    summary += strf("final loss: ", result.log.steps.back().total, "\n");
  }
  for (const auto& e : result.log.epochs)
    summary += strf("epoch ", e.epoch, " val mAP full/non-rare/rare: ", e.val_map_full, " / ",
                    e.val_map_non_rare, " / ", e.val_map_rare, "\n");
  if (result.aborted) summary += strf("aborted: ", result.abort_reason, "\n");
  write_text_file((dir / "summary.txt").string(), summary);
  std::cout << summary;
  std::cerr << "wall clock: " << result.log.wall_seconds << " s\n";

  if (result.aborted) {
    std::cerr << "error: " << result.abort_reason << " (last good checkpoint saved)\n";
    return 2;
  }
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, const std::string& out_dir,
             int64_t rare_threshold, bool rare_given, int threads, const std::string& averaging) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  Dataset data = load_dataset(data_path);
  MapAveraging avg;
  if (averaging == "triplet")
    avg = MapAveraging::triplet;
  else if (averaging == "predicate")
    avg = MapAveraging::predicate;
  else
    throw ConfigError(strf("unknown averaging '", averaging, "' (want triplet|predicate)"));

  fs::path dir = ensure_out_dir(out_dir);
  ordered_json echo{{"command", "eval"},
                    {"ckpt", ckpt_path},
                    {"data", data_path},
                    {"out", out_dir},
                    {"threads", threads},
                    {"averaging", averaging},
                    {"rare_threshold",
                     rare_given ? rare_threshold : ckpt.train_cfg.loss.rare_threshold}};
  echo_config(echo, dir);

  EvalReport rep = evaluate_checkpoint(
      ckpt, data, threads, rare_given ? std::optional<int64_t>(rare_threshold) : std::nullopt, avg);
  write_eval_report(rep, data.label_space, (dir / "eval_report.json").string(),
                    (dir / "eval_report.txt").string(), (dir / "per_class_ap.csv").string(),
                    ckpt.train_freqs);
  std::cout << "mAP full/non-rare/rare: " << rep.map_full << " / " << rep.map_non_rare << " / "
            << rep.map_rare << "\n";
  return 0;
}

int cmd_sweep(TrainFlags& tf, std::string lambdas_str, CLI::Option* lambda_flag) {
  ConfigBag bag;
  tf.resolve(bag);
  bag.apply("sweep.lambdas", lambda_flag, lambdas_str);
  bag.finish();
  std::vector<double> lambdas = parse_lambda_list(lambdas_str);

  Dataset train_data = load_dataset(tf.train_path);
  Dataset val_data = load_dataset(tf.val_path);
  tf.cfg.model.dims = train_data.dims;
  tf.cfg.model.resolve();
  tf.cfg.validate();

  fs::path dir = ensure_out_dir(tf.out_dir);
  ordered_json echo{{"command", "sweep"},
                    {"train", tf.train_path},
                    {"val", tf.val_path},
                    {"out", tf.out_dir},
                    {"lambdas", lambdas}};
  echo["config"] = train_config_to_json(tf.cfg);
  echo_config(echo, dir);

  EmbeddingTable words = load_words(tf.embeddings_path, train_data.dims.d_w);
  SweepReport rep = lambda_sweep(train_data, val_data, tf.cfg, lambdas, words);
  write_sweep_report(rep, (dir / "sweep.json").string(), (dir / "sweep.txt").string());
  std::ifstream t(dir / "sweep.txt");
  std::cout << t.rdbuf();
  return rep.errors.empty() ? 0 : 2;
}

int cmd_ablate(TrainFlags& tf) {
  ConfigBag bag;
  tf.resolve(bag);
  bag.finish();

  Dataset train_data = load_dataset(tf.train_path);
  Dataset val_data = load_dataset(tf.val_path);
  tf.cfg.model.dims = train_data.dims;
  tf.cfg.model.resolve();
  tf.cfg.validate();

  fs::path dir = ensure_out_dir(tf.out_dir);
  ordered_json echo{
      {"command", "ablate"}, {"train", tf.train_path}, {"val", tf.val_path}, {"out", tf.out_dir}};
  echo["config"] = train_config_to_json(tf.cfg);
  echo_config(echo, dir);

  EmbeddingTable words = load_words(tf.embeddings_path, train_data.dims.d_w);
  AblationReport rep = ablation(train_data, val_data, tf.cfg, words);
  write_ablation_report(rep, (dir / "ablation.json").string(), (dir / "ablation.txt").string());
  std::ifstream t(dir / "ablation.txt");
  std::cout << t.rdbuf();
  return 0;
}

int cmd_gradcheck(const std::string& precision, double tol, double eps, int max_coords,
                  const std::string& out_dir, uint64_t seed, bool tol_given, bool eps_given) {
  if (precision != "f32" && precision != "f64")
    throw ConfigError(strf("unknown precision '", precision, "' (want f32|f64)"));
  double use_tol = tol_given ? tol : (precision == "f64" ? 1e-5 : 1e-2);
  double use_eps = eps_given ? eps : (precision == "f64" ? 1e-4 : 1e-3);

  fs::path dir = ensure_out_dir(out_dir);
  ordered_json echo{{"command", "gradcheck"},
                    {"precision", precision},
                    {"tol", use_tol},
                    {"eps", use_eps},
                    {"max_coords", max_coords},
                    {"seed", seed},
                    {"out", out_dir}};
  echo_config(echo, dir);

  std::vector<ModuleCheck> checks = precision == "f64"
                                        ? run_gradcheck_suite<double>(use_eps, max_coords, seed)
                                        : run_gradcheck_suite<float>(float(use_eps), max_coords, seed);
  write_gradcheck_report(checks, use_tol, (dir / "gradcheck.json").string(),
                         (dir / "gradcheck.txt").string());
  bool all_pass = true;
  for (const auto& c : checks) {
    std::cout << c.name << ": max_rel_err " << c.max_rel_err
              << (c.max_rel_err < use_tol ? "  PASS" : "  FAIL") << "\n";
    all_pass &= c.max_rel_err < use_tol;
  }
  return all_pass ? 0 : 1;
}

int cmd_embed_stats(const std::string& ckpt_path, const std::string& data_path,
                    const std::string& out_dir, int min_count, int threads) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  Dataset data = load_dataset(data_path);
  if (!(ckpt.labels == data.label_space))
    throw ConfigError("embed-stats: checkpoint and dataset label spaces differ");
  if (ckpt.model_cfg.mode == AblationMode::baseline)
    throw ConfigError("embed-stats: checkpoint has no prototype module (baseline mode)");

  fs::path dir = ensure_out_dir(out_dir);
  ordered_json echo{{"command", "embed-stats"}, {"ckpt", ckpt_path},      {"data", data_path},
                    {"out", out_dir},           {"min_count", min_count}, {"threads", threads}};
  echo_config(echo, dir);

  auto model = model_from_checkpoint(ckpt);
  auto preds = infer_dataset(*model, data, /*want_proto_features=*/true, threads);
  SeparabilityReport rep = separability_report(data, preds, min_count);
  write_separability_report(rep, data.label_space, (dir / "separability.json").string(),
                            (dir / "separability.txt").string());
  std::ifstream t(dir / "separability.txt");
  std::cout << t.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"human-object interaction relation head: synthesis, training, evaluation"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic train/test dataset pair");
  SynthConfig synth_cfg;
  std::string synth_out, synth_config;
  synth->add_option("--seed", synth_cfg.seed, "root seed")->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--config", synth_config, "flat JSON config file");
  CLI::Option* synth_flags[11];
  synth_flags[0] = synth->add_option("--videos", synth_cfg.num_videos, "training videos");
  synth_flags[1] = synth->add_option("--test-videos", synth_cfg.test_videos, "test videos");
  synth_flags[2] = synth->add_option("--frames", synth_cfg.frames_per_video, "frames per video");
  synth_flags[3] = synth->add_option("--pairs", synth_cfg.pairs_per_frame, "object tracks per video");
  synth_flags[4] = synth->add_option("--bias", synth_cfg.bias_strength, "object-verb correlation [0,1]");
  synth_flags[5] = synth->add_option("--noise", synth_cfg.noise_rate, "label flip/drop rate [0,1]");
  synth_flags[6] = synth->add_option("--tail", synth_cfg.tail_exponent, "predicate Zipf exponent");
  synth_flags[7] = synth->add_option("--objects", synth_cfg.num_object_categories, "object categories");
  synth_flags[8] = synth->add_option("--d-v", synth_cfg.dims.d_v, "visual feature dim");
  synth_flags[9] = synth->add_option("--d-w", synth_cfg.dims.d_w, "word vector dim");
  synth_flags[10] = synth->add_option("--d-g", synth_cfg.dims.d_g, "gaze feature dim");

  auto* train_cmd = app.add_subcommand("train", "train a relation head on a dataset");
  TrainFlags train_flags;
  train_flags.add_common(train_cmd, /*with_mode=*/true);
  CLI::Option* train_lambda = train_cmd->add_option("--lambda", train_flags.cfg.loss.lambda,
                                                    "weight of the propensity-weighted loss");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data, eval_out, eval_avg = "triplet";
  int64_t eval_rare = 25;
  int eval_threads = 1;
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset to evaluate")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  CLI::Option* eval_rare_flag =
      eval_cmd->add_option("--rare-threshold", eval_rare, "override the stored rare threshold");
  eval_cmd->add_option("--threads", eval_threads, "parallel inference threads");
  eval_cmd->add_option("--averaging", eval_avg, "triplet|predicate");

  auto* sweep_cmd = app.add_subcommand("sweep", "train/evaluate across a lambda list");
  TrainFlags sweep_flags;
  sweep_flags.add_common(sweep_cmd, /*with_mode=*/false);
  std::string sweep_lambdas = "0.5,0.8,1.0,1.5";
  CLI::Option* sweep_lambda_flag =
      sweep_cmd->add_option("--lambda", sweep_lambdas, "comma-separated lambda list");

  auto* ablate_cmd = app.add_subcommand("ablate", "baseline / pen / pen_pwce comparison");
  TrainFlags ablate_flags;
  ablate_flags.add_common(ablate_cmd, /*with_mode=*/false);

  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::string gc_precision = "f64", gc_out;
  double gc_tol = 0, gc_eps = 0;
  int gc_max_coords = 120;
  uint64_t gc_seed = 4242;
  gc_cmd->add_option("--precision", gc_precision, "f32|f64");
  CLI::Option* gc_tol_flag = gc_cmd->add_option("--tol", gc_tol, "max relative error to pass");
  CLI::Option* gc_eps_flag = gc_cmd->add_option("--eps", gc_eps, "finite-difference step");
  gc_cmd->add_option("--max-coords", gc_max_coords, "sampled coordinates per parameter");
  gc_cmd->add_option("--seed", gc_seed, "root seed");
  gc_cmd->add_option("--out", gc_out, "output directory")->required();

  auto* es_cmd = app.add_subcommand("embed-stats", "feature-space separability study");
  std::string es_ckpt, es_data, es_out;
  int es_min_count = 400, es_threads = 1;
  es_cmd->add_option("--ckpt", es_ckpt, "checkpoint file")->required();
  es_cmd->add_option("--data", es_data, "dataset")->required();
  es_cmd->add_option("--out", es_out, "output directory")->required();
  es_cmd->add_option("--min-count", es_min_count, "minimum per-class sample count");
  es_cmd->add_option("--threads", es_threads, "parallel inference threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_out, synth_cfg, synth_config, synth_flags);
    if (train_cmd->parsed()) return cmd_train(train_flags, train_lambda);
    if (eval_cmd->parsed())
      return cmd_eval(eval_ckpt, eval_data, eval_out, eval_rare, eval_rare_flag->count() > 0,
                      eval_threads, eval_avg);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags, sweep_lambdas, sweep_lambda_flag);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_flags);
    if (gc_cmd->parsed())
      return cmd_gradcheck(gc_precision, gc_tol, gc_eps, gc_max_coords, gc_out, gc_seed,
                           gc_tol_flag->count() > 0, gc_eps_flag->count() > 0);
    if (es_cmd->parsed()) return cmd_embed_stats(es_ckpt, es_data, es_out, es_min_count, es_threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e) ? 1 : 2;
  }
  return 0;
}
