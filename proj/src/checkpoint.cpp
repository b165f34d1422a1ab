#include <cstring>
#include <fstream>

#include "peohoi/config_json.hpp"
#include "peohoi/trainer.hpp"

namespace peohoi {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json model_config_to_json(const ModelConfig& cfg) {
  return ordered_json{{"d_v", cfg.dims.d_v},
                      {"d_w", cfg.dims.d_w},
                      {"d_g", cfg.dims.d_g},
                      {"d_model", cfg.d_model},
                      {"heads", cfg.heads},
                      {"window", cfg.window},
                      {"pe_base", cfg.pe_base},
                      {"d_p", cfg.d_p},
                      {"proto_hidden", cfg.proto_hidden},
                      {"ffn_dim", cfg.ffn_dim},
                      {"mode", mode_name(cfg.mode)},
                      {"proto_select", cfg.proto_select == ProtoSelect::mixture ? "mixture"
                                                                                : "teacher_forced"},
                      {"proto_softmax_head", cfg.proto_softmax_head}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.dims.d_v = j.at("d_v").get<int>();
  cfg.dims.d_w = j.at("d_w").get<int>();
  cfg.dims.d_g = j.at("d_g").get<int>();
  cfg.d_model = j.at("d_model").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.window = j.at("window").get<int>();
  cfg.pe_base = j.at("pe_base").get<double>();
  cfg.d_p = j.at("d_p").get<int>();
  cfg.proto_hidden = j.at("proto_hidden").get<int>();
  cfg.ffn_dim = j.at("ffn_dim").get<int>();
  cfg.mode = parse_mode(j.at("mode").get<std::string>());
  cfg.proto_select = parse_proto_select(j.at("proto_select").get<std::string>());
  cfg.proto_softmax_head = j.at("proto_softmax_head").get<bool>();
  return cfg;
}

ordered_json loss_config_to_json(const LossConfig& cfg) {
  ordered_json j{{"beta_cb", cfg.beta_cb},
                 {"gamma", cfg.gamma},
                 {"lambda", cfg.lambda},
                 {"rare_threshold", cfg.rare_threshold},
                 {"paper_literal", cfg.paper_literal}};
  if (cfg.propensity_c) j["propensity_c"] = *cfg.propensity_c;
  return j;
}

LossConfig loss_config_from_json(const json& j) {
  LossConfig cfg;
  cfg.beta_cb = j.at("beta_cb").get<double>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.lambda = j.at("lambda").get<double>();
  cfg.rare_threshold = j.at("rare_threshold").get<int64_t>();
  cfg.paper_literal = j.at("paper_literal").get<bool>();
  if (j.contains("propensity_c")) cfg.propensity_c = j.at("propensity_c").get<double>();
  return cfg;
}

ordered_json train_config_to_json(const TrainConfig& cfg) {
  return ordered_json{{"seed", cfg.seed},
                      {"epochs", cfg.epochs},
                      {"batch_size", cfg.batch_size},
                      {"clip_norm", cfg.clip_norm},
                      {"eval_every", cfg.eval_every},
                      {"optimizer",
                       {{"kind", cfg.opt.kind},
                        {"lr", cfg.opt.lr},
                        {"beta1", cfg.opt.beta1},
                        {"beta2", cfg.opt.beta2},
                        {"eps", cfg.opt.eps},
                        {"momentum", cfg.opt.momentum}}},
                      {"loss", loss_config_to_json(cfg.loss)},
                      {"model", model_config_to_json(cfg.model)}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.clip_norm = j.at("clip_norm").get<double>();
  cfg.eval_every = j.at("eval_every").get<int>();
  const json& o = j.at("optimizer");
  cfg.opt.kind = o.at("kind").get<std::string>();
  cfg.opt.lr = o.at("lr").get<double>();
  cfg.opt.beta1 = o.at("beta1").get<double>();
  cfg.opt.beta2 = o.at("beta2").get<double>();
  cfg.opt.eps = o.at("eps").get<double>();
  cfg.opt.momentum = o.at("momentum").get<double>();
  cfg.loss = loss_config_from_json(j.at("loss"));
  cfg.model = model_config_from_json(j.at("model"));
  return cfg;
}

ordered_json label_space_to_json(const LabelSpace& ls) {
  return ordered_json{{"objects", ls.object_categories},
                      {"spatial", ls.spatial_predicates},
                      {"action", ls.action_predicates}};
}

LabelSpace label_space_from_json(const json& j) {
  LabelSpace ls;
  ls.object_categories = j.at("objects").get<std::vector<std::string>>();
  ls.spatial_predicates = j.at("spatial").get<std::vector<std::string>>();
  ls.action_predicates = j.at("action").get<std::vector<std::string>>();
  return ls;
}

ordered_json freqs_to_json(const FrequencyTable& t) {
  ordered_json triplets = ordered_json::array();
  for (const auto& [key, count] : t.triplet_counts)
    triplets.push_back(ordered_json::array({key.first, key.second, count}));
  return ordered_json{{"total_pairs", t.total_pairs},
                      {"label_counts", t.label_counts},
                      {"triplet_counts", std::move(triplets)}};
}

FrequencyTable freqs_from_json(const json& j) {
  FrequencyTable t;
  t.total_pairs = j.at("total_pairs").get<int64_t>();
  t.label_counts = j.at("label_counts").get<std::vector<int64_t>>();
  for (const auto& row : j.at("triplet_counts"))
    t.triplet_counts[{row.at(0).get<int>(), row.at(1).get<int>()}] = row.at(2).get<int64_t>();
  return t;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ordered_json manifest;
  manifest["schema"] = "peohoi-ckpt/v1";
  ordered_json params = ordered_json::array();
  int64_t offset = 0;
  for (const auto& [name, value] : ckpt.params) {
    if (!value.all_finite()) throw NumericError(strf("checkpoint: non-finite values in '", name, "'"));
    params.push_back({{"name", name}, {"shape", value.shape}, {"offset", offset}});
    offset += value.numel();
  }
  manifest["params"] = std::move(params);
  manifest["config"] = ordered_json{{"model", model_config_to_json(ckpt.model_cfg)},
                                    {"train", train_config_to_json(ckpt.train_cfg)},
                                    {"labels", label_space_to_json(ckpt.labels)},
                                    {"freqs", freqs_to_json(ckpt.train_freqs)}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(strf("cannot open '", path, "' for writing"));
  out << manifest.dump() << "\n";
  for (const auto& [name, value] : ckpt.params)
    out.write(reinterpret_cast<const char*>(value.data.data()),
              std::streamsize(value.data.size() * sizeof(float)));
  if (!out) throw IoError(strf("write failed for '", path, "'"));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(strf("cannot open checkpoint '", path, "'"));
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("checkpoint: missing manifest line");
  json manifest;
  try {
    manifest = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(strf("checkpoint: malformed manifest: ", e.what()));
  }
  if (manifest.value("schema", "") != "peohoi-ckpt/v1")
    throw SchemaError(strf("checkpoint: unsupported schema '", manifest.value("schema", "(none)"),
                           "', want 'peohoi-ckpt/v1'"));

  Checkpoint ckpt;
  const json& cfg = manifest.at("config");
  ckpt.model_cfg = model_config_from_json(cfg.at("model"));
  ckpt.train_cfg = train_config_from_json(cfg.at("train"));
  ckpt.labels = label_space_from_json(cfg.at("labels"));
  ckpt.train_freqs = freqs_from_json(cfg.at("freqs"));

  std::string blob(std::istreambuf_iterator<char>(in), {});
  int64_t expected = 0;
  for (const auto& pj : manifest.at("params")) {
    std::vector<int> shape = pj.at("shape").get<std::vector<int>>();
    int64_t offset = pj.at("offset").get<int64_t>();
    if (offset != expected)
      throw SchemaError(strf("checkpoint: parameter '", pj.at("name").get<std::string>(),
                             "' offset ", offset, " does not match running total ", expected));
    expected += Tensor<float>::numel_of(shape);
  }
  if (int64_t(blob.size()) != expected * int64_t(sizeof(float)))
    throw SchemaError(strf("checkpoint: blob holds ", blob.size(), " bytes, manifest expects ",
                           expected * sizeof(float)));

  const char* base = blob.data();
  for (const auto& pj : manifest.at("params")) {
    std::string name = pj.at("name").get<std::string>();
    std::vector<int> shape = pj.at("shape").get<std::vector<int>>();
    int64_t offset = pj.at("offset").get<int64_t>();
    Tensor<float> value(shape);
    std::memcpy(value.data.data(), base + offset * sizeof(float), value.data.size() * sizeof(float));
    ckpt.params.push_back({std::move(name), std::move(value)});
  }
  return ckpt;
}

std::unique_ptr<Model<float>> model_from_checkpoint(const Checkpoint& ckpt) {
  EmbeddingTable words(ckpt.model_cfg.dims.d_w);
  auto model = std::make_unique<Model<float>>(ckpt.model_cfg, ckpt.labels, words,
                                              ckpt.train_cfg.seed);
  if (model->params.size() != ckpt.params.size())
    throw SchemaError(strf("checkpoint holds ", ckpt.params.size(), " parameters, model expects ",
                           model->params.size()));
  for (const auto& [name, value] : ckpt.params) {
    Parameter<float>* p = model->params.find(name);
    if (!p) throw SchemaError(strf("checkpoint parameter '", name, "' is unknown to this model"));
    if (p->value.shape != value.shape)
      throw SchemaError(strf("checkpoint parameter '", name, "' has the wrong shape"));
    p->value = value;
  }
  return model;
}

}  // namespace peohoi
