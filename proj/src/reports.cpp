#include "peohoi/reports.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace peohoi {

using nlohmann::ordered_json;

namespace {

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

void dump_json(const ordered_json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(strf("cannot open '", path, "' for writing"));
  out << j.dump(2) << "\n";
  if (!out) throw IoError(strf("write failed for '", path, "'"));
}

}  // namespace

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(strf("cannot open '", path, "' for writing"));
  out << content;
  if (!out) throw IoError(strf("write failed for '", path, "'"));
}

void write_eval_report(const EvalReport& rep, const LabelSpace& labels, const std::string& json_path,
                       const std::string& text_path, const std::string& csv_path,
                       const FrequencyTable& train_freqs) {
  ordered_json j;
  j["averaging"] = rep.averaging == MapAveraging::triplet ? "triplet" : "predicate";
  j["rare_threshold"] = rep.rare_threshold;
  j["map"] = {{"full", rep.map_full}, {"non_rare", rep.map_non_rare}, {"rare", rep.map_rare}};
  j["classes"] = {{"full", rep.classes_full},
                  {"non_rare", rep.classes_non_rare},
                  {"rare", rep.classes_rare}};
  ordered_json per_class = ordered_json::array();
  for (const auto& [key, ap] : rep.ap) {
    ordered_json row;
    row["object"] = key.first >= 0 ? labels.object_categories[key.first] : "*";
    row["predicate"] = labels.predicate_name(key.second);
    row["ap"] = ap;
    row["test_positives"] = rep.positives.at(key);
    int64_t train_count = key.first >= 0 ? train_freqs.triplet_count(key)
                                         : train_freqs.label_count(key.second);
    row["train_count"] = train_count;
    row["split"] = train_count < rep.rare_threshold ? "rare" : "non_rare";
    per_class.push_back(std::move(row));
  }
  j["per_class_ap"] = std::move(per_class);
  dump_json(j, json_path);

  std::string text;
  text += "mAP (fraction)   Full      Non-rare  Rare\n";
  text += "                 " + fmt(rep.map_full) + "    " + fmt(rep.map_non_rare) + "    " +
          fmt(rep.map_rare) + "\n";
  text += "classes          " + std::to_string(rep.classes_full) + " / " +
          std::to_string(rep.classes_non_rare) + " / " + std::to_string(rep.classes_rare) +
          "  (full / non-rare / rare, rare threshold " + std::to_string(rep.rare_threshold) + ")\n";
  write_text_file(text_path, text);

  std::string csv = "object,predicate,ap,test_positives,train_count,split\n";
  for (const auto& [key, ap] : rep.ap) {
    int64_t train_count = key.first >= 0 ? train_freqs.triplet_count(key)
                                         : train_freqs.label_count(key.second);
    csv += (key.first >= 0 ? labels.object_categories[key.first] : "*");
    csv += ',';
    csv += labels.predicate_name(key.second);
    csv += ',';
    csv += fmt(ap, 6);
    csv += ',';
    csv += std::to_string(rep.positives.at(key));
    csv += ',';
    csv += std::to_string(train_count);
    csv += ',';
    csv += train_count < rep.rare_threshold ? "rare" : "non_rare";
    csv += '\n';
  }
  write_text_file(csv_path, csv);
}

void write_sweep_report(const SweepReport& rep, const std::string& json_path,
                        const std::string& text_path) {
  ordered_json j;
  ordered_json rows = ordered_json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"lambda", r.lambda},
                    {"map_full", r.map_full},
                    {"map_non_rare", r.map_non_rare},
                    {"map_rare", r.map_rare}});
  j["rows"] = std::move(rows);
  if (rep.var_full) {
    j["variance"] = {{"full", *rep.var_full},
                     {"non_rare", *rep.var_non_rare},
                     {"rare", *rep.var_rare}};
  }
  if (!rep.errors.empty()) j["errors"] = rep.errors;
  dump_json(j, json_path);

  std::string text;
  text += "lambda   mAP@Full   mAP@Non-rare   mAP@Rare\n";
  for (const auto& r : rep.rows)
    text += fmt(r.lambda, 2) + "     " + fmt(r.map_full) + "     " + fmt(r.map_non_rare) +
            "         " + fmt(r.map_rare) + "\n";
  if (rep.var_full)
    text += "VAR      " + fmt(*rep.var_full) + "     " + fmt(*rep.var_non_rare) + "         " +
            fmt(*rep.var_rare) + "\n";
  for (const auto& e : rep.errors) text += "error: " + e + "\n";
  write_text_file(text_path, text);
}

void write_ablation_report(const AblationReport& rep, const std::string& json_path,
                           const std::string& text_path) {
  ordered_json j;
  ordered_json rows = ordered_json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"group", r.group},
                    {"pen", r.uses_pen},
                    {"pwce", r.uses_pwce},
                    {"map_full", r.map_full},
                    {"map_non_rare", r.map_non_rare},
                    {"map_rare", r.map_rare},
                    {"delta_full", r.delta_full},
                    {"delta_non_rare", r.delta_non_rare},
                    {"delta_rare", r.delta_rare}});
  j["rows"] = std::move(rows);
  dump_json(j, json_path);

  std::string text;
  text += "group      PEN  PWCE   Full     Non-rare  Rare      dFull    dNon-rare dRare\n";
  for (const auto& r : rep.rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %-4s %-5s  %.4f   %.4f    %.4f   %+.4f  %+.4f   %+.4f\n",
                  r.group.c_str(), r.uses_pen ? "yes" : "-", r.uses_pwce ? "yes" : "-", r.map_full,
                  r.map_non_rare, r.map_rare, r.delta_full, r.delta_non_rare, r.delta_rare);
    text += line;
  }
  write_text_file(text_path, text);
}

void write_separability_report(const SeparabilityReport& rep, const LabelSpace& labels,
                               const std::string& json_path, const std::string& text_path) {
  auto sil = [](const SilhouetteResult& r) {
    ordered_json j;
    j["computable"] = r.computable;
    if (r.computable) {
      j["silhouette"] = r.score;
      j["classes"] = r.classes;
      j["samples"] = r.samples;
    }
    return j;
  };
  ordered_json j;
  j["min_count"] = rep.min_count;
  j["raw_union_features"] = sil(rep.raw);
  j["prototype_features"] = sil(rep.proto);
  ordered_json counts = ordered_json::array();
  for (const auto& [cls, n] : rep.class_counts)
    counts.push_back({{"predicate", labels.predicate_name(cls)}, {"samples", n}});
  j["class_counts"] = std::move(counts);
  dump_json(j, json_path);

  std::string text;
  auto line = [&](const char* name, const SilhouetteResult& r) {
    if (r.computable)
      text += strf(name, ": silhouette ", fmt(r.score), " over ", r.samples, " samples in ",
                   r.classes, " classes\n");
    else
      text += strf(name, ": not computable (need >= 2 classes with >= min_count samples)\n");
  };
  line("raw union features  ", rep.raw);
  line("prototype features  ", rep.proto);
  write_text_file(text_path, text);
}

void write_train_log(const TrainLog& log, const std::string& json_path) {
  ordered_json j;
  ordered_json steps = ordered_json::array();
  for (const auto& s : log.steps)
    steps.push_back({{"step", s.step},
                     {"focal", s.focal},
                     {"pwce", s.pwce},
                     {"total", s.total},
                     {"grad_norm", s.grad_norm}});
  j["steps"] = std::move(steps);
  ordered_json epochs = ordered_json::array();
  for (const auto& e : log.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"val_map_full", e.val_map_full},
                      {"val_map_non_rare", e.val_map_non_rare},
                      {"val_map_rare", e.val_map_rare}});
  j["epochs"] = std::move(epochs);
  dump_json(j, json_path);
}

void write_gradcheck_report(const std::vector<ModuleCheck>& checks, double tolerance,
                            const std::string& json_path, const std::string& text_path) {
  ordered_json j;
  j["tolerance"] = tolerance;
  ordered_json rows = ordered_json::array();
  bool all_pass = true;
  for (const auto& c : checks) {
    bool pass = c.max_rel_err < tolerance;
    all_pass &= pass;
    rows.push_back({{"module", c.name},
                    {"max_rel_err", c.max_rel_err},
                    {"worst_param", c.worst_param},
                    {"coords", c.coords},
                    {"pass", pass}});
  }
  j["modules"] = std::move(rows);
  j["all_pass"] = all_pass;
  dump_json(j, json_path);

  std::string text;
  for (const auto& c : checks) {
    char line[192];
    std::snprintf(line, sizeof line, "%-18s max_rel_err %.3e  (%d coords, worst %s)  %s\n",
                  c.name.c_str(), c.max_rel_err, c.coords, c.worst_param.c_str(),
                  c.max_rel_err < tolerance ? "PASS" : "FAIL");
    text += line;
  }
  write_text_file(text_path, text);
}

}  // namespace peohoi
