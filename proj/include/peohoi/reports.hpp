#pragma once

#include "peohoi/experiments.hpp"
#include "peohoi/gradcheck_suite.hpp"

// Writers for machine-readable (JSON/CSV) and aligned-text result files.
// Output is deterministic: no timestamps, fixed formatting, fixed ordering.

namespace peohoi {

void write_eval_report(const EvalReport& rep, const LabelSpace& labels, const std::string& json_path,
                       const std::string& text_path, const std::string& csv_path,
                       const FrequencyTable& train_freqs);

void write_sweep_report(const SweepReport& rep, const std::string& json_path,
                        const std::string& text_path);

void write_ablation_report(const AblationReport& rep, const std::string& json_path,
                           const std::string& text_path);

void write_separability_report(const SeparabilityReport& rep, const LabelSpace& labels,
                               const std::string& json_path, const std::string& text_path);

void write_train_log(const TrainLog& log, const std::string& json_path);

void write_gradcheck_report(const std::vector<ModuleCheck>& checks, double tolerance,
                            const std::string& json_path, const std::string& text_path);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace peohoi
