#pragma once

#include "json.hpp"
#include "peohoi/trainer.hpp"

namespace peohoi {

// JSON forms used by the checkpoint manifest and the CLI's config echo.
nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json loss_config_to_json(const LossConfig& cfg);
LossConfig loss_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json label_space_to_json(const LabelSpace& ls);
LabelSpace label_space_from_json(const nlohmann::json& j);

nlohmann::ordered_json freqs_to_json(const FrequencyTable& t);
FrequencyTable freqs_from_json(const nlohmann::json& j);

}  // namespace peohoi
