// Private JSON (de)serialization for the flat config document shared by the
// CLI config file and checkpoints. Kept out of public headers so installed
// headers do not depend on the vendored json library.
#pragma once

#include <json.hpp>
#include <string>

#include "adagtcn/harness.hpp"
#include "adagtcn/model.hpp"

namespace adagtcn::detail {

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc);

/// The flat key-value config document: one object holding both model and
/// training keys. Unknown keys are rejected.
struct FlatConfig {
  ModelConfig model;
  TrainConfig train;
};
FlatConfig flat_config_from_json(const nlohmann::json& doc);
nlohmann::json flat_config_to_json(const FlatConfig& config);

const std::vector<std::string>& model_config_keys();
const std::vector<std::string>& train_config_keys();

}  // namespace adagtcn::detail
