#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "seea/model.hpp"
#include "seea/train.hpp"

namespace seea {

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j, std::vector<std::string>& issues);

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, std::vector<std::string>& issues);

/// Either a dataset directory or a synthetic corpus specification.
struct DataSpec {
  std::string root;          // empty when synthetic
  int synth_n = 0;           // total synthetic samples (split like a directory set)
  int synth_size = 64;       // synthetic image side
  double split_fraction = 0.8;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataSpec data;
  std::string out_dir;
};

/// Parses a JSON run-configuration file. Every invalid or malformed field is
/// reported in a single ConfigError.
RunConfig run_config_from_file(const std::string& path);

}  // namespace seea
