#include "seea/run_config.hpp"

#include <fstream>

namespace seea {

namespace {

template <typename V>
void read_field(const nlohmann::json& j, const char* key, V& out, const char* section,
                std::vector<std::string>& issues) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    issues.push_back(std::string(section) + "." + key + ": wrong type");
  }
}

}  // namespace

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["arch"] = arch_name(cfg.arch);
  j["input_size"] = {cfg.input_h, cfg.input_w};
  j["in_channels"] = cfg.in_channels;
  j["base_filters"] = cfg.base_filters;
  j["depth"] = cfg.depth;
  j["se_reduction"] = cfg.se_reduction;
  j["se_on_bottleneck"] = cfg.se_on_bottleneck;
  j["se_bias"] = cfg.se_bias;
  j["se_stages"] = cfg.se_stages;
  j["attention_f_int_ratio"] = cfg.attention_f_int_ratio;
  j["out_channels"] = cfg.out_channels;
  j["final_batchnorm"] = cfg.final_batchnorm;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j, std::vector<std::string>& issues) {
  ModelConfig cfg;
  if (j.contains("arch")) {
    try {
      cfg.arch = parse_arch(j.at("arch").get<std::string>());
    } catch (const std::exception& e) {
      issues.push_back(std::string("model.arch: ") + e.what());
    }
  }
  if (j.contains("input_size")) {
    try {
      const auto v = j.at("input_size").get<std::vector<int>>();
      if (v.size() == 2) {
        cfg.input_h = v[0];
        cfg.input_w = v[1];
      } else if (v.size() == 1) {
        cfg.input_h = cfg.input_w = v[0];
      } else {
        issues.push_back("model.input_size: expected [H, W]");
      }
    } catch (const nlohmann::json::exception&) {
      issues.push_back("model.input_size: wrong type");
    }
  }
  read_field(j, "in_channels", cfg.in_channels, "model", issues);
  read_field(j, "base_filters", cfg.base_filters, "model", issues);
  read_field(j, "depth", cfg.depth, "model", issues);
  read_field(j, "se_reduction", cfg.se_reduction, "model", issues);
  read_field(j, "se_on_bottleneck", cfg.se_on_bottleneck, "model", issues);
  read_field(j, "se_bias", cfg.se_bias, "model", issues);
  read_field(j, "se_stages", cfg.se_stages, "model", issues);
  read_field(j, "attention_f_int_ratio", cfg.attention_f_int_ratio, "model", issues);
  read_field(j, "out_channels", cfg.out_channels, "model", issues);
  read_field(j, "final_batchnorm", cfg.final_batchnorm, "model", issues);
  return cfg;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["epochs"] = cfg.epochs;
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  if (cfg.early_stop_patience) {
    j["early_stop_patience"] = *cfg.early_stop_patience;
  } else {
    j["early_stop_patience"] = nullptr;
  }
  j["focal"] = {{"gamma", cfg.loss.gamma},
                {"alpha", cfg.loss.alpha},
                {"epsilon_clip", cfg.loss.epsilon_clip}};
  nlohmann::ordered_json jm;
  jm["smooth"] = cfg.metric.smooth;
  if (cfg.metric.threshold) {
    jm["threshold"] = *cfg.metric.threshold;
  } else {
    jm["threshold"] = nullptr;
  }
  j["jaccard"] = jm;
  j["adam"] = {{"beta1", cfg.adam_beta1}, {"beta2", cfg.adam_beta2}, {"epsilon", cfg.adam_epsilon}};
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, std::vector<std::string>& issues) {
  TrainConfig cfg;
  read_field(j, "epochs", cfg.epochs, "train", issues);
  read_field(j, "lr", cfg.lr, "train", issues);
  read_field(j, "batch_size", cfg.batch_size, "train", issues);
  read_field(j, "seed", cfg.seed, "train", issues);
  if (j.contains("early_stop_patience") && !j.at("early_stop_patience").is_null()) {
    int p = 0;
    read_field(j, "early_stop_patience", p, "train", issues);
    cfg.early_stop_patience = p;
  }
  if (j.contains("focal")) {
    const auto& f = j.at("focal");
    read_field(f, "gamma", cfg.loss.gamma, "train.focal", issues);
    read_field(f, "alpha", cfg.loss.alpha, "train.focal", issues);
    read_field(f, "epsilon_clip", cfg.loss.epsilon_clip, "train.focal", issues);
  }
  if (j.contains("jaccard")) {
    const auto& m = j.at("jaccard");
    read_field(m, "smooth", cfg.metric.smooth, "train.jaccard", issues);
    if (m.contains("threshold") && !m.at("threshold").is_null()) {
      float t = 0.5f;
      read_field(m, "threshold", t, "train.jaccard", issues);
      cfg.metric.threshold = t;
    }
  }
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    read_field(a, "beta1", cfg.adam_beta1, "train.adam", issues);
    read_field(a, "beta2", cfg.adam_beta2, "train.adam", issues);
    read_field(a, "epsilon", cfg.adam_epsilon, "train.adam", issues);
  }
  return cfg;
}

RunConfig run_config_from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError({std::string("config parse error: ") + e.what()});
  }

  std::vector<std::string> issues;
  RunConfig cfg;
  if (j.contains("model")) cfg.model = model_config_from_json(j.at("model"), issues);
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"), issues);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    read_field(d, "root", cfg.data.root, "data", issues);
    read_field(d, "synth", cfg.data.synth_n, "data", issues);
    read_field(d, "synth_size", cfg.data.synth_size, "data", issues);
    read_field(d, "split_fraction", cfg.data.split_fraction, "data", issues);
    if (!cfg.data.root.empty() && cfg.data.synth_n > 0) {
      issues.push_back("data: root and synth are mutually exclusive");
    }
  }
  read_field(j, "out", cfg.out_dir, "run", issues);

  // Surface model/train invariant violations in the same pass.
  for (const auto& s : cfg.model.validate()) issues.push_back("model: " + s);
  for (const auto& s : cfg.train.validate()) issues.push_back("train: " + s);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

}  // namespace seea
