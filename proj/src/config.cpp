#include "listreader/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace listreader {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + key + "' in " + where);
}

const json* section(const json& root, const std::string& name) {
  if (!root.contains(name)) return nullptr;
  const json& s = root.at(name);
  if (!s.is_object()) throw ConfigError("config: section '" + name + "' must be an object");
  return &s;
}

template <typename T>
void read_key(const json& obj, const std::string& key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: key '" + key + "' in " + where + " has the wrong type");
  }
}

}  // namespace

AppConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown_keys(root, {"model", "training", "data", "ablation"}, "the top level");

  AppConfig cfg;
  if (const json* m = section(root, "model")) {
    reject_unknown_keys(
        *m, {"hidden", "encoder_layers", "heads", "max_length", "interaction_layers"}, "model");
    read_key(*m, "hidden", cfg.training.model.hidden, "model");
    read_key(*m, "encoder_layers", cfg.training.model.encoder_layers, "model");
    read_key(*m, "heads", cfg.training.model.heads, "model");
    read_key(*m, "max_length", cfg.training.model.max_length, "model");
    read_key(*m, "interaction_layers", cfg.training.model.interaction_layers, "model");
  }
  if (const json* t = section(root, "training")) {
    reject_unknown_keys(*t,
                        {"batch_size", "learning_rate", "lambda", "max_epochs",
                         "early_stop_patience", "seed"},
                        "training");
    read_key(*t, "batch_size", cfg.training.batch_size, "training");
    read_key(*t, "learning_rate", cfg.training.learning_rate, "training");
    read_key(*t, "lambda", cfg.training.lambda, "training");
    read_key(*t, "max_epochs", cfg.training.max_epochs, "training");
    read_key(*t, "early_stop_patience", cfg.training.early_stop_patience, "training");
    read_key(*t, "seed", cfg.training.seed, "training");
  }
  if (const json* d = section(root, "data")) {
    reject_unknown_keys(*d, {"vocab_min_count"}, "data");
    read_key(*d, "vocab_min_count", cfg.training.vocab_min_count, "data");
  }
  if (const json* a = section(root, "ablation")) {
    reject_unknown_keys(*a, {"name"}, "ablation");
    read_key(*a, "name", cfg.training.ablation, "ablation");
  }
  cfg.training.validate();
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read config file " + path);
  std::stringstream buffer;
  buffer << is.rdbuf();
  return config_from_json(buffer.str());
}

std::string config_to_json(const AppConfig& cfg) {
  json j;
  j["model"] = {{"hidden", cfg.training.model.hidden},
                {"encoder_layers", cfg.training.model.encoder_layers},
                {"heads", cfg.training.model.heads},
                {"max_length", cfg.training.model.max_length},
                {"interaction_layers", cfg.training.model.interaction_layers}};
  j["training"] = {{"batch_size", cfg.training.batch_size},
                   {"learning_rate", cfg.training.learning_rate},
                   {"lambda", cfg.training.lambda},
                   {"max_epochs", cfg.training.max_epochs},
                   {"early_stop_patience", cfg.training.early_stop_patience},
                   {"seed", cfg.training.seed}};
  j["data"] = {{"vocab_min_count", cfg.training.vocab_min_count}};
  j["ablation"] = {{"name", cfg.training.ablation}};
  return j.dump(2) + "\n";
}

}  // namespace listreader
