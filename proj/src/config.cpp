#include "corrloc/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "corrloc/errors.hpp"

namespace corrloc {

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string item;
  while (std::getline(ss, item, '.')) {
    if (item.empty()) throw ConfigError("malformed key path '" + path + "'");
    parts.push_back(item);
  }
  if (parts.empty()) throw ConfigError("empty key path");
  return parts;
}

const nlohmann::json* find(const nlohmann::json& doc, const std::string& path) {
  const nlohmann::json* node = &doc;
  for (const auto& key : split_path(path)) {
    if (!node->is_object() || !node->contains(key)) return nullptr;
    node = &(*node)[key];
  }
  return node;
}

bool needs_sampling(const std::string& exp) { return exp != "tail_lemma" && exp != "bar_sweep"; }

}  // namespace

bool ExperimentConfig::has(const std::string& path) const {
  const auto* node = find(doc, path);
  return node && !node->is_null();
}

const nlohmann::json& ExperimentConfig::at(const std::string& path) const {
  const auto* node = find(doc, path);
  if (!node || node->is_null()) throw ConfigError("missing config field '" + path + "'");
  return *node;
}

void ExperimentConfig::throw_type_error(const std::string& path, const std::string& what) {
  throw ConfigError("config field '" + path + "' has the wrong type: " + what);
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: '" + assignment + "'");
  const auto parts = split_path(assignment.substr(0, eq));
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  nlohmann::json* node = &doc;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override path crosses a non-object at '" + parts[i] + "'");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = nlohmann::json::object();
  }
  if (!node->is_object()) throw ConfigError("override path crosses a non-object");
  (*node)[parts.back()] = value;
}

ExperimentConfig parse_config(nlohmann::json doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  cfg.doc = std::move(doc);
  cfg.experiment = cfg.get<std::string>("experiment");
  if (std::find(kExperiments.begin(), kExperiments.end(), cfg.experiment) == kExperiments.end())
    throw ConfigError("unknown experiment '" + cfg.experiment + "'");
  cfg.master_seed = cfg.get<std::uint64_t>("master_seed", 1);
  cfg.workers = cfg.get<int>("workers", 1);
  if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
  cfg.out = cfg.get<std::string>("out", "");
  if (needs_sampling(cfg.experiment)) {
    for (const char* key : {"model", "L", "d", "trials"})
      if (!cfg.has(key)) throw ConfigError(std::string("experiment ") + cfg.experiment + " needs '" + key + "'");
    cfg.trials = cfg.get<std::int64_t>("trials");
    if (cfg.trials < 1) throw ConfigError("trials must be at least 1");
    const int d = cfg.get<int>("d");
    if (d < 1 || d > 3) throw ConfigError("d must be in 1..3");
    if (cfg.get<std::int64_t>("L") < 2) throw ConfigError("L must be at least 2");
  } else if (cfg.experiment == "bar_sweep") {
    if (!cfg.has("model") && !cfg.has("models")) throw ConfigError("bar_sweep needs 'model' or 'models'");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  nlohmann::json doc = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(std::move(doc));
}

}  // namespace corrloc
