#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace corrloc {

inline const std::vector<std::string> kExperiments = {
    "potential_extremes", "eigenvalue_stats", "localisation", "rank_permutation",
    "tail_lemma",         "macro_meso",       "bar_sweep"};

/// Validated experiment configuration. `doc` keeps the full JSON document
/// (overrides applied) and is echoed into the run manifest.
struct ExperimentConfig {
  nlohmann::json doc;
  std::string experiment;
  std::int64_t trials = 0;
  std::uint64_t master_seed = 1;
  int workers = 1;
  std::string out;

  bool has(const std::string& path) const;
  /// Value at a dot-path; ConfigError when absent or of the wrong type.
  const nlohmann::json& at(const std::string& path) const;

  template <class T>
  T get(const std::string& path) const {
    try {
      return at(path).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw_type_error(path, e.what());
    }
  }

  template <class T>
  T get(const std::string& path, T fallback) const {
    return has(path) ? get<T>(path) : fallback;
  }

 private:
  [[noreturn]] static void throw_type_error(const std::string& path, const std::string& what);
};

/// "a.b.c=value": value parsed as JSON, or taken as a string when that fails.
void apply_override(nlohmann::json& doc, const std::string& assignment);

ExperimentConfig parse_config(nlohmann::json doc);
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace corrloc
