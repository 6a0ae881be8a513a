#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corrloc/config.hpp"
#include "corrloc/stats.hpp"

namespace corrloc {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "corrloc 0.1.0";

struct TrialRecord {
  std::int64_t trial = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::vector<double> payload;
};

struct NamedReport {
  std::string name;
  TestReport report;
};

/// One experiment kind. Construction does all deterministic preparation;
/// run_trial is const and may be called from several threads at once.
class Experiment {
 public:
  virtual ~Experiment() = default;
  virtual std::vector<std::string> columns() const = 0;
  virtual std::int64_t trial_count() const = 0;
  /// Payload for one trial; throws corrloc::Error on a per-trial failure.
  virtual std::vector<double> run_trial(std::int64_t index, std::uint64_t master_seed) const = 0;
  virtual std::vector<NamedReport> aggregate(const std::vector<TrialRecord>& records) const = 0;
  /// Deterministic quantities (scales, bar solution) echoed into the manifest.
  virtual nlohmann::json context() const { return nlohmann::json::object(); }
  /// Two-column plot-data files.
  virtual void write_plots(const std::vector<TrialRecord>& records, const std::string& dir) const;
};

std::unique_ptr<Experiment> make_experiment(const ExperimentConfig& cfg);

struct RunResult {
  std::string dir;
  nlohmann::json manifest;
  std::vector<TrialRecord> records;
  std::vector<NamedReport> reports;
  std::int64_t failed = 0;
};

/// Runs all trials, appending records.csv in trial order, then writes
/// manifest.json. Resumes from the last complete trial of an existing
/// records.csv with a matching header.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);
/// Same, with an already constructed experiment.
RunResult run_experiment(const Experiment& exp, const ExperimentConfig& cfg, const std::string& out_dir);

/// `--out`, else config "out", else $CORRLOC_OUT/<experiment>-<seed>, else
/// runs/<experiment>-<seed>.
std::string resolve_out_dir(const ExperimentConfig& cfg, const std::string& cli_out);

std::vector<TrialRecord> read_records(const std::string& path, const std::vector<std::string>& columns);

struct ReportSummary {
  std::vector<NamedReport> reports;
  bool all_pass = true;
};

/// Re-aggregate a finished run, write tables/ and plots/ under it and print
/// one PASS/FAIL line per criterion.
ReportSummary report(const std::string& run_dir, std::ostream& out);

}  // namespace corrloc
