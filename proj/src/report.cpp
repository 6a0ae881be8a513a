#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "corrloc/errors.hpp"
#include "corrloc/harness.hpp"

namespace corrloc {

namespace fs = std::filesystem;

ReportSummary report(const std::string& run_dir, std::ostream& out) {
  const fs::path dir(run_dir);
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw Error("no manifest.json in " + run_dir);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("manifest.json: ") + e.what());
  }
  if (!manifest.contains("schema_version") || manifest["schema_version"] != kSchemaVersion)
    throw SchemaError("manifest schema_version is not " + std::to_string(kSchemaVersion));
  if (!manifest.contains("config")) throw SchemaError("manifest has no config");

  const ExperimentConfig cfg = parse_config(manifest["config"]);
  const auto exp = make_experiment(cfg);
  const auto records = read_records((dir / "records.csv").string(), exp->columns());
  if (records.empty()) throw Error("run has no completed trials");

  ReportSummary summary;
  summary.reports = exp->aggregate(records);

  fs::create_directories(dir / "tables");
  fs::create_directories(dir / "plots");
  std::ofstream table(dir / "tables" / "summary.csv");
  table << "name,statistic,threshold,n,pass\n";
  char buf[256];
  for (const auto& [name, r] : summary.reports) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%zu,%d\n", name.c_str(), r.statistic, r.threshold, r.n,
                  r.pass ? 1 : 0);
    table << buf;
    std::snprintf(buf, sizeof buf, "%s %s statistic=%.6g threshold=%.6g n=%zu", r.pass ? "PASS" : "FAIL",
                  name.c_str(), r.statistic, r.threshold, r.n);
    out << buf << "\n";
    summary.all_pass = summary.all_pass && r.pass;
  }
  exp->write_plots(records, (dir / "plots").string());
  return summary;
}

}  // namespace corrloc
