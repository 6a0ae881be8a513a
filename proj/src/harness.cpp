#include "corrloc/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "corrloc/errors.hpp"
#include "corrloc/rng.hpp"

namespace corrloc {

namespace fs = std::filesystem;

namespace {

std::string header_line(const std::vector<std::string>& columns) {
  std::string h = "trial,seed,status";
  for (const auto& c : columns) h += "," + c;
  return h;
}

std::string format_record(const TrialRecord& r) {
  std::string line = std::to_string(r.trial) + "," + std::to_string(r.seed) + "," + (r.ok ? "ok" : "failed");
  char buf[40];
  for (double v : r.payload) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    line += buf;
  }
  return line;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Parses one data line; nullopt when the line is truncated or malformed.
std::optional<TrialRecord> parse_record(const std::string& line, std::size_t n_columns) {
  const auto cells = split(line);
  if (cells.size() != n_columns + 3) return std::nullopt;
  TrialRecord r;
  try {
    std::size_t used = 0;
    r.trial = std::stoll(cells[0], &used);
    if (used != cells[0].size()) return std::nullopt;
    r.seed = std::stoull(cells[1], &used);
    if (used != cells[1].size()) return std::nullopt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (cells[2] == "ok") {
    r.ok = true;
  } else if (cells[2] == "failed") {
    r.ok = false;
  } else {
    return std::nullopt;
  }
  for (std::size_t i = 3; i < cells.size(); ++i) {
    char* end = nullptr;
    const double v = std::strtod(cells[i].c_str(), &end);
    if (cells[i].empty() || end != cells[i].c_str() + cells[i].size()) return std::nullopt;
    r.payload.push_back(v);
  }
  return r;
}

}  // namespace

std::vector<TrialRecord> read_records(const std::string& path, const std::vector<std::string>& columns) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) return {};
  if (line != header_line(columns)) throw SchemaError("records header does not match the experiment columns");
  std::vector<TrialRecord> out;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // last line without newline is an interrupted write
    auto r = parse_record(line, columns.size());
    if (!r || r->trial != static_cast<std::int64_t>(out.size())) break;
    out.push_back(std::move(*r));
  }
  return out;
}

std::string resolve_out_dir(const ExperimentConfig& cfg, const std::string& cli_out) {
  if (!cli_out.empty()) return cli_out;
  if (!cfg.out.empty()) return cfg.out;
  const std::string leaf = cfg.experiment + "-" + std::to_string(cfg.master_seed);
  if (const char* env = std::getenv("CORRLOC_OUT"); env && *env) return (fs::path(env) / leaf).string();
  return (fs::path("runs") / leaf).string();
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  const auto exp = make_experiment(cfg);
  return run_experiment(*exp, cfg, out_dir);
}

RunResult run_experiment(const Experiment& exp, const ExperimentConfig& cfg, const std::string& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  const auto columns = exp.columns();
  const std::int64_t n = exp.trial_count();
  if (n < 1) throw ConfigError("experiment has no trials");

  fs::create_directories(out_dir);
  const fs::path rec_path = fs::path(out_dir) / "records.csv";

  RunResult result;
  result.dir = out_dir;
  if (fs::exists(rec_path)) {
    result.records = read_records(rec_path.string(), columns);
    if (static_cast<std::int64_t>(result.records.size()) > n) result.records.resize(static_cast<std::size_t>(n));
  }
  // Rewrite the valid prefix so a torn tail never survives.
  {
    std::ofstream out(rec_path, std::ios::trunc);
    if (!out) throw Error("cannot write " + rec_path.string());
    out << header_line(columns) << "\n";
    for (const auto& r : result.records) out << format_record(r) << "\n";
  }

  std::ofstream out(rec_path, std::ios::app);
  std::mutex mu;
  std::map<std::int64_t, TrialRecord> pending;
  std::int64_t next_to_write = static_cast<std::int64_t>(result.records.size());
  std::atomic<std::int64_t> next_trial{next_to_write};
  std::exception_ptr fatal;

  auto worker = [&] {
    for (;;) {
      const std::int64_t i = next_trial.fetch_add(1);
      if (i >= n) return;
      TrialRecord r;
      r.trial = i;
      r.seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(i), Stream::field);
      try {
        r.payload = exp.run_trial(i, cfg.master_seed);
        if (r.payload.size() != columns.size()) throw Error("trial payload does not match the columns");
      } catch (const Error&) {
        r.ok = false;
        r.payload.assign(columns.size(), std::numeric_limits<double>::quiet_NaN());
      } catch (...) {
        std::lock_guard lk(mu);
        if (!fatal) fatal = std::current_exception();
        next_trial.store(n);
        return;
      }
      std::lock_guard lk(mu);
      pending.emplace(i, std::move(r));
      while (!pending.empty() && pending.begin()->first == next_to_write) {
        out << format_record(pending.begin()->second) << "\n";
        out.flush();
        result.records.push_back(std::move(pending.begin()->second));
        pending.erase(pending.begin());
        ++next_to_write;
      }
    }
  };

  const int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  out.close();
  if (fatal) std::rethrow_exception(fatal);

  for (const auto& r : result.records)
    if (!r.ok) ++result.failed;
  if (result.failed * 20 > n)
    throw Error("run aborted: " + std::to_string(result.failed) + " of " + std::to_string(n) + " trials failed");

  result.reports = exp.aggregate(result.records);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::json reports = nlohmann::json::object();
  for (const auto& r : result.reports) reports[r.name] = r.report;
  result.manifest = {{"schema_version", kSchemaVersion},
                     {"experiment", cfg.experiment},
                     {"code_version", kCodeVersion},
                     {"config", cfg.doc},
                     {"context", exp.context()},
                     {"trials", n},
                     {"failed", result.failed},
                     {"wall_time_s", wall},
                     {"reports", reports}};
  std::ofstream m(fs::path(out_dir) / "manifest.json");
  m << result.manifest.dump(2) << "\n";
  return result;
}

}  // namespace corrloc
