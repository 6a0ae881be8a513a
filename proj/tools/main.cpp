#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "corrloc/config.hpp"
#include "corrloc/covariance.hpp"
#include "corrloc/errors.hpp"
#include "corrloc/extremes.hpp"
#include "corrloc/field.hpp"
#include "corrloc/harness.hpp"
#include "corrloc/scales.hpp"
#include "corrloc/spectrum.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace corrloc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3, kAcceptance = 4 };

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  int workers = 0;
  std::vector<std::string> overrides;
};

// Loose document for the single-shot subcommands: config file, then overrides.
json load_doc(const Globals& g) {
  json doc = json::object();
  if (!g.config.empty()) {
    std::ifstream in(g.config);
    if (!in) throw ConfigError("cannot open config " + g.config);
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  for (const auto& o : g.overrides) apply_override(doc, o);
  if (g.seed_set) doc["master_seed"] = g.seed;
  return doc;
}

template <class T>
T field_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

CovarianceModel model_of(const json& doc, int d) {
  if (!doc.contains("model")) return CovarianceModel::iid(d);
  return CovarianceModel::from_json(doc["model"], d);
}

std::string out_dir(const Globals& g, const std::string& leaf) {
  if (!g.out.empty()) return g.out;
  if (const char* env = std::getenv("CORRLOC_OUT"); env && *env) return (fs::path(env) / leaf).string();
  return (fs::path("runs") / leaf).string();
}

int cmd_sample_field(const Globals& g, bool csv) {
  const json doc = load_doc(g);
  const int d = field_or(doc, "d", 1);
  const auto L = field_or<std::int64_t>(doc, "L", 100);
  const auto seed = field_or<std::uint64_t>(doc, "master_seed", 1);
  const CovarianceModel model = model_of(doc, d);
  const auto hint = field_or<std::string>(doc, "sampler", "circulant") == "dense" ? SamplerKind::dense
                                                                                   : SamplerKind::circulant;
  FieldSample s;
  if (doc.contains("peak")) {
    Point x0{};
    const auto at = doc["peak"].value("x0", std::vector<int>(d, 0));
    for (int i = 0; i < d && i < static_cast<int>(at.size()); ++i) x0[i] = at[i];
    const double a = doc["peak"].contains("value") ? doc["peak"]["value"].get<double>() : compute_aL(L, d);
    s = peak_conditioned_sample(model, L, x0, a, seed, hint);
  } else {
    s = sample_field(model, L, seed, hint);
  }
  const std::string dir = out_dir(g, "field-" + std::to_string(seed));
  fs::create_directories(dir);
  write_binary(s, (fs::path(dir) / "field.bin").string());
  if (csv) write_csv(s.grid, (fs::path(dir) / "field.csv").string());
  const std::size_t top = argmax(s.grid.span());
  std::cout << json{{"out", dir},
                    {"sites", s.grid.size()},
                    {"sampler", to_string(s.sampler)},
                    {"max", s.grid.values[top]},
                    {"argmax", to_string(s.grid.box.point(top), d)},
                    {"a_L", compute_aL(L, d)}}
                   .dump(2)
            << "\n";
  return kOk;
}

int cmd_spectrum(const Globals& g, const std::string& input, int k, int window, bool dense) {
  const json doc = load_doc(g);
  Grid V;
  if (!input.empty()) {
    V = read_binary(input);
  } else {
    const int d = field_or(doc, "d", 1);
    const auto L = field_or<std::int64_t>(doc, "L", 100);
    V = sample_field(model_of(doc, d), L, field_or<std::uint64_t>(doc, "master_seed", 1)).grid;
  }
  if (window > 0) V = restrict_to(V, Box(V.box.dim(), window % 2 == 0 ? window + 1 : window));
  const SpectralResult r = dense ? dense_eigs(V, k) : top_k_eigs(V, k);
  const std::string dir = out_dir(g, "spectrum");
  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / "spectrum.json") << to_json(r).dump(2) << "\n";
  for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
    std::printf("%zu %.12f %s residual=%.2e\n", i + 1, r.eigenvalues[i], to_string(r.centers[i], V.box.dim()).c_str(),
                r.residuals[i]);
  }
  return kOk;
}

int cmd_bar_problem(const Globals& g) {
  const json doc = load_doc(g);
  const int d = field_or(doc, "d", 1);
  const CovarianceModel model = model_of(doc, d);
  const double a = doc.contains("a_L") ? doc["a_L"].get<double>() : compute_aL(field_or<std::int64_t>(doc, "L", 100), d);
  const int r = field_or(doc, "r_L", 11);
  const BarSolution b = solve_bar_problem(model, a, r % 2 == 0 ? r + 1 : r);
  const double tau = compute_tau(model, b.bar_phi);
  std::cout << json{{"model", model.to_json()},
                    {"a_L", a},
                    {"d_L", model.d_L()},
                    {"r_L", b.r_L},
                    {"bar_lambda", b.bar_lambda},
                    {"expansion", b.expansion_value},
                    {"bar_phi_origin", b.bar_phi.at(Point{})},
                    {"tau_L", tau},
                    {"residual", b.residual}}
                   .dump(2)
            << "\n";
  return kOk;
}

int cmd_ppp(const Globals& g) {
  const json doc = load_doc(g);
  const double b = field_or(doc, "b", 0.0);
  const int K = field_or(doc, "K", 500);
  const auto seed = field_or<std::uint64_t>(doc, "master_seed", 1);
  const PPPReference r = sample_ppp_reference(b, K, derive_seed(seed, 0, Stream::decoration));
  const std::string dir = out_dir(g, "ppp-" + std::to_string(seed));
  fs::create_directories(dir);
  write_csv(r, (fs::path(dir) / "ppp.csv").string());
  std::cout << json{{"out", dir}, {"b", b}, {"K", K}, {"k_max_safe", r.k_max_safe},
                    {"ell_head", std::vector<int>(r.ell.begin(), r.ell.begin() + std::min(10, r.k_max_safe))},
                    {"p_rank_one_exact", top_rank_one_probability(b)}}
                   .dump(2)
            << "\n";
  return kOk;
}

int cmd_experiment(const Globals& g) {
  if (g.config.empty()) throw ConfigError("experiment needs --config");
  std::vector<std::string> ov = g.overrides;
  if (g.seed_set) ov.push_back("master_seed=" + std::to_string(g.seed));
  if (g.workers > 0) ov.push_back("workers=" + std::to_string(g.workers));
  const ExperimentConfig cfg = load_config(g.config, ov);
  const std::string dir = resolve_out_dir(cfg, g.out);
  const RunResult r = run_experiment(cfg, dir);
  std::cout << "run " << dir << ": " << r.records.size() << " trials, " << r.failed << " failed\n";
  for (const auto& [name, rep] : r.reports)
    std::printf("%s %s statistic=%.6g threshold=%.6g n=%zu\n", rep.pass ? "PASS" : "FAIL", name.c_str(),
                rep.statistic, rep.threshold, rep.n);
  return kOk;
}

int cmd_report(const std::string& dir, bool check) {
  const ReportSummary s = report(dir, std::cout);
  return check && !s.all_pass ? kAcceptance : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo experiments for Anderson Hamiltonians with correlated Gaussian potentials", "corrloc"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON config file");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--override", g.overrides, "key.path=value, repeatable")->take_all();

  auto* sf = app.add_subcommand("sample-field", "draw one field on Q_L (config: model, L, d, sampler, peak)");
  bool csv = false;
  sf->add_flag("--csv", csv, "also write field.csv");

  auto* sp = app.add_subcommand("spectrum", "top eigenpairs of Delta + V");
  std::string input;
  int k = 5;
  int window = 0;
  bool dense = false;
  sp->add_option("--input", input, "field.bin from sample-field (default: sample from config)");
  sp->add_option("-k", k, "number of eigenpairs");
  sp->add_option("--window", window, "restrict to the centred box of this side");
  sp->add_flag("--dense", dense, "dense solver instead of Lanczos");

  app.add_subcommand("bar-problem", "solve the deterministic bar problem (config: model, d, a_L or L, r_L)");
  app.add_subcommand("ppp-reference", "sample the decorated point process (config: b, K)");
  app.add_subcommand("experiment", "run an experiment from --config");

  auto* rp = app.add_subcommand("report", "summarise a finished run");
  std::string run_dir;
  bool check = false;
  rp->add_option("run_dir", run_dir, "run directory")->required();
  rp->add_flag("--check", check, "exit 4 when any criterion fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (sf->parsed()) return cmd_sample_field(g, csv);
    if (sp->parsed()) return cmd_spectrum(g, input, k, window, dense);
    if (app.got_subcommand("bar-problem")) return cmd_bar_problem(g);
    if (app.got_subcommand("ppp-reference")) return cmd_ppp(g);
    if (app.got_subcommand("experiment")) return cmd_experiment(g);
    if (rp->parsed()) return cmd_report(run_dir, check);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
