#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "corrloc/covariance.hpp"
#include "corrloc/errors.hpp"
#include "corrloc/extremes.hpp"
#include "corrloc/field.hpp"
#include "corrloc/harness.hpp"
#include "corrloc/normal.hpp"
#include "corrloc/rng.hpp"
#include "corrloc/scales.hpp"
#include "corrloc/spectrum.hpp"

namespace corrloc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int make_odd(int n) { return n % 2 == 0 ? n + 1 : n; }

void write_two_columns(const std::string& path, const std::string& a, const std::string& b,
                       const std::vector<std::pair<double, double>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  out << a << "," << b << "\n";
  char buf[96];
  for (const auto& [x, y] : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, y);
    out << buf;
  }
}

// Column lookup over ok records.
class Table {
 public:
  Table(const std::vector<std::string>& cols, const std::vector<TrialRecord>& recs) : recs_(recs) {
    for (std::size_t i = 0; i < cols.size(); ++i) index_[cols[i]] = i;
  }
  std::vector<double> column(const std::string& name) const {
    const std::size_t c = index_.at(name);
    std::vector<double> out;
    for (const auto& r : recs_)
      if (r.ok) out.push_back(r.payload[c]);
    return out;
  }
  std::vector<double> column_where(const std::string& name, const std::string& flag) const {
    const std::size_t c = index_.at(name);
    const std::size_t f = index_.at(flag);
    std::vector<double> out;
    for (const auto& r : recs_)
      if (r.ok && r.payload[f] != 0.0) out.push_back(r.payload[c]);
    return out;
  }

 private:
  const std::vector<TrialRecord>& recs_;
  std::map<std::string, std::size_t> index_;
};

TestReport upper_bound_report(double statistic, std::size_t n, double threshold, const std::string& what) {
  TestReport r;
  r.statistic = statistic;
  r.n = n;
  r.threshold = threshold;
  r.pass = n > 0 && std::isfinite(statistic) && statistic <= threshold;
  r.description = what;
  return r;
}

TestReport ks_gumbel(std::vector<double> values, double threshold, const std::string& what) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double x) { return !std::isfinite(x); }), values.end());
  std::sort(values.begin(), values.end());
  if (values.empty()) return upper_bound_report(kNaN, 0, threshold, what);
  return upper_bound_report(ks_statistic(values, gumbel_cdf), values.size(), threshold, what);
}

// Frequency-at-least check expressed as shortfall 1 - freq <= 1 - min_freq.
TestReport frequency_report(const std::vector<double>& flags, double min_freq, const std::string& what) {
  double hits = 0;
  for (double f : flags) hits += f != 0.0 ? 1.0 : 0.0;
  const double freq = flags.empty() ? kNaN : hits / static_cast<double>(flags.size());
  TestReport r = upper_bound_report(1.0 - freq, flags.size(), 1.0 - min_freq, what);
  r.extras["frequency"] = freq;
  return r;
}

std::vector<std::pair<double, double>> ecdf(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.emplace_back(v[i], static_cast<double>(i + 1) / static_cast<double>(v.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Shared deterministic preparation.

struct Setup {
  CovarianceModel model;
  ScaleSet scales;
  BarSolution bar;
};

Setup make_setup(const ExperimentConfig& cfg) {
  const int d = cfg.get<int>("d");
  const std::int64_t L = cfg.get<std::int64_t>("L");
  Setup s;
  s.model = CovarianceModel::from_json(cfg.at("model"), d);
  ScaleOptions o;
  o.kappa = cfg.get<double>("scales.kappa", kDefaultKappa);
  if (cfg.has("scales.a_L")) o.a_L = cfg.get<double>("scales.a_L");
  if (cfg.has("scales.R_L")) o.R_L = make_odd(cfg.get<int>("scales.R_L"));
  if (cfg.has("scales.r_L")) o.r_L = make_odd(cfg.get<int>("scales.r_L"));
  const double a = o.a_L ? *o.a_L : compute_aL(L, d);
  if (!(o.R_L && o.r_L)) {
    const Windows w = suggest_windows(a, s.model.d_L(), L);
    if (!o.R_L) o.R_L = w.R_L;
    if (!o.r_L) o.r_L = w.r_L;
  }
  s.bar = solve_bar_problem(s.model, a, *o.r_L);
  const double tau = compute_tau(s.model, s.bar.bar_phi);
  s.scales = make_scales(L, d, s.model.d_L(), tau, o);
  return s;
}

nlohmann::json setup_context(const Setup& s) {
  nlohmann::json j;
  j["scales"] = s.scales;
  j["model"] = s.model.to_json();
  j["bar_lambda"] = s.bar.bar_lambda;
  j["bar_expansion"] = s.bar.expansion_value;
  j["bar_phi_origin"] = s.bar.bar_phi.at(Point{});
  return j;
}

SamplerKind sampler_hint(const ExperimentConfig& cfg) {
  const auto name = cfg.get<std::string>("sampler", "circulant");
  if (name == "dense") return SamplerKind::dense;
  if (name == "circulant") return SamplerKind::circulant;
  throw ConfigError("sampler must be 'dense' or 'circulant'");
}

std::uint64_t field_seed(std::uint64_t master, std::int64_t i) {
  return derive_seed(master, static_cast<std::uint64_t>(i), Stream::field);
}

void check_memory(const Box& box) {
  if (box.size() > (std::size_t{1} << 26)) throw SizeError("Q_L has too many sites for this machine");
}

// ---------------------------------------------------------------------------

class PotentialExtremes final : public Experiment {
 public:
  explicit PotentialExtremes(const ExperimentConfig& cfg)
      : cfg_(cfg), setup_(make_setup(cfg)),
        sampler_(setup_.model, box_QL(setup_.scales.L, setup_.scales.d), sampler_hint(cfg)),
        partition_(build_partition(setup_.scales.L, setup_.scales.R_L, setup_.scales.d)),
        level_(cfg.get<double>("level", 0.0)) {
    check_memory(sampler_.box());
  }

  std::vector<std::string> columns() const override {
    std::vector<std::string> c{"max_value", "rescaled_max"};
    for (std::size_t j = 0; j < partition_.n_boxes(); ++j) c.push_back("count_" + std::to_string(j));
    for (std::size_t j = 0; j < partition_.n_boxes(); ++j) c.push_back("boxmax_" + std::to_string(j));
    return c;
  }
  std::int64_t trial_count() const override { return cfg_.trials; }

  std::vector<double> run_trial(std::int64_t i, std::uint64_t master) const override {
    const FieldSample s = sample_field(sampler_, setup_.scales.L, field_seed(master, i));
    const double a = setup_.scales.a_L;
    const double mx = s.grid.values[argmax(s.grid.span())];
    std::vector<double> out{mx, a * (mx - a)};
    for (int c : exceedance_counts(s.grid, partition_, a, level_)) out.push_back(c);
    for (const BoxMax& b : box_maxima(s.grid, partition_)) out.push_back(a * (b.value - a));
    return out;
  }

  std::vector<NamedReport> aggregate(const std::vector<TrialRecord>& recs) const override {
    const Table t(columns(), recs);
    std::vector<NamedReport> out;
    out.push_back({"gumbel_ks", ks_gumbel(t.column("rescaled_max"), cfg_.get<double>("thresholds.ks", 0.08),
                                          "KS distance of rescaled maxima to the Gumbel law")});
    std::vector<int> counts;
    std::vector<double> box_vals;
    std::vector<std::vector<double>> per_sample;
    for (const auto& r : recs) {
      if (!r.ok) continue;
      std::vector<double> row;
      for (std::size_t j = 0; j < partition_.n_boxes(); ++j) {
        counts.push_back(static_cast<int>(r.payload[2 + j]));
        box_vals.push_back(r.payload[2 + partition_.n_boxes() + j]);
        row.push_back(r.payload[2 + partition_.n_boxes() + j]);
      }
      per_sample.push_back(row);
    }
    TestReport disp;
    try {
      disp = poisson_dispersion(counts, cfg_.get<double>("thresholds.dispersion_lo", 0.8),
                                cfg_.get<double>("thresholds.dispersion_hi", 1.2));
    } catch (const DomainError& e) {
      disp = upper_bound_report(kNaN, counts.size(), 0.2, std::string("dispersion unavailable: ") + e.what());
    }
    out.push_back({"poisson_dispersion", disp});

    if (box_vals.size() >= 100) {
      const double u = cfg_.get<double>("tail_level", 0.0);
      const double scale = std::pow(static_cast<double>(sampler_.box().side()) / setup_.scales.R_L, setup_.scales.d);
      const auto [est, se] = tail_frequency(box_vals, u, scale);
      TestReport tr = upper_bound_report(std::abs(est - std::exp(-u)), box_vals.size(), 3.0 * se + 0.1,
                                         "normalised per-box tail frequency against e^{-u}");
      tr.extras = {{"estimate", est}, {"stderr", se}, {"level", u}};
      out.push_back({"box_tail_frequency", tr});
    }
    if (per_sample.size() >= 200 && partition_.n_boxes() >= 2) {
      const CrossBoxCovariance cb = cross_box_covariance(per_sample);
      TestReport cr = upper_bound_report(cb.value, per_sample.size(), 4.0 * cb.std_error,
                                         "largest cross-box covariance of rescaled box maxima");
      out.push_back({"cross_box_covariance", cr});
    }
    return out;
  }

  nlohmann::json context() const override {
    auto j = setup_context(setup_);
    j["n_boxes"] = partition_.n_boxes();
    j["sampler"] = to_string(sampler_.kind());
    return j;
  }

  void write_plots(const std::vector<TrialRecord>& recs, const std::string& dir) const override {
    const Table t(columns(), recs);
    const auto e = ecdf(t.column("rescaled_max"));
    std::vector<std::pair<double, double>> g;
    for (const auto& [x, y] : e) g.emplace_back(x, gumbel_cdf(x));
    write_two_columns(dir + "/maxima_ecdf.csv", "rescaled_max", "empirical_cdf", e);
    write_two_columns(dir + "/maxima_gumbel.csv", "rescaled_max", "gumbel_cdf", g);
  }

 private:
  ExperimentConfig cfg_;
  Setup setup_;
  GaussianFieldSampler sampler_;
  MesoPartition partition_;
  double level_;
};

// ---------------------------------------------------------------------------

class EigenvalueStats final : public Experiment {
 public:
  explicit EigenvalueStats(const ExperimentConfig& cfg)
      : cfg_(cfg), setup_(make_setup(cfg)),
        sampler_(setup_.model, box_QL(setup_.scales.L, setup_.scales.d), sampler_hint(cfg)),
        k_(cfg.get<int>("k", 2)), meso_(cfg.get<std::string>("box", "macro") == "meso") {
    check_memory(sampler_.box());
    if (k_ < 2) throw ConfigError("eigenvalue_stats needs k >= 2");
  }

  std::vector<std::string> columns() const override {
    std::vector<std::string> c;
    for (int i = 1; i <= k_; ++i) c.push_back("lambda_" + std::to_string(i));
    for (int i = 1; i <= k_; ++i) c.push_back("rescaled_" + std::to_string(i));
    c.push_back("gap");
    for (int i = 1; i <= setup_.scales.d; ++i) c.push_back("center_x" + std::to_string(i));
    c.push_back("center_is_field_max");
    return c;
  }
  std::int64_t trial_count() const override { return cfg_.trials; }

  std::vector<double> run_trial(std::int64_t i, std::uint64_t master) const override {
    const FieldSample s = sample_field(sampler_, setup_.scales.L, field_seed(master, i));
    const Grid V = meso_ ? restrict_to(s.grid, Box(s.dim(), setup_.scales.R_L)) : s.grid;
    LanczosOptions o;
    o.tol = cfg_.get<double>("tol", 1e-10);
    const SpectralResult r = top_k_eigs(V, k_, o);
    const double a = setup_.scales.a_L;
    std::vector<double> out(r.eigenvalues.begin(), r.eigenvalues.end());
    for (double l : r.eigenvalues) out.push_back(a * (l - setup_.scales.a_Xi - setup_.bar.bar_lambda));
    out.push_back(*r.gap);
    for (int k = 0; k < s.dim(); ++k) out.push_back(r.centers[0][k]);
    out.push_back(V.box.point(argmax(V.span())) == r.centers[0] ? 1.0 : 0.0);
    return out;
  }

  std::vector<NamedReport> aggregate(const std::vector<TrialRecord>& recs) const override {
    const Table t(columns(), recs);
    std::vector<NamedReport> out;
    out.push_back({"top_eigenvalue_gumbel_ks",
                   ks_gumbel(t.column("rescaled_1"), cfg_.get<double>("thresholds.ks", 0.1),
                             "KS distance of a(lambda_1 - a_Xi - bar_lambda) to the Gumbel law")});
    std::vector<double> gap_ok;
    const double need = cfg_.get<double>("c_prime", 0.25) * setup_.scales.a_L / setup_.scales.d_L;
    for (double g : t.column("gap")) gap_ok.push_back(g >= need ? 1.0 : 0.0);
    out.push_back({"gap_frequency", frequency_report(gap_ok, cfg_.get<double>("thresholds.gap_frequency", 0.95),
                                                     "fraction of trials with lambda_1 - lambda_2 >= C' a/d_L")});
    out.push_back({"center_at_field_max",
                   frequency_report(t.column("center_is_field_max"), cfg_.get<double>("thresholds.center", 0.8),
                                    "fraction of trials whose top eigenfunction peaks at the field maximum")});
    return out;
  }

  nlohmann::json context() const override { return setup_context(setup_); }

  void write_plots(const std::vector<TrialRecord>& recs, const std::string& dir) const override {
    const Table t(columns(), recs);
    const auto e = ecdf(t.column("rescaled_1"));
    std::vector<std::pair<double, double>> g;
    for (const auto& [x, y] : e) g.emplace_back(x, gumbel_cdf(x));
    write_two_columns(dir + "/eigenvalue_ecdf.csv", "rescaled_lambda_1", "empirical_cdf", e);
    write_two_columns(dir + "/eigenvalue_gumbel.csv", "rescaled_lambda_1", "gumbel_cdf", g);
  }

 private:
  ExperimentConfig cfg_;
  Setup setup_;
  GaussianFieldSampler sampler_;
  int k_;
  bool meso_;
};

// ---------------------------------------------------------------------------

class Localisation final : public Experiment {
 public:
  explicit Localisation(const ExperimentConfig& cfg)
      : cfg_(cfg), setup_(make_setup(cfg)),
        sampler_(setup_.model, box_QL(setup_.scales.L, setup_.scales.d), sampler_hint(cfg)) {
    check_memory(sampler_.box());
    value_ = cfg.get<double>("peak_value", setup_.scales.a_L);
    const Box eig(setup_.scales.d, setup_.scales.R_L);
    if (!sampler_.box().contains(eig)) throw ConfigError("localisation: Q_{R_L} does not fit in Q_L");
  }

  std::vector<std::string> columns() const override {
    return {"xi_x0",     "phi_x0",     "xi_cap_x0", "lambda_1",    "lambda_2",     "eig_err",  "fun_err",
            "gap",       "gap_ok",     "gap_check", "center_dist", "in_E1",        "in_E2",    "in_E3",
            "margin1",   "margin2",    "margin3",   "in_ILC",      "decay_c_fit", "decay_holds"};
  }
  std::int64_t trial_count() const override { return cfg_.trials; }

  std::vector<double> run_trial(std::int64_t i, std::uint64_t master) const override {
    const ScaleSet& sc = setup_.scales;
    const Point x0{};
    const FieldSample s = peak_conditioned_sample(sampler_, sc.L, x0, value_, field_seed(master, i));
    const FluctuationView view = fluctuation_view(s, x0);
    const double phi0 = phi_at(view, setup_.bar.bar_phi, x0);
    const double xi_cap0 = value_ + phi0;
    const Grid V = restrict_to(s.grid, Box(sc.d, sc.R_L, x0));
    LanczosOptions o;
    o.tol = cfg_.get<double>("tol", 1e-10);
    const SpectralResult r = top_k_eigs(V, 2, o);
    const ApproximationError e = approximation_error(xi_cap0, setup_.bar, r, x0, sc.a_L, sc.d_L);
    const double c_prime = cfg_.get<double>("c_prime", 0.25);
    const GapCheck gc = spectral_gap_check(r, value_, sc.a_L, sc.d_L, c_prime);
    const double gap = *r.gap;
    const EventReport ev = event_check(s, x0, sc);
    const auto [lo, hi] = interval_ILC(sc.a_L, sc.tau_L, cfg_.get<double>("ilc_C", 1.0));
    const DecayReport dr = decay_check(r.eigenfunctions[0], r.centers[0], sc.a_L / sc.d_L,
                                       cfg_.get<double>("decay_c", 0.5));
    return {value_,
            phi0,
            xi_cap0,
            r.eigenvalues[0],
            r.eigenvalues[1],
            e.eig_err,
            e.fun_err,
            gap,
            gap >= c_prime * sc.a_L / sc.d_L ? 1.0 : 0.0,
            gc.pass ? 1.0 : 0.0,
            norm(r.centers[0] - x0),
            ev.in_E1 ? 1.0 : 0.0,
            ev.in_E2 ? 1.0 : 0.0,
            ev.in_E3 ? 1.0 : 0.0,
            ev.margin1,
            ev.margin2,
            ev.margin3,
            (value_ >= lo && value_ <= hi) ? 1.0 : 0.0,
            dr.c_fit,
            dr.holds ? 1.0 : 0.0};
  }

  std::vector<NamedReport> aggregate(const std::vector<TrialRecord>& recs) const override {
    const Table t(columns(), recs);
    std::vector<NamedReport> out;
    const auto eig = t.column_where("eig_err", "in_E1");
    const auto fun = t.column_where("fun_err", "in_E1");
    out.push_back({"eig_err_median",
                   upper_bound_report(eig.empty() ? kNaN : median(eig), eig.size(),
                                      cfg_.get<double>("thresholds.eig_err_median", 0.1),
                                      "median a|lambda_1 - (Xi(x0) + bar_lambda)| over E1 trials")});
    out.push_back({"eig_err_p95",
                   upper_bound_report(eig.empty() ? kNaN : quantile(eig, 0.95), eig.size(),
                                      cfg_.get<double>("thresholds.eig_err_p95", 0.5),
                                      "95th percentile of the eigenvalue error over E1 trials")});
    out.push_back({"gap_frequency",
                   frequency_report(t.column_where("gap_ok", "in_E1"),
                                    cfg_.get<double>("thresholds.gap_frequency", 0.95),
                                    "fraction of E1 trials with lambda_1 - lambda_2 >= C' a/d_L")});
    out.push_back({"fun_err_median",
                   upper_bound_report(fun.empty() ? kNaN : median(fun), fun.size(),
                                      cfg_.get<double>("thresholds.fun_err_median", 0.2),
                                      "median (a/d_L)||phi_1 - bar_phi(. - x0)|| over E1 trials")});
    std::vector<double> full;
    for (const auto& r : recs)
      if (r.ok) full.push_back(r.payload[11] * r.payload[12] * r.payload[13]);
    double e_freq = 0.0;
    for (double f : full) e_freq += f;
    out.back().report.extras["event_E_frequency"] = full.empty() ? kNaN : e_freq / static_cast<double>(full.size());
    return out;
  }

  nlohmann::json context() const override {
    auto j = setup_context(setup_);
    j["peak_value"] = value_;
    j["sampler"] = to_string(sampler_.kind());
    return j;
  }

  void write_plots(const std::vector<TrialRecord>& recs, const std::string& dir) const override {
    const Table t(columns(), recs);
    write_two_columns(dir + "/eig_err_ecdf.csv", "eig_err", "empirical_cdf", ecdf(t.column("eig_err")));
    write_two_columns(dir + "/fun_err_ecdf.csv", "fun_err", "empirical_cdf", ecdf(t.column("fun_err")));
  }

 private:
  ExperimentConfig cfg_;
  Setup setup_;
  GaussianFieldSampler sampler_;
  double value_ = 0.0;
};

// ---------------------------------------------------------------------------

class RankPermutation final : public Experiment {
 public:
  explicit RankPermutation(const ExperimentConfig& cfg)
      : cfg_(cfg), setup_(make_setup(cfg)),
        sampler_(setup_.model, box_QL(setup_.scales.L, setup_.scales.d), sampler_hint(cfg)),
        k_(cfg.get<int>("k", 3)), K_(cfg.get<int>("ppp_K", 500)) {
    check_memory(sampler_.box());
    const double at = setup_.scales.a_L * setup_.scales.tau_L;
    b_ = cfg.get<double>("b", at * at);
  }

  std::vector<std::string> columns() const override {
    std::vector<std::string> c;
    for (int i = 1; i <= k_; ++i) c.push_back("ell_" + std::to_string(i));
    for (int i = 1; i <= k_; ++i) c.push_back("ppp_ell_" + std::to_string(i));
    for (int i = 1; i <= k_; ++i) c.push_back("lambda_" + std::to_string(i));
    return c;
  }
  std::int64_t trial_count() const override { return cfg_.trials; }

  std::vector<double> run_trial(std::int64_t i, std::uint64_t master) const override {
    const FieldSample s = sample_field(sampler_, setup_.scales.L, field_seed(master, i));
    LanczosOptions o;
    o.tol = cfg_.get<double>("tol", 1e-10);
    const SpectralResult r = top_k_eigs(s.grid, k_, o);
    const ExtremeRecord rec = order_statistics(s.grid, setup_.scales.L, setup_.scales.a_L);
    std::vector<Point> positions;
    positions.reserve(rec.order.size());
    for (const auto& e : rec.order) positions.push_back(e.y);
    std::vector<double> out;
    for (int ell : rank_permutation(r.centers, positions)) out.push_back(ell);
    const PPPReference ppp =
        sample_ppp_reference(b_, K_, derive_seed(master, static_cast<std::uint64_t>(i), Stream::decoration));
    for (int k = 0; k < k_; ++k) out.push_back(k < ppp.k_max_safe ? ppp.ell[k] : kNaN);
    for (double l : r.eigenvalues) out.push_back(l);
    return out;
  }

  std::vector<NamedReport> aggregate(const std::vector<TrialRecord>& recs) const override {
    const Table t(columns(), recs);
    std::vector<double> first, ppp_first;
    for (double e : t.column("ell_1")) first.push_back(e == 1.0 ? 1.0 : 0.0);
    for (double e : t.column("ppp_ell_1"))
      if (std::isfinite(e)) ppp_first.push_back(e == 1.0 ? 1.0 : 0.0);
    TestReport r = frequency_report(first, cfg_.get<double>("thresholds.rank_one", 0.8),
                                    "fraction of trials with ell_L(1) = 1");
    double pf = 0.0;
    for (double f : ppp_first) pf += f;
    r.extras["ppp_reference_frequency"] = ppp_first.empty() ? kNaN : pf / static_cast<double>(ppp_first.size());
    r.extras["b"] = b_;
    return {{"rank_one_frequency", r}};
  }

  nlohmann::json context() const override {
    auto j = setup_context(setup_);
    j["b"] = b_;
    return j;
  }

  void write_plots(const std::vector<TrialRecord>& recs, const std::string& dir) const override {
    const Table t(columns(), recs);
    constexpr int bins = 10;  // ranks 1..9 and ">= 10"
    auto hist = [&](const std::vector<double>& v) {
      std::vector<std::pair<double, double>> h;
      std::vector<double> c(bins, 0.0);
      double n = 0;
      for (double x : v) {
        if (!std::isfinite(x)) continue;
        c[std::min(bins, static_cast<int>(x)) - 1] += 1.0;
        n += 1.0;
      }
      for (int b = 0; b < bins; ++b) h.emplace_back(b + 1, n > 0 ? c[b] / n : 0.0);
      return h;
    };
    write_two_columns(dir + "/rank_hist_pipeline.csv", "rank", "frequency", hist(t.column("ell_1")));
    write_two_columns(dir + "/rank_hist_ppp.csv", "rank", "frequency", hist(t.column("ppp_ell_1")));
  }

 private:
  ExperimentConfig cfg_;
  Setup setup_;
  GaussianFieldSampler sampler_;
  int k_;
  int K_;
  double b_ = 0.0;
};

// ---------------------------------------------------------------------------

class TailLemma final : public Experiment {
 public:
  explicit TailLemma(const ExperimentConfig& cfg) : cfg_(cfg) {
    a_ = cfg.get<double>("a_L", 4.7534243088229);
    Ld_ = cfg.has("Ld") ? cfg.get<double>("Ld") : std::exp(-normal::log_sf(a_));
    taus_ = cfg.get<std::vector<double>>("tau_grid", {0.0, 0.05, 0.1});
    ss_ = cfg.get<std::vector<double>>("s_grid", {-1.0, 0.0, 1.0, 2.0});
    C_ = cfg.get<double>("ilc_C", 1.0);
    if (taus_.empty() || ss_.empty()) throw ConfigError("tail_lemma grids must be non-empty");
  }

  std::vector<std::string> columns() const override {
    return {"tau", "s", "scaled_tail", "limit", "ratio", "restricted"};
  }
  std::int64_t trial_count() const override { return static_cast<std::int64_t>(taus_.size() * ss_.size()); }

  std::vector<double> run_trial(std::int64_t i, std::uint64_t) const override {
    const double tau = taus_[static_cast<std::size_t>(i) / ss_.size()];
    const double s = ss_[static_cast<std::size_t>(i) % ss_.size()];
    const SumTail st = gaussian_sum_tail(a_, tau, s, Ld_);
    double restricted = kNaN;
    try {
      restricted = gaussian_sum_tail_restricted(a_, tau, s, Ld_, C_);
    } catch (const QuadratureError&) {
    }
    return {tau, s, st.scaled_tail, st.limit, st.scaled_tail / st.limit, restricted};
  }

  std::vector<NamedReport> aggregate(const std::vector<TrialRecord>& recs) const override {
    const Table t(columns(), recs);
    double worst = 0.0;
    for (double r : t.column("ratio")) worst = std::max(worst, std::abs(r - 1.0));
    return {{"sum_tail_ratio", upper_bound_report(worst, t.column("ratio").size(),
                                                  cfg_.get<double>("thresholds.ratio_tol", 0.05),
                                                  "max |L^d P(X+Y >= a_Xi + s/a) e^{s} - 1| over the grid")}};
  }

  nlohmann::json context() const override { return {{"a_L", a_}, {"Ld", Ld_}, {"ilc_C", C_}}; }

  void write_plots(const std::vector<TrialRecord>& recs, const std::string& dir) const override {
    for (std::size_t ti = 0; ti < taus_.size(); ++ti) {
      std::vector<std::pair<double, double>> rows;
      for (const auto& r : recs)
        if (r.ok && r.payload[0] == taus_[ti]) rows.emplace_back(r.payload[1], r.payload[4]);
      write_two_columns(dir + "/tail_ratio_tau" + std::to_string(ti) + ".csv", "s", "ratio", rows);
    }
  }

 private:
  ExperimentConfig cfg_;
  double a_ = 0.0;
  double Ld_ = 0.0;
  double C_ = 1.0;
  std::vector<double> taus_;
  std::vector<double> ss_;
};

// ---------------------------------------------------------------------------

class MacroMeso final : public Experiment {
 public:
  explicit MacroMeso(const ExperimentConfig& cfg)
      : cfg_(cfg), setup_(make_setup(cfg)),
        sampler_(setup_.model, box_QL(setup_.scales.L, setup_.scales.d), sampler_hint(cfg)),
        partition_(build_partition(setup_.scales.L, setup_.scales.R_L, setup_.scales.d)), k_(cfg.get<int>("k", 3)) {
    check_memory(sampler_.box());
    if (k_ < 1) throw ConfigError("macro_meso needs k >= 1");
  }

  std::vector<std::string> columns() const override {
    std::vector<std::string> c;
    for (int i = 1; i <= k_; ++i) {
      const auto s = std::to_string(i);
      for (const char* p : {"lambda_", "lambda_hat_", "eig_err_", "fun_err_"}) c.push_back(p + s);
    }
    for (const char* p : {"g1_level", "g1_spacing", "g2", "gap_event", "centers_match"}) c.push_back(p);
    return c;
  }
  std::int64_t trial_count() const override { return cfg_.trials; }

  std::vector<double> run_trial(std::int64_t i, std::uint64_t master) const override {
    const ScaleSet& sc = setup_.scales;
    const FieldSample s = sample_field(sampler_, sc.L, field_seed(master, i));
    LanczosOptions o;
    o.tol = cfg_.get<double>("tol", 1e-10);
    const SpectralResult macro = top_k_eigs(s.grid, k_, o);

    struct Local {
      double lambda;
      std::size_t box;
      std::size_t idx;
    };
    std::vector<SpectralResult> boxes;
    std::vector<Local> pool;
    for (std::size_t j = 0; j < partition_.n_boxes(); ++j) {
      const Grid V = restrict_to(s.grid, partition_.core(j));
      boxes.push_back(dense_eigs(V, std::min<int>(k_ + 1, static_cast<int>(V.size()))));
      for (std::size_t t = 0; t < boxes.back().eigenvalues.size(); ++t)
        pool.push_back({boxes.back().eigenvalues[t], j, t});
    }
    std::stable_sort(pool.begin(), pool.end(), [](const Local& a, const Local& b) { return a.lambda > b.lambda; });
    if (static_cast<int>(pool.size()) < k_ + 1) throw DomainError("macro_meso: too few mesoscopic eigenvalues");

    std::vector<double> out;
    bool centers_match = true;
    for (int t = 0; t < k_; ++t) {
      const Local& loc = pool[t];
      const Grid& local = boxes[loc.box].eigenfunctions[loc.idx];
      const Grid& phi = macro.eigenfunctions[t];
      double diff2 = 0.0;
      for (std::size_t q = 0; q < phi.size(); ++q) {
        const Point x = phi.box.point(q);
        const double hat = local.box.contains(x) ? local.at(x) : 0.0;
        diff2 += (hat - phi.values[q]) * (hat - phi.values[q]);
      }
      if (boxes[loc.box].centers[loc.idx] != macro.centers[t]) centers_match = false;
      out.push_back(macro.eigenvalues[t]);
      out.push_back(loc.lambda);
      out.push_back(sc.a_L * std::abs(loc.lambda - macro.eigenvalues[t]));
      out.push_back(sc.a_L / sc.d_L * std::sqrt(diff2));
    }
    const bool level = pool[k_].lambda >= sc.a_Xi + setup_.bar.bar_lambda - 1.0 / std::sqrt(sc.a_L);
    bool spacing = true;
    for (int t = 0; t < k_; ++t)
      if (!(pool[t].lambda - pool[t + 1].lambda > std::pow(sc.a_L, -1.5))) spacing = false;
    bool g2 = true;
    for (std::size_t q = 0; q < s.grid.size() && g2; ++q) {
      const Point x = s.grid.box.point(q);
      bool inside = false;
      for (std::size_t j = 0; j < partition_.n_boxes() && !inside; ++j)
        inside = Box(sc.d, make_odd(std::max(1, sc.R_L - sc.r_L)), partition_.centers[j]).contains(x);
      if (!inside && !(s.grid.values[q] < sc.a_L - sc.theta)) g2 = false;
    }
    out.push_back(level ? 1.0 : 0.0);
    out.push_back(spacing ? 1.0 : 0.0);
    out.push_back(g2 ? 1.0 : 0.0);
    out.push_back(level && spacing ? 1.0 : 0.0);
    out.push_back(centers_match ? 1.0 : 0.0);
    return out;
  }

  std::vector<NamedReport> aggregate(const std::vector<TrialRecord>& recs) const override {
    const Table t(columns(), recs);
    double worst_eig = kNaN;
    double worst_fun = kNaN;
    const std::size_t n = t.column_where("gap_event", "gap_event").size();
    std::map<std::string, double> extras;
    if (n > 0) {
      worst_eig = 0.0;
      worst_fun = 0.0;
      for (int i = 1; i <= k_; ++i) {
        const double me = median(t.column_where("eig_err_" + std::to_string(i), "gap_event"));
        const double mf = median(t.column_where("fun_err_" + std::to_string(i), "gap_event"));
        extras["eig_err_median_" + std::to_string(i)] = me;
        extras["fun_err_median_" + std::to_string(i)] = mf;
        worst_eig = std::max(worst_eig, me);
        worst_fun = std::max(worst_fun, mf);
      }
    }
    auto frac = [&](const std::string& c) {
      const auto v = t.column(c);
      double s = 0.0;
      for (double x : v) s += x;
      return v.empty() ? kNaN : s / static_cast<double>(v.size());
    };
    extras["gap_event_frequency"] = frac("gap_event");
    extras["g1_level_frequency"] = frac("g1_level");
    extras["g2_frequency"] = frac("g2");
    extras["centers_match_frequency"] = frac("centers_match");
    const auto matched = t.column_where("eig_err_1", "centers_match");
    extras["eig_err_1_median_centers_match"] = matched.empty() ? kNaN : median(matched);
    TestReport e = upper_bound_report(worst_eig, n, cfg_.get<double>("thresholds.eig_err_median", 0.2),
                                      "largest over k of the median a|hat lambda_k - lambda_k| on the gap event");
    TestReport f = upper_bound_report(worst_fun, n, cfg_.get<double>("thresholds.fun_err_median", 0.3),
                                      "largest over k of the median (a/d_L)||hat phi_k - phi_k|| on the gap event");
    e.extras = extras;
    return {{"macro_meso_eigenvalues", e}, {"macro_meso_eigenfunctions", f}};
  }

  nlohmann::json context() const override {
    auto j = setup_context(setup_);
    j["n_boxes"] = partition_.n_boxes();
    j["gap_event"] = "level and spacing conditions on the top k+1 mesoscopic eigenvalues";
    return j;
  }

  void write_plots(const std::vector<TrialRecord>& recs, const std::string& dir) const override {
    const Table t(columns(), recs);
    write_two_columns(dir + "/macro_meso_eig_err_ecdf.csv", "eig_err_1", "empirical_cdf", ecdf(t.column("eig_err_1")));
  }

 private:
  ExperimentConfig cfg_;
  Setup setup_;
  GaussianFieldSampler sampler_;
  MesoPartition partition_;
  int k_;
};

// ---------------------------------------------------------------------------

class BarSweep final : public Experiment {
 public:
  explicit BarSweep(const ExperimentConfig& cfg) : cfg_(cfg) {
    const int d = cfg.get<int>("d", 1);
    if (cfg.has("models")) {
      for (const auto& m : cfg.at("models")) models_.push_back(CovarianceModel::from_json(m, d));
    } else {
      models_.push_back(CovarianceModel::from_json(cfg.at("model"), d));
    }
    ratios_ = cfg.get<std::vector<double>>("ratios", {5.0, 10.0, 20.0, 40.0});
    r_ = make_odd(cfg.get<int>("scales.r_L", 11));
    if (models_.empty() || ratios_.empty()) throw ConfigError("bar_sweep needs models and ratios");
  }

  std::vector<std::string> columns() const override {
    return {"model_index", "ratio", "a_L", "d_L", "bar_lambda", "expansion", "abs_diff", "scaled_diff"};
  }
  std::int64_t trial_count() const override { return static_cast<std::int64_t>(models_.size() * ratios_.size()); }

  std::vector<double> run_trial(std::int64_t i, std::uint64_t) const override {
    const std::size_t m = static_cast<std::size_t>(i) / ratios_.size();
    const double ratio = ratios_[static_cast<std::size_t>(i) % ratios_.size()];
    const CovarianceModel& model = models_[m];
    const double dL = model.d_L();
    const double a = ratio * dL;
    const BarSolution b = solve_bar_problem(model, a, r_);
    const double diff = std::abs(b.bar_lambda - b.expansion_value);
    return {static_cast<double>(m), ratio, a, dL, b.bar_lambda, b.expansion_value, diff, diff / (dL / a)};
  }

  std::vector<NamedReport> aggregate(const std::vector<TrialRecord>& recs) const override {
    std::vector<NamedReport> out;
    const double limit = cfg_.get<double>("thresholds.final_ratio", 0.5);
    for (std::size_t m = 0; m < models_.size(); ++m) {
      std::vector<double> seq;
      for (const auto& r : recs)
        if (r.ok && r.payload[0] == static_cast<double>(m)) seq.push_back(r.payload[7]);
      bool decreasing = seq.size() == ratios_.size();
      for (std::size_t i = 1; i < seq.size(); ++i)
        if (!(seq[i] < seq[i - 1])) decreasing = false;
      TestReport r = upper_bound_report(seq.empty() ? kNaN : seq.back(), seq.size(), limit,
                                        "scaled |bar_lambda - expansion| at the last ratio; sequence must decrease");
      r.pass = r.pass && decreasing;
      r.extras["decreasing"] = decreasing ? 1.0 : 0.0;
      out.push_back({"bar_expansion[" + models_[m].describe() + "]", r});
    }
    return out;
  }

  nlohmann::json context() const override {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : models_) ms.push_back(m.to_json());
    return {{"models", ms}, {"ratios", ratios_}, {"r_L", r_}};
  }

  void write_plots(const std::vector<TrialRecord>& recs, const std::string& dir) const override {
    std::ofstream out(dir + "/bar_sweep_table.csv");
    out << "model,ratio,scaled_diff,decreasing\n";
    for (std::size_t m = 0; m < models_.size(); ++m) {
      double prev = std::numeric_limits<double>::infinity();
      std::vector<std::pair<double, double>> rows;
      for (const auto& r : recs) {
        if (!r.ok || r.payload[0] != static_cast<double>(m)) continue;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%d\n", models_[m].describe().c_str(), r.payload[1],
                      r.payload[7], r.payload[7] < prev ? 1 : 0);
        out << buf;
        prev = r.payload[7];
        rows.emplace_back(r.payload[1], r.payload[7]);
      }
      write_two_columns(dir + "/bar_sweep_model" + std::to_string(m) + ".csv", "ratio", "scaled_diff", rows);
    }
  }

 private:
  ExperimentConfig cfg_;
  std::vector<CovarianceModel> models_;
  std::vector<double> ratios_;
  int r_ = 11;
};

}  // namespace

void Experiment::write_plots(const std::vector<TrialRecord>&, const std::string&) const {}

std::unique_ptr<Experiment> make_experiment(const ExperimentConfig& cfg) {
  try {
    const auto& e = cfg.experiment;
    if (e == "potential_extremes") return std::make_unique<PotentialExtremes>(cfg);
    if (e == "eigenvalue_stats") return std::make_unique<EigenvalueStats>(cfg);
    if (e == "localisation") return std::make_unique<Localisation>(cfg);
    if (e == "rank_permutation") return std::make_unique<RankPermutation>(cfg);
    if (e == "tail_lemma") return std::make_unique<TailLemma>(cfg);
    if (e == "macro_meso") return std::make_unique<MacroMeso>(cfg);
    if (e == "bar_sweep") return std::make_unique<BarSweep>(cfg);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  throw ConfigError("unknown experiment '" + cfg.experiment + "'");
}

}  // namespace corrloc
