#include "corrloc/scales.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "corrloc/errors.hpp"
#include "corrloc/normal.hpp"

namespace corrloc {

double compute_aL(std::int64_t L, int d) {
  if (L < 2) throw DomainError("compute_aL: L must be at least 2");
  if (d < 1 || d > 3) throw DomainError("compute_aL: d must be in 1..3");
  const double log_Ld = d * std::log(static_cast<double>(L));
  if (log_Ld > std::log(DBL_MAX)) throw DomainError("compute_aL: L^d overflows double range");
  return normal::isf_log(-log_Ld);
}

std::int64_t implied_L(double a_L, int d) {
  if (!(a_L > 0)) throw DomainError("implied_L: a_L must be positive");
  const double log_L = -normal::log_sf(a_L) / d;
  if (log_L > std::log(9.0e18)) throw DomainError("implied_L: box side overflows");
  return static_cast<std::int64_t>(std::llround(std::exp(log_L)));
}

double compute_theta_L(double a_L, double d_L, double tau_L, double kappa) {
  if (!(d_L >= 1.0)) throw DomainError("compute_theta_L: d_L must be >= 1");
  if (!(a_L > 0.0)) throw DomainError("compute_theta_L: a_L must be positive");
  if (!(kappa > 0.0 && kappa < 1.0 / 3.0)) throw DomainError("compute_theta_L: kappa must lie in (0, 1/3)");
  if (!(a_L > d_L)) throw DomainError("compute_theta_L: requires d_L < a_L");
  return std::pow(a_L / d_L, kappa) * std::max(1.0 / a_L, a_L * tau_L * tau_L);
}

std::pair<double, double> interval_ILC(double a_L, double tau_L, double C) {
  if (!(C > 0.0)) throw DomainError("interval_ILC: C must be positive");
  const double mid = a_L / std::sqrt(1.0 + tau_L * tau_L);
  const double half = C * std::max(1.0 / a_L, tau_L);
  return {mid - half, mid + half};
}

SumTail gaussian_sum_tail(double a_L, double tau_L, double s, double Ld) {
  if (!(tau_L >= 0.0)) throw DomainError("gaussian_sum_tail: tau_L must be non-negative");
  if (!(Ld > 1.0)) throw DomainError("gaussian_sum_tail: Ld must exceed 1");
  if (!(a_L > 0.0)) throw DomainError("gaussian_sum_tail: a_L must be positive");
  const double sigma = std::sqrt(1.0 + tau_L * tau_L);
  const double level = a_L * sigma + s / a_L;
  const double tail = std::exp(std::log(Ld) + normal::log_sf(level / sigma));
  return {tail, std::exp(-s)};
}

double gaussian_sum_tail_restricted(double a_L, double tau_L, double s, double Ld, double C,
                                    double rel_tol) {
  if (!(tau_L >= 0.0)) throw DomainError("gaussian_sum_tail_restricted: tau_L must be non-negative");
  if (!(Ld > 1.0)) throw DomainError("gaussian_sum_tail_restricted: Ld must exceed 1");
  const auto [lo, hi] = interval_ILC(a_L, tau_L, C);
  const double sigma = std::sqrt(1.0 + tau_L * tau_L);
  const double level = a_L * sigma + s / a_L;
  const double log_Ld = std::log(Ld);

  if (tau_L == 0.0) {
    // X >= level and X outside [lo, hi].
    double p = std::exp(log_Ld + normal::log_sf(std::max(level, hi)));
    if (level < lo) p += std::exp(log_Ld + normal::log_sf(level)) - std::exp(log_Ld + normal::log_sf(lo));
    return p;
  }

  auto integrand = [&](double x) {
    if (!std::isfinite(x)) return 0.0;
    const double log_density = -0.5 * x * x - 0.91893853320467274178;
    return std::exp(log_Ld + log_density + normal::log_sf((level - x) / tau_L));
  };
  using boost::math::quadrature::gauss_kronrod;
  const double inf = std::numeric_limits<double>::infinity();
  double err_upper = 0.0;
  double err_lower = 0.0;
  const double upper = gauss_kronrod<double, 31>::integrate(integrand, hi, inf, 15, 1e-12, &err_upper);
  const double lower = gauss_kronrod<double, 31>::integrate(integrand, -inf, lo, 15, 1e-12, &err_lower);
  const double total = upper + lower;
  const double err = err_upper + err_lower;
  if (!std::isfinite(total) || err > rel_tol * std::max(total, 1e-300) + 1e-300)
    throw QuadratureError("gaussian_sum_tail_restricted: quadrature did not converge", err);
  return total;
}

Windows suggest_windows(double a_L, double d_L, std::int64_t L) {
  if (!(d_L < a_L)) throw DomainError("suggest_windows: requires d_L < a_L");
  if (L < 32) throw DomainError("suggest_windows: L must be at least 32");
  int r = static_cast<int>(std::ceil(std::max(a_L, 3.0 * d_L)));
  if (r % 2 == 0) ++r;
  int R = static_cast<int>(L / 4);
  if (R % 2 == 0) --R;
  if (!(r < R)) throw DomainError("suggest_windows: L too small to fit r_L < R_L <= L/4");
  return {R, r};
}

namespace {
int force_odd(int n) { return n % 2 == 0 ? n + 1 : n; }
}  // namespace

ScaleSet make_scales(std::int64_t L, int d, double d_L, double tau_L, const ScaleOptions& opts) {
  if (d < 1 || d > 3) throw DomainError("make_scales: d must be in 1..3");
  if (!(opts.kappa > 0.0 && opts.kappa < 1.0 / 3.0)) throw DomainError("make_scales: kappa must lie in (0, 1/3)");
  ScaleSet s;
  s.d = d;
  s.d_L = d_L;
  s.tau_L = tau_L;
  s.kappa = opts.kappa;
  s.theta = 2 * d + 1;
  if (opts.a_L) {
    s.a_L = *opts.a_L;
    s.L = L > 0 ? L : implied_L(s.a_L, d);
  } else {
    s.L = L;
    s.a_L = compute_aL(L, d);
  }
  s.a_Xi = s.a_L * std::sqrt(1.0 + tau_L * tau_L);
  if (s.a_L > d_L) s.theta_L = compute_theta_L(s.a_L, d_L, tau_L, s.kappa);

  if (opts.R_L && opts.r_L) {
    s.R_L = force_odd(*opts.R_L);
    s.r_L = force_odd(*opts.r_L);
  } else {
    const Windows w = suggest_windows(s.a_L, d_L, s.L);
    s.R_L = opts.R_L ? force_odd(*opts.R_L) : w.R_L;
    s.r_L = opts.r_L ? force_odd(*opts.r_L) : w.r_L;
  }
  if (!(s.r_L < s.R_L)) throw DomainError("make_scales: requires r_L < R_L");
  return s;
}

void to_json(nlohmann::json& j, const ScaleSet& s) {
  j = nlohmann::json{{"L", s.L},         {"d", s.d},         {"a_L", s.a_L},
                     {"tau_L", s.tau_L}, {"a_Xi", s.a_Xi},   {"theta", s.theta},
                     {"kappa", s.kappa}, {"theta_L", nullptr}, {"R_L", s.R_L},
                     {"r_L", s.r_L},     {"d_L", s.d_L}};
  if (s.theta_L) j["theta_L"] = *s.theta_L;
}

void from_json(const nlohmann::json& j, ScaleSet& s) {
  s.L = j.at("L").get<std::int64_t>();
  s.d = j.at("d").get<int>();
  s.a_L = j.at("a_L").get<double>();
  s.tau_L = j.at("tau_L").get<double>();
  s.a_Xi = j.at("a_Xi").get<double>();
  s.theta = j.at("theta").get<int>();
  s.kappa = j.at("kappa").get<double>();
  s.theta_L.reset();
  if (!j.at("theta_L").is_null()) s.theta_L = j.at("theta_L").get<double>();
  s.R_L = j.at("R_L").get<int>();
  s.r_L = j.at("r_L").get<int>();
  s.d_L = j.at("d_L").get<double>();
}

}  // namespace corrloc
