#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include <nlohmann/json.hpp>

namespace corrloc {

/// Deterministic scales of one (L, d, covariance) configuration.
struct ScaleSet {
  std::int64_t L = 0;
  int d = 1;
  double a_L = 0.0;
  double tau_L = 0.0;
  double a_Xi = 0.0;
  int theta = 3;
  double kappa = 0.25;
  /// Empty when a_L <= d_L (the shrink window is undefined there).
  std::optional<double> theta_L;
  int R_L = 0;
  int r_L = 0;
  double d_L = 1.0;
};

inline constexpr double kDefaultKappa = 0.25;

/// Level a with P(N(0,1) > a) = L^{-d}.
double compute_aL(std::int64_t L, int d);

/// Nominal box side whose a_L equals the given level; used when a_L is
/// prescribed directly instead of through L.
std::int64_t implied_L(double a_L, int d);

/// (a_L/d_L)^kappa * max(1/a_L, a_L tau_L^2).
double compute_theta_L(double a_L, double d_L, double tau_L, double kappa);

/// Bounds of the interval I_L(C).
std::pair<double, double> interval_ILC(double a_L, double tau_L, double C);

struct SumTail {
  /// Ld * P(X + Y >= a_L sqrt(1+tau^2) + s/a_L), X ~ N(0,1), Y ~ N(0,tau^2).
  double scaled_tail;
  /// The limit e^{-s}.
  double limit;
};

SumTail gaussian_sum_tail(double a_L, double tau_L, double s, double Ld);

/// Ld * P(X + Y >= a_L sqrt(1+tau^2) + s/a_L ; X not in I_L(C)), by adaptive
/// quadrature of the convolution integral. Throws QuadratureError when the
/// error estimate stays above `rel_tol` of the result.
double gaussian_sum_tail_restricted(double a_L, double tau_L, double s, double Ld, double C,
                                    double rel_tol = 1e-8);

struct Windows {
  int R_L;
  int r_L;
};

/// Default mesoscopic and microscopic window sides for desk-scale runs.
Windows suggest_windows(double a_L, double d_L, std::int64_t L);

struct ScaleOptions {
  double kappa = kDefaultKappa;
  std::optional<double> a_L;  // prescribe a_L instead of deriving it from L
  std::optional<int> R_L;
  std::optional<int> r_L;
};

/// Assemble a ScaleSet. tau_L is supplied by the caller (it depends on the
/// bar profile, which depends on r_L). Windows are forced odd.
ScaleSet make_scales(std::int64_t L, int d, double d_L, double tau_L, const ScaleOptions& opts);

void to_json(nlohmann::json& j, const ScaleSet& s);
void from_json(const nlohmann::json& j, ScaleSet& s);

}  // namespace corrloc
