#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corrloc/lattice.hpp"

namespace corrloc {

struct ScaleSet;

enum class Family { iid, cube_indicator, gaussian_kernel, exponential };

std::string to_string(Family f);
Family family_from_string(const std::string& name);

/// Stationary covariance v on Z^d with v(0) = 1. Immutable.
class CovarianceModel {
 public:
  /// The i.i.d. model in d = 1.
  CovarianceModel();

  static CovarianceModel iid(int dim);
  /// prod_i max(0, 1 - |x_i|/m)
  static CovarianceModel cube_indicator(int dim, double m);
  /// exp(-|x|^2 / (2 ell^2))
  static CovarianceModel gaussian_kernel(int dim, double ell);
  /// exp(-alpha |x|)
  static CovarianceModel exponential(int dim, double alpha);

  /// {"family": "cube_indicator", "m": 4} and the like.
  static CovarianceModel from_json(const nlohmann::json& spec, int dim);
  nlohmann::json to_json() const;

  Family family() const { return family_; }
  int dim() const { return dim_; }
  double param() const { return param_; }
  double d_L() const { return d_L_; }

  double operator()(const Point& x) const;

  /// Sup-norm radius beyond which v < 1e-14 (exact support radius for
  /// compactly supported families).
  int effective_radius() const { return radius_; }

  std::string describe() const;

 private:
  CovarianceModel(Family f, int dim, double param);

  Family family_ = Family::iid;
  int dim_ = 1;
  double param_ = 0.0;
  double d_L_ = 1.0;
  int radius_ = 0;
};

double eval_cov(const CovarianceModel& model, const Point& x);

/// 1 / (1 - max over unit vectors of v). Throws DomainError when that max is 1.
double derive_dL(const CovarianceModel& model);

/// a (1 - v(x)).
double shape(const CovarianceModel& model, double a_L, const Point& x);

struct HypothesisReport {
  double tail_stat = 0.0;
  bool shortrange_ok = false;
  double c_lower = 0.0;  // fitted lower constant
  double c_upper = 0.0;  // fitted growth constant
  double dL_over_aL = 0.0;
  bool assumption14_ok = false;
  double tau_ratio = 0.0;  // tau_L / ((1/a_L) sqrt(a_L/d_L))
  bool assumption15_ok = false;
};

HypothesisReport check_hypotheses(const CovarianceModel& model, std::int64_t L, const ScaleSet& scales);

void to_json(nlohmann::json& j, const HypothesisReport& r);

/// DFT of the minimum-image wrapped covariance on the torus (Z/nZ)^d, in
/// row-major order. Throws EmbeddingInvalid when an entry is below
/// -1e-8 times the largest.
std::vector<double> circulant_spectrum(const CovarianceModel& model, int torus_side);

}  // namespace corrloc
