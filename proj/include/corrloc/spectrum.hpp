#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "corrloc/covariance.hpp"
#include "corrloc/lattice.hpp"

namespace corrloc {

/// Delta + V on a box with Dirichlet boundary, matrix-free.
class LatticeOperator {
 public:
  explicit LatticeOperator(const Grid& V);

  std::size_t size() const { return diag_.size(); }
  const Box& box() const { return box_; }
  void apply(const double* psi, double* out) const;
  /// Upper bound on the spectral radius (Gershgorin).
  double norm_bound() const { return norm_bound_; }

 private:
  Box box_;
  std::vector<double> diag_;
  std::vector<std::int32_t> nbr_;  // 2d entries per site, -1 outside the box
  int stride_ = 2;
  double norm_bound_ = 0.0;
};

Grid apply_hamiltonian(const Grid& V, const Grid& psi);

struct SpectralResult {
  Box box;
  std::vector<double> eigenvalues;  // descending
  std::vector<Grid> eigenfunctions;
  std::vector<Point> centers;
  std::vector<double> residuals;
  std::optional<double> gap;
  /// Half-open index ranges [first, last) of eigenvalues within 1e-12 of each other.
  std::vector<std::pair<int, int>> tied_blocks;
  int iterations = 0;
};

inline constexpr int kMaxTopK = 32;

struct LanczosOptions {
  double tol = 1e-10;
  int max_iter = 0;  // 0: the number of sites
  std::uint64_t start_seed = 0x5EEDF00DULL;
};

/// Top-k eigenpairs by Lanczos with full reorthogonalisation. Throws
/// ConvergenceError with the achieved residuals when max_iter is hit.
SpectralResult top_k_eigs(const Grid& V, int k, const LanczosOptions& opts = {});

inline constexpr std::size_t kDenseEigLimit = 4000;

/// Full symmetric eigendecomposition of the assembled matrix; returns the
/// top k pairs (all of them when k <= 0).
SpectralResult dense_eigs(const Grid& V, int k = 0);

/// Argmax of |phi|; entries within a relative 1e-10 of the maximum count as
/// ties and the lexicographically smallest wins.
Point localisation_center(const Grid& phi);

struct BarSolution {
  double bar_lambda = 0.0;
  Grid bar_phi;
  int r_L = 0;
  Grid shape_used;
  double expansion_value = 0.0;
  double residual = 0.0;
};

BarSolution solve_bar_problem(const CovarianceModel& model, double a_L, int r_L);

/// -2d + sum over the 2d unit vectors of 1/S(x).
double bar_lambda_expansion(const CovarianceModel& model, double a_L, int d);

/// <psi, (Delta + V) psi>.
double quadratic_form(const Grid& V, const Grid& psi);

/// psi with its anchor value replaced by sqrt(1 - sum of the others squared).
/// Throws DomainError when that radicand is not positive.
Grid complete_profile(const Grid& psi_off, const Point& anchor);

/// quadratic_form of complete_profile(psi_off, anchor).
double constrained_form(const Grid& V, const Grid& psi_off, const Point& anchor);

/// Gradient of constrained_form with respect to the off-anchor values; the
/// anchor entry of the result is zero.
Grid form_gradient(const Grid& V, const Grid& psi_off, const Point& anchor);

struct DecayReport {
  double c = 0.0;          // constant the bound was checked with
  double max_ratio = 0.0;  // max over x != center of phi^2 / bound
  Point worst{};
  bool holds = false;
  double c_fit = 0.0;  // largest c for which the bound holds
};

/// phi(x)^2 <= (1 + c rate)^{-2|x - center|} for x != center.
DecayReport decay_check(const Grid& phi, const Point& center, double rate, double c);

struct ApproximationError {
  double eig_err = 0.0;
  double fun_err = 0.0;
  double xi_cap_x0 = 0.0;
};

/// a_L |lambda_1 - (Xi(x0) + bar_lambda)| and (a_L/d_L) ||phi_1 - bar_phi(. - x0)||.
ApproximationError approximation_error(double xi_cap_x0, const BarSolution& bar, const SpectralResult& result,
                                       const Point& x0, double a_L, double d_L);

struct GapCheck {
  bool pass = false;
  double margin = 0.0;  // xi(x0) - C' a_L/d_L - lambda_2
};

GapCheck spectral_gap_check(const SpectralResult& result, double xi_x0, double a_L, double d_L,
                            double c_prime = 0.25);

nlohmann::json to_json(const SpectralResult& r);

}  // namespace corrloc
