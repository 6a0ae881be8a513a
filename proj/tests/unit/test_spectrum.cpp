#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "corrloc/covariance.hpp"
#include "corrloc/errors.hpp"
#include "corrloc/field.hpp"
#include "corrloc/rng.hpp"
#include "corrloc/spectrum.hpp"

using namespace corrloc;

namespace {

double dot(const Grid& a, const Grid& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

Grid random_grid(const Box& box, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Grid g(box);
  for (double& v : g.values) v = n(rng);
  return g;
}

void check_pairs(const SpectralResult& r, double tol) {
  for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
    CHECK(std::abs(std::sqrt(dot(r.eigenfunctions[i], r.eigenfunctions[i])) - 1.0) <= 1e-12);
    CHECK(r.residuals[i] <= tol);
    CHECK(r.eigenfunctions[i].at(r.centers[i]) > 0.0);
    if (i > 0) CHECK(r.eigenvalues[i] <= r.eigenvalues[i - 1] + 1e-12);
  }
}

}  // namespace

TEST_CASE("stencil") {
  const Box b3(1, 3);
  Grid psi(b3, std::vector<double>{1, 0, -1});
  const Grid h = apply_hamiltonian(Grid(b3), psi);
  CHECK(h.values == std::vector<double>{-2, 0, 2});

  const Box b(2, 5);
  Grid delta(b);
  delta.at(Point{1, 0, 0}) = 1.0;
  const Grid hd = apply_hamiltonian(Grid(b), delta);
  CHECK(hd.at(Point{1, 0, 0}) == -4.0);
  for (const Point& e : unit_vectors(2)) CHECK(hd.at(Point{1, 0, 0} + e) == 1.0);
  CHECK(hd.at(Point{0, 1, 0}) == 0.0);
  CHECK(quadratic_form(Grid(b), delta) == -4.0);

  const Grid x = random_grid(b, 3);
  const Grid h0 = apply_hamiltonian(Grid(b), x);
  const Grid hc = apply_hamiltonian(Grid(b, 2.5), x);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(std::abs(hc.values[i] - (h0.values[i] + 2.5 * x.values[i])) <= 1e-14);
  CHECK_THROWS_AS(apply_hamiltonian(Grid(b), Grid(b3)), DomainError);
}

TEST_CASE("Dirichlet Laplacian closed form") {
  for (int n : {3, 9, 21}) {
    const Grid zero(Box(1, n));
    const int k = std::min(n, 5);
    const SpectralResult a = top_k_eigs(zero, k);
    const SpectralResult b = dense_eigs(zero);
    REQUIRE(static_cast<int>(b.eigenvalues.size()) == n);
    for (int j = 1; j <= k; ++j) {
      const double exact = -2.0 + 2.0 * std::cos(j * std::numbers::pi / (n + 1));
      CHECK(a.eigenvalues[j - 1] == doctest::Approx(exact).epsilon(1e-12));
      CHECK(b.eigenvalues[j - 1] == doctest::Approx(exact).epsilon(1e-12));
    }
    check_pairs(a, 1e-10);
  }
  CHECK(top_k_eigs(Grid(Box(1, 3)), 1).eigenvalues[0] == doctest::Approx(-0.585786).epsilon(1e-6));
}

TEST_CASE("tied blocks for the symmetric 2-D Laplacian") {
  const SpectralResult r = dense_eigs(Grid(Box(2, 7)), 3);
  CHECK(r.eigenvalues[1] == doctest::Approx(r.eigenvalues[2]).epsilon(1e-12));
  REQUIRE(r.tied_blocks.size() >= 1);
  CHECK(r.tied_blocks[0] == std::pair<int, int>{1, 3});
  const SpectralResult l = top_k_eigs(Grid(Box(2, 7)), 3);
  // The Lanczos pair must span the same 2-D eigenspace.
  for (int i = 1; i <= 2; ++i) {
    const double p = dot(l.eigenfunctions[i], r.eigenfunctions[1]);
    const double q = dot(l.eigenfunctions[i], r.eigenfunctions[2]);
    CHECK(p * p + q * q == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("shift equivariance") {
  const Grid V = random_grid(Box(2, 15), 8, 2.0);
  Grid W = V;
  for (double& v : W.values) v += 3.25;
  const SpectralResult a = top_k_eigs(V, 4);
  const SpectralResult b = top_k_eigs(W, 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(b.eigenvalues[i] - a.eigenvalues[i] == doctest::Approx(3.25).epsilon(1e-10));
    CHECK(std::abs(dot(a.eigenfunctions[i], b.eigenfunctions[i])) >= 1.0 - 1e-8);
  }
}

TEST_CASE("Lanczos agrees with the dense oracle") {
  const SpectralResult a = top_k_eigs(random_grid(Box(2, 17), 16), 5);
  const SpectralResult b = dense_eigs(random_grid(Box(2, 17), 16), 5);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(a.eigenvalues[i] - b.eigenvalues[i]) <= 1e-10);

  const std::vector<CovarianceModel> models{CovarianceModel::iid(1), CovarianceModel::iid(2),
                                            CovarianceModel::cube_indicator(1, 3),
                                            CovarianceModel::cube_indicator(2, 2),
                                            CovarianceModel::gaussian_kernel(2, 1.5)};
  for (int inst = 0; inst < 50; ++inst) {
    const CovarianceModel& m = models[inst % models.size()];
    const std::int64_t L = m.dim() == 1 ? 400 + 10 * inst : 20 + inst % 14;
    Grid V = sample_field(m, L, derive_seed(99, inst)).grid;
    for (double& v : V.values) v *= 3.0;
    REQUIRE(V.size() <= 2000);
    const SpectralResult lz = top_k_eigs(V, 5);
    const SpectralResult de = dense_eigs(V, 6);
    check_pairs(lz, 1e-10);
    for (int i = 0; i < 5; ++i) {
      CHECK(std::abs(lz.eigenvalues[i] - de.eigenvalues[i]) <= 1e-9);
      const double lo = i > 0 ? de.eigenvalues[i - 1] - de.eigenvalues[i] : INFINITY;
      const double hi = de.eigenvalues[i] - de.eigenvalues[i + 1];
      if (std::min(lo, hi) > 1e-4) CHECK(std::abs(dot(lz.eigenfunctions[i], de.eigenfunctions[i])) >= 1.0 - 1e-8);
    }
  }
}

TEST_CASE("Rayleigh quotient, variational bound and nested monotonicity") {
  const Grid V = random_grid(Box(2, 31), 5, 2.0);
  const SpectralResult r = top_k_eigs(V, 2);
  CHECK(quadratic_form(V, r.eigenfunctions[0]) == doctest::Approx(r.eigenvalues[0]).epsilon(1e-10));
  double vmax = -INFINITY;
  for (double v : V.values) vmax = std::max(vmax, v);
  CHECK(r.eigenvalues[0] <= vmax);
  double prev = -INFINITY;
  for (int side = 3; side <= 31; side += 4) {
    const double l = top_k_eigs(restrict_to(V, Box(2, side)), 1).eigenvalues[0];
    CHECK(l >= prev - 1e-12);
    prev = l;
  }
}

TEST_CASE("solver preconditions") {
  const Grid V(Box(1, 41));
  CHECK_THROWS_AS(top_k_eigs(V, 33), DomainError);
  CHECK_THROWS_AS(top_k_eigs(V, 0), DomainError);
  CHECK_THROWS_AS(top_k_eigs(Grid(Box(1, 3)), 4), DomainError);
  LanczosOptions o;
  o.tol = 1e-14;
  CHECK_THROWS_AS(top_k_eigs(V, 1, o), DomainError);
  CHECK_THROWS_AS(dense_eigs(Grid(Box(2, 65))), SizeError);
  LanczosOptions few;
  few.max_iter = 4;
  try {
    top_k_eigs(random_grid(Box(1, 401), 2), 3, few);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(!e.residuals.empty());
  }
}

TEST_CASE("bar problem") {
  const auto iid = CovarianceModel::iid(1);
  const BarSolution z = solve_bar_problem(iid, 0.0, 3);
  CHECK(z.bar_lambda == doctest::Approx(-2.0 + std::sqrt(2.0)).epsilon(1e-12));

  const BarSolution b = solve_bar_problem(iid, 8.0, 9);
  CHECK(b.bar_lambda > -2.0);
  CHECK(b.bar_lambda <= -2.0 + 2.0 / 8.0);
  CHECK(b.bar_phi.at(Point{1, 0, 0}) / b.bar_phi.at(Point{}) == doctest::Approx(1.0 / 8).epsilon(0.15));
  CHECK(b.residual <= 1e-12);
  CHECK(b.expansion_value == -1.75);
  CHECK(bar_lambda_expansion(iid, 8, 1) == -1.75);
  CHECK(bar_lambda_expansion(CovarianceModel::cube_indicator(1, 2), 8, 1) == -1.5);
  CHECK_THROWS_AS(bar_lambda_expansion(iid, 0.0, 1), DomainError);
  CHECK_THROWS_AS(solve_bar_problem(iid, 8.0, 4), DomainError);

  const BarSolution s = solve_bar_problem(CovarianceModel::gaussian_kernel(2, 1.5), 9.0, 9);
  for (int x = -4; x <= 4; ++x)
    for (int y = -4; y <= 4; ++y) {
      const double v = s.bar_phi.at(Point{x, y, 0});
      CHECK(v == doctest::Approx(s.bar_phi.at(Point{y, x, 0})).epsilon(1e-10));
      CHECK(v == doctest::Approx(s.bar_phi.at(Point{-x, y, 0})).epsilon(1e-10));
      CHECK(v == doctest::Approx(s.bar_phi.at(Point{x, -y, 0})).epsilon(1e-10));
    }
}

TEST_CASE("bar eigenvalue approaches the expansion") {
  for (const auto& m : {CovarianceModel::iid(1), CovarianceModel::cube_indicator(1, 2),
                        CovarianceModel::cube_indicator(2, 2), CovarianceModel::gaussian_kernel(2, 2)}) {
    double prev = INFINITY;
    for (double ratio : {5.0, 10.0, 20.0, 40.0}) {
      const double a = ratio * m.d_L();
      const BarSolution b = solve_bar_problem(m, a, 9);
      const double rel = std::abs(b.bar_lambda - b.expansion_value) / (m.d_L() / a);
      CHECK(rel < prev);
      prev = rel;
    }
  }
}

TEST_CASE("mass at the origin of the bar profile") {
  // Fitted c in bar_phi(0)^2 = 1 - (1 + c a/d)^-2 stays in a fixed band.
  for (const auto& m : {CovarianceModel::iid(1), CovarianceModel::iid(2), CovarianceModel::cube_indicator(1, 2)}) {
    for (double ratio : {5.0, 10.0, 20.0, 40.0}) {
      const BarSolution b = solve_bar_problem(m, ratio * m.d_L(), 9);
      const double p0 = b.bar_phi.at(Point{});
      const double c = (1.0 / std::sqrt(1.0 - p0 * p0) - 1.0) / ratio;
      INFO(m.describe(), " ratio ", ratio, " c ", c);
      CHECK(c > 0.2);
      CHECK(c < 3.0);
      CHECK(p0 * p0 >= 1.0 - std::pow(1.0 + 0.2 * ratio, -2.0));
    }
  }
}

TEST_CASE("decay") {
  for (const auto& m : {CovarianceModel::iid(1), CovarianceModel::cube_indicator(1, 2),
                        CovarianceModel::cube_indicator(2, 3)}) {
    const BarSolution b = solve_bar_problem(m, 10.0 * m.d_L(), 11);
    const DecayReport r = decay_check(b.bar_phi, Point{}, 10.0, 0.5);
    CHECK(r.holds);
    CHECK(r.c_fit >= 0.5);
  }
  Grid delta(Box(2, 9));
  delta.at(Point{}) = 1.0;
  CHECK(decay_check(delta, Point{}, 10.0, 0.5).holds);
  const Grid flat(Box(1, 9), 1.0 / 3.0);
  const DecayReport f = decay_check(flat, Point{}, 10.0, 0.5);
  CHECK_FALSE(f.holds);
  CHECK(f.max_ratio > 1.0);
}

TEST_CASE("constrained form and its gradient") {
  const Grid V = random_grid(Box(2, 9), 12, 3.0);
  const SpectralResult r = top_k_eigs(V, 1);
  const Point c = r.centers[0];
  const Grid phi = r.eigenfunctions[0];
  CHECK(constrained_form(V, phi, c) == doctest::Approx(r.eigenvalues[0]).epsilon(1e-10));
  for (double g : form_gradient(V, phi, c).values) CHECK(std::abs(g) <= 1e-9);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int rep = 0; rep < 5; ++rep) {
    Grid psi(V.box);
    for (double& v : psi.values) v = n(rng);
    const Point anchor{1, -2, 0};
    const Grid g = form_gradient(V, psi, anchor);
    CHECK(g.at(anchor) == 0.0);
    for (std::size_t i = 0; i < psi.size(); ++i) {
      if (psi.box.point(i) == anchor) continue;
      Grid p = psi, q = psi;
      p.values[i] += 1e-6;
      q.values[i] -= 1e-6;
      const double fd = (constrained_form(V, p, anchor) - constrained_form(V, q, anchor)) / 2e-6;
      CHECK(std::abs(fd - g.values[i]) <= 1e-6 * std::max(1.0, std::abs(g.values[i])));
    }
  }
  Grid heavy(Box(1, 3), 1.0);
  CHECK_THROWS_AS(complete_profile(heavy, Point{}), DomainError);
  CHECK(complete_profile(Grid(Box(1, 3)), Point{}).values == std::vector<double>{0, 1, 0});
}

TEST_CASE("the constrained form is concave at the bar maximiser") {
  for (const auto& m : {CovarianceModel::iid(2), CovarianceModel::cube_indicator(2, 2)}) {
    const BarSolution b = solve_bar_problem(m, 8.0 * m.d_L(), 7);
    Grid V = b.shape_used;
    for (double& v : V.values) v = -v;
    const double f0 = constrained_form(V, b.bar_phi, Point{});
    CHECK(f0 == doctest::Approx(b.bar_lambda).epsilon(1e-12));
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n;
    for (int dir = 0; dir < 20; ++dir) {
      Grid u(V.box);
      double norm2 = 0.0;
      for (double& v : u.values) {
        v = n(rng);
        norm2 += v * v;
      }
      u.at(Point{}) = 0.0;
      for (double& v : u.values) v /= std::sqrt(norm2);
      for (double h : {1e-3, 1e-2, 5e-2}) {
        Grid p = b.bar_phi, q = b.bar_phi;
        for (std::size_t i = 0; i < u.size(); ++i) {
          p.values[i] += h * u.values[i];
          q.values[i] -= h * u.values[i];
        }
        CHECK(constrained_form(V, p, Point{}) + constrained_form(V, q, Point{}) - 2.0 * f0 <= 0.0);
      }
    }
  }
}

TEST_CASE("zero-fluctuation field is matched by the bar problem") {
  struct Case {
    CovarianceModel m;
    double a;
  };
  for (const Case& k : {Case{CovarianceModel::iid(1), 6.0}, Case{CovarianceModel::iid(2), 8.0},
                        Case{CovarianceModel::cube_indicator(1, 2), 20.0}}) {
    for (int r : {9, 11}) {
      const Point x0{2, 0, 0};
      const Box QR(k.m.dim(), 31, Point{});
      Grid V(QR);
      for (std::size_t i = 0; i < QR.size(); ++i) V.values[i] = k.a * k.m(QR.point(i) - x0);
      const BarSolution bar = solve_bar_problem(k.m, k.a, r);
      const SpectralResult res = k.m.dim() == 1 ? dense_eigs(V, 1) : top_k_eigs(V, 1);
      const ApproximationError e = approximation_error(k.a, bar, res, x0, k.a, k.m.d_L());
      INFO("d = ", k.m.dim(), ", a = ", k.a, ", r = ", r);
      CHECK(e.eig_err <= 1e-6);
      CHECK(e.fun_err <= 1e-3);
    }
  }
  const BarSolution bar = solve_bar_problem(CovarianceModel::iid(1), 6.0, 9);
  const SpectralResult small = dense_eigs(Grid(Box(1, 7)), 1);
  CHECK_THROWS_AS(approximation_error(6.0, bar, small, Point{}, 6.0, 1.0), DomainError);
}

TEST_CASE("spectral gap check") {
  Grid V(Box(1, 41));
  // Equal peaks of height 12: lambda_2 is within 1e-6 of lambda_1 = 12 - 1.83,
  // above the threshold 12 - 0.25 * 12.
  V.at(Point{-10, 0, 0}) = 12.0;
  V.at(Point{10, 0, 0}) = 12.0;
  const SpectralResult two = dense_eigs(V, 2);
  CHECK(two.eigenvalues[0] - two.eigenvalues[1] < 1e-6);
  const GapCheck g = spectral_gap_check(two, 12.0, 12.0, 1.0);
  CHECK_FALSE(g.pass);
  CHECK(g.margin < 0.0);

  V.at(Point{10, 0, 0}) = 0.0;
  const SpectralResult one = dense_eigs(V, 2);
  CHECK(spectral_gap_check(one, 12.0, 12.0, 1.0).pass);
  CHECK_THROWS_AS(spectral_gap_check(dense_eigs(V, 1), 12.0, 12.0, 1.0), DomainError);
}

TEST_CASE("localisation centre and JSON") {
  Grid phi(Box(1, 5), std::vector<double>{0.1, -0.7, 0.7, 0.1, 0.0});
  CHECK(localisation_center(phi) == Point{-1, 0, 0});
  const SpectralResult r = top_k_eigs(random_grid(Box(1, 21), 1), 3);
  const auto j = to_json(r);
  CHECK(j["eigenvalues"].size() == 3);
  CHECK(j["centers"].size() == 3);
  CHECK(j.contains("residuals"));
  CHECK(j["gap"].get<double>() == doctest::Approx(r.eigenvalues[0] - r.eigenvalues[1]));
}
