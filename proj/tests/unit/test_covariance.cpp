#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "corrloc/covariance.hpp"
#include "corrloc/errors.hpp"
#include "corrloc/scales.hpp"

using namespace corrloc;

namespace {

std::vector<CovarianceModel> all_models(int d) {
  return {CovarianceModel::iid(d), CovarianceModel::cube_indicator(d, 2), CovarianceModel::cube_indicator(d, 4.5),
          CovarianceModel::gaussian_kernel(d, 1.5), CovarianceModel::gaussian_kernel(d, 5),
          CovarianceModel::exponential(d, 0.3)};
}

// Naive O(n^2) DFT of a 1-D real sequence.
std::vector<double> naive_dft(const std::vector<double>& c) {
  const std::size_t n = c.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> s = 0;
    for (std::size_t j = 0; j < n; ++j)
      s += c[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j * k) / static_cast<double>(n));
    out[k] = s.real();
  }
  return out;
}

}  // namespace

TEST_CASE("covariance evaluation") {
  CHECK(eval_cov(CovarianceModel::iid(1), Point{1, 0, 0}) == 0.0);
  CHECK(eval_cov(CovarianceModel::cube_indicator(1, 4), Point{2, 0, 0}) == 0.5);
  CHECK(eval_cov(CovarianceModel::gaussian_kernel(2, 5), Point{1, 0, 0}) == doctest::Approx(0.980199).epsilon(1e-6));
  CHECK(eval_cov(CovarianceModel::exponential(2, 0.1), Point{3, 4, 0}) == doctest::Approx(std::exp(-0.5)));
  CHECK(eval_cov(CovarianceModel::cube_indicator(2, 4), Point{1, 2, 0}) == doctest::Approx(0.75 * 0.5));
}

TEST_CASE("symmetry, range and normalisation on random points") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> coord(-12, 12);
  for (int d = 1; d <= 3; ++d) {
    for (const auto& m : all_models(d)) {
      CHECK(m(Point{}) == 1.0);
      for (int i = 0; i < 100; ++i) {
        Point x{};
        for (int k = 0; k < d; ++k) x[k] = coord(rng);
        CHECK(m(x) == m(-x));
        CHECK(m(x) >= 0.0);
        CHECK(m(x) <= 1.0);
        if (x != Point{}) CHECK(m(x) <= 1.0 - 1.0 / m.d_L() + 1e-15);
      }
    }
  }
}

TEST_CASE("d_L") {
  CHECK(derive_dL(CovarianceModel::iid(2)) == 1.0);
  CHECK(derive_dL(CovarianceModel::cube_indicator(1, 4)) == 4.0);
  CHECK(derive_dL(CovarianceModel::cube_indicator(3, 2)) == 2.0);
  CHECK(derive_dL(CovarianceModel::gaussian_kernel(1, 5)) == doctest::Approx(50.5017).epsilon(1e-6));
  CHECK(derive_dL(CovarianceModel::gaussian_kernel(1, 5)) == doctest::Approx(1.0 / (1.0 - std::exp(-0.02))));
  for (int d = 1; d <= 3; ++d) {
    for (const auto& m : all_models(d)) {
      double sup = 0.0;
      for (const Point& e : unit_vectors(d)) sup = std::max(sup, eval_cov(m, e));
      CHECK(std::abs(1.0 - 1.0 / derive_dL(m) - sup) <= 1e-12);
      CHECK(m.d_L() == derive_dL(m));
    }
  }
  CHECK_THROWS_AS(CovarianceModel::cube_indicator(1, 0), DomainError);
  CHECK_THROWS_AS(CovarianceModel::gaussian_kernel(1, -1), DomainError);
}

TEST_CASE("shape") {
  for (const auto& m : all_models(2)) CHECK(shape(m, 6, Point{}) == 0.0);
  CHECK(shape(CovarianceModel::iid(1), 6, Point{3, 0, 0}) == 6.0);
  CHECK(shape(CovarianceModel::cube_indicator(1, 4), 6, Point{1, 0, 0}) == 1.5);
  const auto m = CovarianceModel::gaussian_kernel(2, 3);
  for (int x = -5; x <= 5; ++x) {
    const Point p{x, 1 - x, 0};
    CHECK(shape(m, 4.2, p) == 4.2 * (1.0 - m(p)));
    CHECK((shape(m, 4.2, p) == 0.0) == (m(p) == 1.0));
  }
}

TEST_CASE("hypothesis report") {
  ScaleOptions o;
  ScaleOptions w;
  w.R_L = 15;
  w.r_L = 5;
  const auto iid = CovarianceModel::iid(1);
  auto r = check_hypotheses(iid, 1024, make_scales(1024, 1, 1.0, 0.0, o));
  CHECK(r.tail_stat == 0.0);
  CHECK(std::isfinite(r.dL_over_aL));

  const auto cube = CovarianceModel::cube_indicator(1, 4);
  r = check_hypotheses(cube, 1024, make_scales(1024, 1, 4.0, 0.0, w));
  CHECK(r.tail_stat == 0.0);
  CHECK(r.c_lower == doctest::Approx(1.0));
  CHECK(r.shortrange_ok);

  const auto ex = CovarianceModel::exponential(1, 0.05);
  r = check_hypotheses(ex, 64, make_scales(64, 1, ex.d_L(), 0.0, w));
  // Direct scan over the annulus |x| >= exp(sqrt(ln 64)) inside Q_{3L}.
  const double rmin = std::exp(std::sqrt(std::log(64.0)));
  double oracle = 0.0;
  for (int x = 1; x <= 96; ++x)
    if (x >= rmin) oracle = std::max(oracle, std::exp(-0.05 * x) * std::log(static_cast<double>(x)));
  CHECK(r.tail_stat > 0.0);
  CHECK(r.tail_stat == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(std::isfinite(r.tau_ratio));
  const nlohmann::json j = r;
  CHECK(j.contains("tail_stat"));
  CHECK(j.contains("assumption15_ok"));
}

TEST_CASE("circulant spectrum") {
  for (double v : circulant_spectrum(CovarianceModel::iid(1), 8)) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
  const auto spec = circulant_spectrum(CovarianceModel::cube_indicator(1, 2), 16);
  REQUIRE(spec.size() == 16);
  for (int k = 0; k < 16; ++k) {
    CHECK(spec[k] == doctest::Approx(1.0 + std::cos(2.0 * std::numbers::pi * k / 16.0)).epsilon(1e-12));
    CHECK(spec[k] >= -1e-14);
  }
  // Independent 1-D check against a naive DFT of the minimum-image sequence.
  const auto g = CovarianceModel::gaussian_kernel(1, 1);
  std::vector<double> c(20);
  for (int j = 0; j < 20; ++j) c[j] = g(Point{std::min(j, 20 - j), 0, 0});
  const auto naive = naive_dft(c);
  const auto fast = circulant_spectrum(g, 20);
  for (int k = 0; k < 20; ++k) CHECK(fast[k] == doctest::Approx(naive[k]).epsilon(1e-12));
}

TEST_CASE("circulant embedding fails when the torus is too small") {
  // A slowly decaying exponential wrapped on a small 2-D torus has a
  // negative Fourier coefficient.
  try {
    circulant_spectrum(CovarianceModel::exponential(2, 0.01), 8);
    FAIL("expected EmbeddingInvalid");
  } catch (const EmbeddingInvalid& e) {
    CHECK(e.min_entry < -1e-8 * e.max_entry);
  }
}

TEST_CASE("Bochner positivity with enough padding") {
  for (int d = 1; d <= 2; ++d) {
    for (const auto& m : {CovarianceModel::cube_indicator(d, 3), CovarianceModel::gaussian_kernel(d, 1.2)}) {
      const int n = 4 * std::max(1, m.effective_radius());
      const auto spec = circulant_spectrum(m, n);
      double mx = 0.0, mn = INFINITY;
      for (double v : spec) {
        mx = std::max(mx, v);
        mn = std::min(mn, v);
      }
      CHECK(mn >= -1e-10 * mx);
    }
  }
}

TEST_CASE("model JSON") {
  const auto m = CovarianceModel::from_json({{"family", "cube_indicator"}, {"m", 4}}, 2);
  CHECK(m.family() == Family::cube_indicator);
  CHECK(m.d_L() == 4.0);
  CHECK(m.dim() == 2);
  const auto back = CovarianceModel::from_json(m.to_json(), 2);
  CHECK(back.param() == m.param());
  CHECK(CovarianceModel::from_json({{"family", "gaussian_kernel"}, {"ell", 5}}, 1).d_L() ==
        doctest::Approx(50.5017).epsilon(1e-6));
  CHECK_THROWS_AS(CovarianceModel::from_json({{"family", "ball"}}, 1), ConfigError);
  CHECK_THROWS_AS(CovarianceModel::from_json({{"family", "cube_indicator"}}, 1), ConfigError);
  CHECK_THROWS_AS(family_from_string("nope"), ConfigError);
}
