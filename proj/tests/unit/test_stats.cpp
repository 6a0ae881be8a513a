#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "corrloc/covariance.hpp"
#include "corrloc/errors.hpp"
#include "corrloc/extremes.hpp"
#include "corrloc/field.hpp"
#include "corrloc/rng.hpp"
#include "corrloc/scales.hpp"
#include "corrloc/stats.hpp"

using namespace corrloc;

namespace {

double uniform_cdf(double x) { return std::clamp(x, 0.0, 1.0); }

// Binomial tolerance for "in at least 99% of seeds" checked over `runs`
// seeds: allow the observed pass rate to sit 3 SE below 0.99.
double calibrated_floor(int runs) { return 0.99 - 3.0 * std::sqrt(0.99 * 0.01 / runs); }

}  // namespace

TEST_CASE("KS examples") {
  const std::vector<double> one{0.5};
  CHECK(ks_statistic(one, uniform_cdf) == 0.5);
  const int n = 40;
  std::vector<double> q;
  for (int i = 1; i <= n; ++i) q.push_back((i - 0.5) / n);
  CHECK(ks_statistic(q, uniform_cdf) == doctest::Approx(0.5 / n).epsilon(1e-12));
  const std::vector<double> unsorted{0.3, 0.1};
  CHECK_THROWS_AS(ks_statistic(unsorted, uniform_cdf), DomainError);
  CHECK_THROWS_AS(ks_statistic(std::vector<double>{}, uniform_cdf), DomainError);
}

TEST_CASE("KS calibration at n = 10^4") {
  const int runs = 300;
  const int n = 10000;
  int ok = 0;
  for (int r = 0; r < runs; ++r) {
    Engine rng(derive_seed(2024, r, Stream::oracle));
    std::uniform_real_distribution<double> u;
    std::vector<double> x(n);
    for (double& v : x) v = u(rng);
    std::sort(x.begin(), x.end());
    const double D = ks_statistic(x, uniform_cdf);
    CHECK(D >= 0.0);
    CHECK(D <= 1.0);
    if (D <= 1.63 / std::sqrt(n)) ++ok;
  }
  CHECK(static_cast<double>(ok) / runs >= calibrated_floor(runs));
}

TEST_CASE("KS is invariant under increasing reparametrisation") {
  Engine rng(9);
  std::normal_distribution<double> g;
  std::vector<double> x(500);
  for (double& v : x) v = g(rng);
  std::sort(x.begin(), x.end());
  const auto cdf = [](double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); };
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double t) { return std::exp(t); });
  const auto cdf_y = [&](double s) { return s <= 0 ? 0.0 : cdf(std::log(s)); };
  CHECK(ks_statistic(y, cdf_y) == doctest::Approx(ks_statistic(x, cdf)).epsilon(1e-12));
}

TEST_CASE("Gumbel CDF") {
  CHECK(gumbel_cdf(0.0) == doctest::Approx(0.367879).epsilon(1e-6));
  CHECK(gumbel_cdf(-std::log(std::log(2.0))) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(gumbel_cdf(50.0) == 1.0);
  CHECK(gumbel_cdf(-10.0) < 1e-9);
  double prev = 0.0;
  for (double u = -5.0; u <= 20.0; u += 0.01) {
    const double f = gumbel_cdf(u);
    CHECK(f >= prev);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    prev = f;
  }
}

TEST_CASE("Poisson dispersion") {
  const std::vector<int> constant(100, 3);
  const TestReport c = poisson_dispersion(constant);
  CHECK(c.extras.at("dispersion") == 0.0);
  CHECK_FALSE(c.pass);
  CHECK_THROWS_AS(poisson_dispersion(std::vector<int>(100, 0)), DomainError);
  CHECK_THROWS_AS(poisson_dispersion(std::vector<int>(49, 1)), DomainError);

  const int runs = 300;
  int inside = 0;
  for (int r = 0; r < runs; ++r) {
    Engine rng(derive_seed(5, r, Stream::oracle));
    std::poisson_distribution<int> p(2.0);
    std::vector<int> counts(5000);
    for (int& v : counts) v = p(rng);
    const TestReport t = poisson_dispersion(counts);
    CHECK(t.pass == (t.statistic <= t.threshold));
    const double D = t.extras.at("dispersion");
    if (D >= 0.9 && D <= 1.1) ++inside;
  }
  CHECK(static_cast<double>(inside) / runs >= calibrated_floor(runs));

  std::vector<int> rare(100, 0);
  rare[0] = 1;
  rare[1] = 1;
  const TestReport t = poisson_dispersion(rare);
  CHECK_FALSE(t.pass);
  CHECK(std::isinf(t.statistic));

  std::vector<int> skew(200);
  for (std::size_t i = 0; i < skew.size(); ++i) skew[i] = static_cast<int>(i % 3);
  const TestReport a = poisson_dispersion(skew, 0.5, 0.7);
  CHECK(a.pass == (a.extras.at("dispersion") >= 0.5 && a.extras.at("dispersion") <= 0.7));
  CHECK(a.pass == (a.statistic <= a.threshold));
}

TEST_CASE("Poisson dispersion of exceedance counts in the i.i.d. pipeline") {
  const std::int64_t L = 4096;
  const double a = compute_aL(L, 1);
  const MesoPartition p = build_partition(L, 1023, 1);
  std::vector<int> counts;
  for (int s = 0; s < 30; ++s) {
    const FieldSample f = sample_field(CovarianceModel::iid(1), L, derive_seed(17, s));
    for (int c : exceedance_counts(f.grid, p, a, -1.0)) counts.push_back(c);
  }
  REQUIRE(counts.size() >= 50);
  CHECK(poisson_dispersion(counts).pass);
}

TEST_CASE("tail frequency") {
  std::vector<double> low(200, -1.0);
  const auto [e0, s0] = tail_frequency(low, 0.0, 5.0);
  CHECK(e0 == 0.0);
  CHECK(s0 == 0.0);
  CHECK_THROWS_AS(tail_frequency(std::vector<double>(99, 0.0), 0.0, 1.0), DomainError);

  // Max of a PPP with intensity e^{-u} du, scaled per unit mass: exceedance
  // frequency of a standard exponential approximates e^{-u}.
  Engine rng(31);
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> x(20000);
  for (double& v : x) v = ex(rng);
  double prev = INFINITY;
  for (double u : {0.0, 0.5, 1.0, 2.0}) {
    const auto [est, se] = tail_frequency(x, u, 1.0);
    CHECK(std::abs(est - std::exp(-u)) <= 3.0 * se);
    CHECK(est <= prev);
    prev = est;
  }
}

TEST_CASE("tail frequency of the i.i.d. box maxima") {
  const std::int64_t L = 4096;
  const double a = compute_aL(L, 1);
  const MesoPartition p = build_partition(L, 1023, 1);
  std::vector<double> theta;
  for (int s = 0; s < 50; ++s) {
    const FieldSample f = sample_field(CovarianceModel::iid(1), L, derive_seed(19, s));
    for (const auto& bm : box_maxima(f.grid, p)) theta.push_back(a * (bm.value - a));
  }
  const double scale = std::pow(static_cast<double>(L) / 1023.0, 1.0);
  const auto [est, se] = tail_frequency(theta, 0.0, scale);
  CHECK(std::abs(est - 1.0) <= 3.0 * se + 0.1);
}

TEST_CASE("quantiles") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK(quantile({0, 10}, 0.95) == doctest::Approx(9.5));
  CHECK_THROWS_AS(median({}), DomainError);
}

TEST_CASE("TestReport JSON") {
  TestReport r;
  r.statistic = 0.04;
  r.n = 400;
  r.threshold = 0.08;
  r.pass = true;
  r.description = "ks";
  r.extras["mean"] = 1.5;
  const nlohmann::json j = r;
  CHECK(j["statistic"] == 0.04);
  CHECK(j["n"] == 400);
  CHECK(j["extras"]["mean"] == 1.5);
  const TestReport back = j.get<TestReport>();
  CHECK(back.statistic == r.statistic);
  CHECK(back.pass);
  CHECK(back.extras.at("mean") == 1.5);
  nlohmann::json nan_stat = j;
  nan_stat["statistic"] = nullptr;
  CHECK(std::isnan(nan_stat.get<TestReport>().statistic));
}
