#include "corrloc/extremes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "corrloc/errors.hpp"
#include "corrloc/normal.hpp"

namespace corrloc {

MesoPartition build_partition(std::int64_t L, int R_L, int d) {
  if (R_L < 1 || R_L % 2 == 0) throw DomainError("build_partition: R_L must be a positive odd integer");
  const int gap = static_cast<int>(std::floor(std::sqrt(static_cast<double>(R_L))));
  const int s = R_L + gap;
  if (2 * static_cast<std::int64_t>(s) > L) throw DomainError("build_partition: requires R_L + floor(sqrt R_L) <= L/2");
  MesoPartition p;
  p.L = L;
  p.R_L = R_L;
  p.dim = d;
  p.super_side = s;
  p.domain = Box::centered(d, static_cast<double>(L));
  p.per_axis = p.domain.side() / s;
  const int offset = (s - R_L) / 2 + R_L / 2;
  const Point lo = p.domain.lower();
  std::size_t count = 1;
  for (int i = 0; i < d; ++i) count *= static_cast<std::size_t>(p.per_axis);
  for (std::size_t idx = 0; idx < count; ++idx) {
    Point c{};
    std::size_t rem = idx;
    for (int i = d - 1; i >= 0; --i) {
      const int j = static_cast<int>(rem % p.per_axis);
      rem /= p.per_axis;
      c[i] = lo[i] + j * s + offset;
    }
    p.centers.push_back(c);
  }
  return p;
}

namespace {

std::vector<std::size_t> descending_indices(const std::vector<double>& values, std::size_t top) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto cmp = [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  };
  if (top == 0 || top >= idx.size()) {
    std::sort(idx.begin(), idx.end(), cmp);
  } else {
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(top), idx.end(), cmp);
    idx.resize(top);
  }
  return idx;
}

}  // namespace

ExtremeRecord order_statistics(const Grid& field, std::int64_t L, double a_L, std::size_t top) {
  ExtremeRecord rec;
  const auto idx = descending_indices(field.values, top);
  const int d = field.box.dim();
  for (std::size_t i : idx) {
    const Point y = field.box.point(i);
    const double v = field.values[i];
    rec.order.push_back({y, v});
    std::array<double, 3> pos{};
    for (int k = 0; k < d; ++k) pos[k] = static_cast<double>(y[k]) / static_cast<double>(L);
    rec.rescaled.emplace_back(pos, a_L * (v - a_L));
  }
  return rec;
}

std::vector<BoxMax> box_maxima(const Grid& field, const MesoPartition& partition) {
  std::vector<BoxMax> out;
  for (std::size_t j = 0; j < partition.n_boxes(); ++j) {
    const Box core = partition.core(j);
    if (!field.box.contains(core)) throw DomainError("box_maxima: core outside the field box");
    BoxMax best{core.point(0), -std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < core.size(); ++i) {
      const Point x = core.point(i);
      const double v = field.at(x);
      if (v > best.value) best = {x, v};
    }
    out.push_back(best);
  }
  return out;
}

std::vector<int> exceedance_counts(const Grid& field, const MesoPartition& partition, double a_L, double u) {
  std::vector<int> out;
  for (std::size_t j = 0; j < partition.n_boxes(); ++j) {
    const Box core = partition.core(j);
    int c = 0;
    for (std::size_t i = 0; i < core.size(); ++i)
      if (a_L * (field.at(core.point(i)) - a_L) > u) ++c;
    out.push_back(c);
  }
  return out;
}

std::vector<int> rank_permutation(const std::vector<Point>& centers, const std::vector<Point>& order) {
  std::vector<int> ranks;
  for (const Point& c : centers) {
    const auto it = std::find(order.begin(), order.end(), c);
    if (it == order.end()) throw DomainError("rank_permutation: centre not among the listed maxima");
    ranks.push_back(static_cast<int>(it - order.begin()) + 1);
  }
  return ranks;
}

PPPReference sample_ppp_reference(double b, int K, std::uint64_t seed) {
  if (K < 50) throw DomainError("sample_ppp_reference: K must be at least 50");
  if (!(b >= 0.0)) throw DomainError("sample_ppp_reference: b must be non-negative");
  Engine rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> gauss(0.0, std::sqrt(b));
  PPPReference r;
  r.b = b;
  r.K = K;
  double gamma = 0.0;
  for (int k = 0; k < K; ++k) {
    gamma += expo(rng);
    r.u.push_back(-std::log(gamma));
  }
  for (int k = 0; k < K; ++k) r.v.push_back(b > 0.0 ? gauss(rng) : 0.0);
  std::vector<double> dec(K);
  for (int k = 0; k < K; ++k) dec[k] = r.u[k] + r.v[k];
  const auto idx = descending_indices(dec, 0);
  for (std::size_t i : idx) r.p.push_back(dec[i]);
  const double guard = r.u.back() + 6.0 * std::sqrt(b);
  while (r.k_max_safe < K && r.p[r.k_max_safe] > guard) ++r.k_max_safe;
  if (r.k_max_safe == 0) throw DomainError("sample_ppp_reference: K too small for any safe rank at this b");
  for (int k = 0; k < r.k_max_safe; ++k) r.ell.push_back(static_cast<int>(idx[k]) + 1);
  return r;
}

namespace {

// Expected number of undecorated points above the carrier of the top
// decorated value, divided by the Exp(1) factor: e^{s z + b/2} Phi(z + s) - Phi(z).
double tilt_factor(double b, double z) {
  const double s = std::sqrt(b);
  const double log_first = s * z + 0.5 * b + normal::log_sf(-(z + s));
  if (log_first > 700.0) return std::numeric_limits<double>::infinity();
  return std::max(0.0, std::exp(log_first) - normal::cdf(z));
}

}  // namespace

std::int64_t sample_top_rank(double b, Engine& rng) {
  if (!(b >= 0.0)) throw DomainError("sample_top_rank: b must be non-negative");
  if (b == 0.0) return 1;
  std::normal_distribution<double> gauss;
  std::exponential_distribution<double> expo(1.0);
  const double z = gauss(rng);
  const double e = expo(rng);
  const double mean = e * tilt_factor(b, z);
  constexpr double kCap = 1e15;
  if (!(mean <= kCap)) return static_cast<std::int64_t>(kCap) + 1;
  if (mean == 0.0) return 1;
  std::poisson_distribution<std::int64_t> pois(mean);
  return 1 + pois(rng);
}

double top_rank_one_probability(double b) {
  if (!(b >= 0.0)) throw DomainError("top_rank_one_probability: b must be non-negative");
  if (b == 0.0) return 1.0;
  auto f = [b](double z) {
    if (!std::isfinite(z)) return 0.0;
    const double a = tilt_factor(b, z);
    return std::isinf(a) ? 0.0 : normal::pdf(z) / (1.0 + a);
  };
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  // split where the integrand turns over so each piece is smooth at scale
  double total = 0.0;
  double lo = -inf;
  for (double cut : {-12.0, -8.0, -4.0, 0.0, 4.0}) {
    total += gauss_kronrod<double, 61>::integrate(f, lo, cut, 20, 1e-13, &err);
    lo = cut;
  }
  total += gauss_kronrod<double, 61>::integrate(f, lo, inf, 20, 1e-13, &err);
  return total;
}

CrossBoxCovariance cross_box_covariance(const std::vector<std::vector<double>>& maxima) {
  const std::size_t n = maxima.size();
  if (n < 200) throw DomainError("cross_box_covariance: needs at least 200 samples");
  const std::size_t m = maxima.front().size();
  std::vector<double> mean(m, 0.0), var(m, 0.0);
  for (const auto& row : maxima) {
    if (row.size() != m) throw DomainError("cross_box_covariance: ragged input");
    for (std::size_t j = 0; j < m; ++j) mean[j] += row[j];
  }
  for (double& x : mean) x /= static_cast<double>(n);
  for (const auto& row : maxima)
    for (std::size_t j = 0; j < m; ++j) var[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
  for (double& x : var) x /= static_cast<double>(n - 1);
  CrossBoxCovariance out;
  out.value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      double c = 0.0;
      for (const auto& row : maxima) c += (row[i] - mean[i]) * (row[j] - mean[j]);
      c /= static_cast<double>(n - 1);
      if (c > out.value) {
        out.value = c;
        out.i = i;
        out.j = j;
        out.std_error = std::sqrt(var[i] * var[j] / static_cast<double>(n));
      }
    }
  if (m < 2) out.value = 0.0;
  return out;
}

void write_csv(const ExtremeRecord& rec, int dim, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  out << "k";
  for (int i = 0; i < dim; ++i) out << ",y" << (i + 1);
  out << ",value,rescaled_value\n";
  char buf[64];
  for (std::size_t k = 0; k < rec.order.size(); ++k) {
    out << (k + 1);
    for (int i = 0; i < dim; ++i) out << "," << rec.order[k].y[i];
    std::snprintf(buf, sizeof buf, ",%.17g", rec.order[k].value);
    out << buf;
    std::snprintf(buf, sizeof buf, ",%.17g\n", rec.rescaled[k].second);
    out << buf;
  }
}

void write_csv(const PPPReference& ref, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  out << "k,u,v,p,ell\n";
  char buf[128];
  for (int k = 0; k < ref.K; ++k) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,", k + 1, ref.u[k], ref.v[k], ref.p[k]);
    out << buf;
    if (k < ref.k_max_safe) out << ref.ell[k];
    out << "\n";
  }
}

}  // namespace corrloc
