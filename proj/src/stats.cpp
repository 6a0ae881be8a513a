#include "corrloc/stats.hpp"

#include <algorithm>
#include <cmath>

#include "corrloc/errors.hpp"

namespace corrloc {

void to_json(nlohmann::json& j, const TestReport& r) {
  j = nlohmann::json{{"statistic", r.statistic}, {"n", r.n},       {"threshold", r.threshold},
                     {"pass", r.pass},           {"description", r.description}};
  if (!r.extras.empty()) j["extras"] = r.extras;
}

void from_json(const nlohmann::json& j, TestReport& r) {
  r.statistic = j.at("statistic").is_null() ? NAN : j.at("statistic").get<double>();
  r.n = j.at("n").get<std::size_t>();
  r.threshold = j.at("threshold").get<double>();
  r.pass = j.at("pass").get<bool>();
  r.description = j.at("description").get<std::string>();
  r.extras.clear();
  if (j.contains("extras"))
    for (const auto& [k, v] : j.at("extras").items()) r.extras[k] = v.is_null() ? NAN : v.get<double>();
}

double ks_statistic(std::span<const double> sorted, const std::function<double(double)>& cdf) {
  const std::size_t n = sorted.size();
  if (n == 0) throw DomainError("ks_statistic: empty sample");
  if (!std::is_sorted(sorted.begin(), sorted.end())) throw DomainError("ks_statistic: input must be sorted");
  double d = 0.0;
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, f - static_cast<double>(i) / nn, static_cast<double>(i + 1) / nn - f});
  }
  return d;
}

double gumbel_cdf(double u) { return std::exp(-std::exp(-u)); }

TestReport poisson_dispersion(std::span<const int> counts, double lo, double hi) {
  const std::size_t n = counts.size();
  if (n < 50) throw DomainError("poisson_dispersion: needs at least 50 counts");
  double mean = 0.0;
  for (int c : counts) {
    if (c < 0) throw DomainError("poisson_dispersion: negative count");
    mean += c;
  }
  mean /= static_cast<double>(n);
  if (mean == 0.0) throw DomainError("poisson_dispersion: all counts are zero");
  double var = 0.0;
  for (int c : counts) var += (c - mean) * (c - mean);
  var /= static_cast<double>(n - 1);
  const double D = var / mean;
  TestReport r;
  r.n = n;
  const double mid = 0.5 * (lo + hi);
  r.statistic = mean > 0.2 ? std::abs(D - mid) : INFINITY;
  r.threshold = 0.5 * (hi - lo);
  r.pass = r.statistic <= r.threshold;
  r.description = "index of dispersion of counts";
  r.extras = {{"dispersion", D}, {"mean", mean}, {"lo", lo}, {"hi", hi}};
  return r;
}

std::pair<double, double> tail_frequency(std::span<const double> values, double level, double scale) {
  const std::size_t n = values.size();
  if (n < 100) throw DomainError("tail_frequency: needs at least 100 values");
  std::size_t hits = 0;
  for (double v : values)
    if (v > level) ++hits;
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {scale * p, scale * std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(i);
  return values[i] + frac * (values[i + 1] - values[i]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

}  // namespace corrloc
