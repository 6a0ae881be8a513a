#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace corrloc {

struct TestReport {
  double statistic = 0.0;
  std::size_t n = 0;
  double threshold = 0.0;
  bool pass = false;
  std::string description;
  std::map<std::string, double> extras;
};

void to_json(nlohmann::json& j, const TestReport& r);
void from_json(const nlohmann::json& j, TestReport& r);

/// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of
/// `sorted` and `cdf`. Throws DomainError when the input is not sorted.
double ks_statistic(std::span<const double> sorted, const std::function<double(double)>& cdf);

/// exp(-e^{-u}).
double gumbel_cdf(double u);

/// Index of dispersion (variance / mean). Passes when it lies in [lo, hi]
/// and the mean exceeds 0.2. The statistic is the distance of D from the
/// band centre, so the default band reports |D - 1| against 0.2.
TestReport poisson_dispersion(std::span<const int> counts, double lo = 0.8, double hi = 1.2);

/// scale * fraction of values above level, with its binomial standard error.
/// Needs at least 100 values.
std::pair<double, double> tail_frequency(std::span<const double> values, double level, double scale);

double median(std::vector<double> values);
/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace corrloc
