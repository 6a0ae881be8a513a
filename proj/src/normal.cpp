#include "corrloc/normal.hpp"

#include <cmath>
#include <numbers>

#include "corrloc/errors.hpp"

namespace corrloc::normal {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))
constexpr double kSwitch = 3.0;

// Continued fraction R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))), modified Lentz.
double mills_cf(double x) {
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 5000; ++k) {
    d = x + k * d;
    if (std::abs(d) < tiny) d = tiny;
    c = x + k / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / f;
}

}  // namespace

double pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double mills_ratio(double x) {
  if (x >= kSwitch) return mills_cf(x);
  return sf(x) / pdf(x);
}

double sf(double x) {
  if (x < kSwitch) return 0.5 * std::erfc(x / std::numbers::sqrt2);
  return std::exp(log_sf(x));
}

double log_sf(double x) {
  if (x < kSwitch) return std::log(0.5 * std::erfc(x / std::numbers::sqrt2));
  return -0.5 * x * x - kLogSqrt2Pi + std::log(mills_cf(x));
}

double isf_log(double log_p) {
  if (!(log_p < std::log(0.5))) throw DomainError("isf_log expects a tail probability below 1/2");
  // Q(x) <= exp(-x^2/2)/2 gives an upper bracket; Q(0) = 1/2 a lower one.
  double lo = 0.0;
  double hi = std::sqrt(-2.0 * log_p);
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = log_sf(x) - log_p;
    if (f > 0) lo = x; else hi = x;
    // d/dx log Q(x) = -1 / R(x)
    double next = x + f * mills_ratio(x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - x);
    x = next;
    if (step <= 1e-15 * x || hi - lo <= 1e-15 * hi) break;
  }
  return x;
}

}  // namespace corrloc::normal
