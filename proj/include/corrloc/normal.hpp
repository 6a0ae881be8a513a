#pragma once

namespace corrloc::normal {

double pdf(double x);
double cdf(double x);

/// P(N(0,1) > x), accurate to ~1e-14 relative far into the upper tail.
double sf(double x);

/// log P(N(0,1) > x); finite for every finite x.
double log_sf(double x);

/// Mills ratio P(N(0,1) > x) / pdf(x).
double mills_ratio(double x);

/// Upper-tail quantile from the log of the tail probability: returns x with
/// log_sf(x) = log_p, for log_p < log(1/2).
double isf_log(double log_p);

}  // namespace corrloc::normal
