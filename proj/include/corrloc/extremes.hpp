#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "corrloc/lattice.hpp"
#include "corrloc/rng.hpp"

namespace corrloc {

/// Mesoscopic boxes: super-boxes of side R + floor(sqrt R) laid from the
/// lower corner of Q_L, partial ones dropped, each carrying a centred core of
/// side R.
struct MesoPartition {
  std::int64_t L = 0;
  int R_L = 0;
  int dim = 1;
  int super_side = 0;
  int per_axis = 0;
  Box domain;
  std::vector<Point> centers;

  std::size_t n_boxes() const { return centers.size(); }
  Box core(std::size_t j) const { return Box(dim, R_L, centers[j]); }
};

MesoPartition build_partition(std::int64_t L, int R_L, int d);

struct OrderEntry {
  Point y{};
  double value = 0.0;
};

struct ExtremeRecord {
  std::vector<OrderEntry> order;
  /// (y/L componentwise, a_L (xi(y) - a_L)) for each order entry.
  std::vector<std::pair<std::array<double, 3>, double>> rescaled;
};

/// Descending order of the grid values, ties to the lexicographically
/// smaller site. Only the first `top` entries are kept (all when top = 0).
ExtremeRecord order_statistics(const Grid& field, std::int64_t L, double a_L, std::size_t top = 0);

struct BoxMax {
  Point w{};
  double value = 0.0;
};

/// Per-core argmax, ties to the lexicographically smaller site.
std::vector<BoxMax> box_maxima(const Grid& field, const MesoPartition& partition);

/// Number of core sites with a_L (xi - a_L) > u, per core.
std::vector<int> exceedance_counts(const Grid& field, const MesoPartition& partition, double a_L, double u);

/// 1-based position of each centre in `order`. Throws DomainError when a
/// centre is missing.
std::vector<int> rank_permutation(const std::vector<Point>& centers, const std::vector<Point>& order);

struct PPPReference {
  double b = 0.0;
  int K = 0;
  std::vector<double> u;  // descending
  std::vector<double> v;
  std::vector<double> p;  // descending decorated values
  std::vector<int> ell;   // 1-based, for k <= k_max_safe
  int k_max_safe = 0;
};

/// Truncated decorated PPP with K points.
PPPReference sample_ppp_reference(double b, int K, std::uint64_t seed);

/// Rank of the undecorated point carrying the top decorated value, sampled
/// exactly from the untruncated process.
std::int64_t sample_top_rank(double b, Engine& rng);

/// E[1/(1 + A)], the exact P(ell(1) = 1), by quadrature over the decoration.
double top_rank_one_probability(double b);

struct CrossBoxCovariance {
  double value = 0.0;   // max over distinct pairs of the empirical covariance
  double std_error = 0.0;  // its standard error under independence
  std::size_t i = 0;
  std::size_t j = 0;
};

/// `maxima[s][j]` is the maximum of box j in sample s; needs 200 samples.
CrossBoxCovariance cross_box_covariance(const std::vector<std::vector<double>>& maxima);

void write_csv(const ExtremeRecord& rec, int dim, const std::string& path);
void write_csv(const PPPReference& ref, const std::string& path);

}  // namespace corrloc
