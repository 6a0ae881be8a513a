#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "corrloc/covariance.hpp"
#include "corrloc/lattice.hpp"

namespace corrloc {

struct ScaleSet;

enum class SamplerKind { dense, circulant };

std::string to_string(SamplerKind k);

inline constexpr std::size_t kDenseSiteLimit = 6000;

/// Exact centred Gaussian sampler with covariance v on a fixed box. The
/// factorisation is computed once; draw() is const and thread-safe.
class GaussianFieldSampler {
 public:
  /// `hint` = circulant falls back to dense when the embedding is invalid
  /// and the box is small enough; dense never upgrades to circulant.
  GaussianFieldSampler(const CovarianceModel& model, const Box& box, SamplerKind hint);

  SamplerKind kind() const { return kind_; }
  const Box& box() const { return box_; }
  const CovarianceModel& model() const { return model_; }
  int torus_side() const { return torus_side_; }

  Grid draw(std::uint64_t seed) const;

 private:
  void init_dense();

  CovarianceModel model_;
  Box box_;
  SamplerKind kind_;
  Eigen::MatrixXd factor_;
  std::vector<double> sqrt_eig_;  // sqrt(lambda / M) on the torus
  int torus_side_ = 0;
};

struct FieldSample {
  Grid grid;
  std::int64_t L = 0;
  CovarianceModel model;
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::dense;
  std::optional<std::pair<Point, double>> conditioned_at;

  int dim() const { return grid.box.dim(); }
  double operator[](const Point& x) const { return grid.at(x); }
};

/// The box Q_L centred at the origin.
Box box_QL(std::int64_t L, int d);

FieldSample sample_field(const CovarianceModel& model, std::int64_t L, std::uint64_t seed,
                         SamplerKind hint = SamplerKind::circulant);

/// Draw from `sampler` (whose box must be Q_L) and wrap it.
FieldSample sample_field(const GaussianFieldSampler& sampler, std::int64_t L, std::uint64_t seed);

/// Fluctuation field around x0 together with its base sample.
struct FluctuationView {
  const FieldSample* base = nullptr;
  Point x0{};
  Grid zeta;
};

FluctuationView fluctuation_view(const FieldSample& sample, const Point& x0);

/// v(x - y) - v(x - x0) v(y - x0).
double cov_zeta(const CovarianceModel& model, const Point& x0, const Point& x, const Point& y);

/// Standard deviation of the bar-weighted fluctuation, by the full double sum.
double compute_tau(const CovarianceModel& model, const Grid& bar_phi);

/// sum_{x != 0} bar_phi(x)^2 zeta_{y}(x + y), zeta formed from the base sample.
double phi_at(const FluctuationView& view, const Grid& bar_phi, const Point& y);

/// Xi = xi + Phi on the sub-box of centres y whose bar window fits in Q_L.
Grid xi_cap(const FluctuationView& view, const Grid& bar_phi);

/// Same, restricted to the centres of `region` (which must be admissible).
Grid xi_cap(const FluctuationView& view, const Grid& bar_phi, const Box& region);

/// Exact draw of the field given xi(x0) = value.
FieldSample peak_conditioned_sample(const GaussianFieldSampler& sampler, std::int64_t L,
                                    const Point& x0, double value, std::uint64_t seed);
FieldSample peak_conditioned_sample(const CovarianceModel& model, std::int64_t L, const Point& x0,
                                    double value, std::uint64_t seed,
                                    SamplerKind hint = SamplerKind::circulant);

struct EventReport {
  Point x0{};
  bool in_E1 = false;
  bool in_E2 = false;
  bool in_E3 = false;
  double margin1 = 0.0;  // theta - |xi(x0) - a_L|; member iff > 0
  double margin2 = 0.0;  // min S/10 - |zeta|; member iff >= 0
  double margin3 = 0.0;  // min bound - ratio; member iff >= 0
  Point worst2{};
  Point worst3{};

  bool in_E() const { return in_E1 && in_E2 && in_E3; }
};

EventReport event_check(const FieldSample& sample, const Point& x0, const ScaleSet& scales);

/// 8-byte little-endian doubles in row-major order, plus `<path>.json`.
void write_binary(const FieldSample& sample, const std::string& path);
/// Read back a grid written by write_binary.
Grid read_binary(const std::string& path);
/// Columns x1..xd, value.
void write_csv(const Grid& grid, const std::string& path);

}  // namespace corrloc
