#include "corrloc/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <random>

#include "corrloc/errors.hpp"
#include "corrloc/rng.hpp"
#include "corrloc/scales.hpp"
#include "fft.hpp"

namespace corrloc {

std::string to_string(SamplerKind k) { return k == SamplerKind::dense ? "dense" : "circulant"; }

Box box_QL(std::int64_t L, int d) {
  if (L < 1) throw DomainError("box side L must be positive");
  if (L > (1 << 26)) throw SizeError("box side L too large");
  return Box::centered(d, static_cast<double>(L));
}

GaussianFieldSampler::GaussianFieldSampler(const CovarianceModel& model, const Box& box, SamplerKind hint)
    : model_(model), box_(box), kind_(hint) {
  if (box.dim() != model.dim()) throw DomainError("sampler: box and model dimensions differ");
  if (hint == SamplerKind::dense) {
    init_dense();
    return;
  }
  const int n = detail::nice_fft_size(box.side() + 2 * model.effective_radius());
  std::vector<double> lambda;
  try {
    lambda = circulant_spectrum(model, n);
  } catch (const EmbeddingInvalid&) {
    if (box.size() > kDenseSiteLimit) throw;
    kind_ = SamplerKind::dense;
    init_dense();
    return;
  }
  torus_side_ = n;
  const double M = static_cast<double>(lambda.size());
  sqrt_eig_.resize(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) sqrt_eig_[i] = std::sqrt(std::max(lambda[i], 0.0) / M);
}

void GaussianFieldSampler::init_dense() {
  const std::size_t n = box_.size();
  if (n > kDenseSiteLimit) throw SizeError("dense sampler limited to 6000 sites");
  Eigen::MatrixXd C(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point xi = box_.point(i);
    for (std::size_t j = 0; j <= i; ++j) {
      const double c = model_(xi - box_.point(j));
      C(i, j) = c;
      C(j, i) = c;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  // singular but semidefinite covariances (tents) land here
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  if (ev.minCoeff() < -1e-10 * ev.maxCoeff())
    throw DomainError("covariance matrix is not positive semidefinite");
  factor_ = eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Grid GaussianFieldSampler::draw(std::uint64_t seed) const {
  Engine rng(seed);
  std::normal_distribution<double> gauss;
  Grid out(box_);
  if (kind_ == SamplerKind::dense) {
    Eigen::VectorXd z(box_.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = gauss(rng);
    Eigen::VectorXd x = factor_ * z;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = x[static_cast<Eigen::Index>(i)];
    return out;
  }
  std::vector<std::complex<double>> w(sqrt_eig_.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    w[i] = sqrt_eig_[i] * std::complex<double>(re, im);
  }
  const int d = box_.dim();
  detail::forward_dft(w, d, torus_side_);
  const int n = torus_side_;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Point p = box_.point(i);
    const Point lo = box_.lower();
    std::size_t idx = 0;
    for (int k = 0; k < d; ++k) idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(p[k] - lo[k]);
    out.values[i] = w[idx].real();
  }
  return out;
}

FieldSample sample_field(const GaussianFieldSampler& sampler, std::int64_t L, std::uint64_t seed) {
  if (!(sampler.box() == box_QL(L, sampler.model().dim())))
    throw DomainError("sample_field: sampler box is not Q_L");
  FieldSample s;
  s.grid = sampler.draw(seed);
  s.L = L;
  s.model = sampler.model();
  s.seed = seed;
  s.sampler = sampler.kind();
  return s;
}

FieldSample sample_field(const CovarianceModel& model, std::int64_t L, std::uint64_t seed, SamplerKind hint) {
  const GaussianFieldSampler sampler(model, box_QL(L, model.dim()), hint);
  return sample_field(sampler, L, seed);
}

FluctuationView fluctuation_view(const FieldSample& sample, const Point& x0) {
  const Box& box = sample.grid.box;
  if (!box.contains(x0)) throw DomainError("fluctuation_view: x0 outside Q_L");
  FluctuationView view;
  view.base = &sample;
  view.x0 = x0;
  view.zeta = Grid(box);
  const double peak = sample.grid.at(x0);
  for (std::size_t i = 0; i < box.size(); ++i)
    view.zeta.values[i] = sample.grid.values[i] - peak * sample.model(box.point(i) - x0);
  view.zeta.at(x0) = 0.0;
  return view;
}

double cov_zeta(const CovarianceModel& model, const Point& x0, const Point& x, const Point& y) {
  return model(x - y) - model(x - x0) * model(y - x0);
}

double compute_tau(const CovarianceModel& model, const Grid& bar_phi) {
  const Box& box = bar_phi.box;
  const Point origin{};
  double sum = 0.0;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Point x = box.point(i);
    if (x == origin) continue;
    const double wx = bar_phi.values[i] * bar_phi.values[i];
    if (wx == 0.0) continue;
    for (std::size_t j = 0; j < box.size(); ++j) {
      const Point y = box.point(j);
      if (y == origin) continue;
      const double wy = bar_phi.values[j] * bar_phi.values[j];
      sum += wx * wy * cov_zeta(model, origin, x, y);
    }
  }
  if (sum < -1e-12) throw DomainError("compute_tau: negative variance, covariance is inconsistent");
  return std::sqrt(std::max(sum, 0.0));
}

double phi_at(const FluctuationView& view, const Grid& bar_phi, const Point& y) {
  const FieldSample& s = *view.base;
  const Box window(s.dim(), bar_phi.box.side(), y);
  if (!s.grid.box.contains(window)) throw DomainError("phi_at: bar window leaves Q_L");
  const double peak = s.grid.at(y);
  const Point origin{};
  double acc = 0.0;
  for (std::size_t i = 0; i < bar_phi.size(); ++i) {
    const Point x = bar_phi.box.point(i);
    if (x == origin) continue;
    const double w = bar_phi.values[i] * bar_phi.values[i];
    acc += w * (s.grid.at(x + y) - peak * s.model(x));
  }
  return acc;
}

Grid xi_cap(const FluctuationView& view, const Grid& bar_phi, const Box& region) {
  Grid out(region);
  for (std::size_t i = 0; i < region.size(); ++i) {
    const Point y = region.point(i);
    out.values[i] = view.base->grid.at(y) + phi_at(view, bar_phi, y);
  }
  return out;
}

Grid xi_cap(const FluctuationView& view, const Grid& bar_phi) {
  const Box& box = view.base->grid.box;
  const int side = box.side() - (bar_phi.box.side() - 1);
  if (side < 1) throw DomainError("xi_cap: bar window larger than Q_L");
  return xi_cap(view, bar_phi, Box(box.dim(), side, box.center()));
}

FieldSample peak_conditioned_sample(const GaussianFieldSampler& sampler, std::int64_t L, const Point& x0,
                                    double value, std::uint64_t seed) {
  FieldSample s = sample_field(sampler, L, seed);
  if (!s.grid.box.contains(x0)) throw DomainError("peak_conditioned_sample: x0 outside Q_L");
  const double base = s.grid.at(x0);
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    const double v = s.model(s.grid.box.point(i) - x0);
    s.grid.values[i] = value * v + (s.grid.values[i] - base * v);
  }
  s.grid.at(x0) = value;
  s.conditioned_at = std::make_pair(x0, value);
  return s;
}

FieldSample peak_conditioned_sample(const CovarianceModel& model, std::int64_t L, const Point& x0, double value,
                                    std::uint64_t seed, SamplerKind hint) {
  const GaussianFieldSampler sampler(model, box_QL(L, model.dim()), hint);
  return peak_conditioned_sample(sampler, L, x0, value, seed);
}

EventReport event_check(const FieldSample& sample, const Point& x0, const ScaleSet& scales) {
  const int d = sample.dim();
  const Box& box = sample.grid.box;
  const Box wide = Box::centered(d, 2.0 * scales.R_L, x0);
  const Box meso = Box::centered(d, scales.R_L, x0);
  if (!box.contains(wide)) throw DomainError("event_check: Q_{2R_L, x0} leaves Q_L");

  const double a = scales.a_L;
  const double peak = sample.grid.at(x0);
  EventReport r;
  r.x0 = x0;
  r.margin1 = scales.theta - std::abs(peak - a);
  r.in_E1 = r.margin1 > 0.0;

  r.margin2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < wide.size(); ++i) {
    const Point x = wide.point(i);
    if (x == x0) continue;
    const double v = sample.model(x - x0);
    const double zeta = sample.grid.at(x) - peak * v;
    const double slack = a * (1.0 - v) / 10.0 - std::abs(zeta);
    if (slack < r.margin2) {
      r.margin2 = slack;
      r.worst2 = x;
    }
  }
  r.in_E2 = r.margin2 >= 0.0;

  const double base = a / scales.d_L;
  const double lift = std::sqrt(std::max(1.0, std::abs(peak - a) * a));
  r.margin3 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < meso.size(); ++i) {
    const Point x = meso.point(i);
    if (x == x0) continue;
    const double v = sample.model(x - x0);
    const double var = 1.0 - v * v;
    const double zeta = sample.grid.at(x) - peak * v;
    const double ratio = var > 0.0 ? std::abs(zeta) / std::sqrt(var) : 0.0;
    const double bound = std::pow(base, scales.kappa * norm(x - x0)) * lift;
    const double slack = bound - ratio;
    if (slack < r.margin3) {
      r.margin3 = slack;
      r.worst3 = x;
    }
  }
  r.in_E3 = r.margin3 >= 0.0;
  return r;
}

namespace {

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return out;
  }
  return v;
}

}  // namespace

void write_binary(const FieldSample& sample, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  for (double v : sample.grid.values) {
    const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  nlohmann::json side{{"L", sample.L},
                      {"d", sample.dim()},
                      {"side", sample.grid.box.side()},
                      {"model", sample.model.to_json()},
                      {"seed", sample.seed},
                      {"sampler", to_string(sample.sampler)}};
  if (sample.conditioned_at) {
    std::vector<int> p(sample.conditioned_at->first.begin(), sample.conditioned_at->first.begin() + sample.dim());
    side["conditioned_at"] = {{"point", p}, {"value", sample.conditioned_at->second}};
  }
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

Grid read_binary(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) throw Error("missing sidecar " + path + ".json");
  const nlohmann::json side = nlohmann::json::parse(js);
  Grid g(Box(side.at("d").get<int>(), side.at("side").get<int>()));
  std::ifstream in(path, std::ios::binary);
  for (double& v : g.values) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw Error("truncated grid file " + path);
    v = std::bit_cast<double>(to_le(bits));
  }
  return g;
}

void write_csv(const Grid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  const int d = grid.box.dim();
  for (int i = 0; i < d; ++i) out << "x" << (i + 1) << ",";
  out << "value\n";
  char buf[64];
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point p = grid.box.point(i);
    for (int k = 0; k < d; ++k) out << p[k] << ",";
    std::snprintf(buf, sizeof buf, "%.17g", grid.values[i]);
    out << buf << "\n";
  }
}

}  // namespace corrloc
