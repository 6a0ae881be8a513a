#include "corrloc/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "corrloc/errors.hpp"
#include "corrloc/scales.hpp"
#include "fft.hpp"

namespace corrloc {

namespace {
constexpr double kNegligible = 1e-14;
}

std::string to_string(Family f) {
  switch (f) {
    case Family::iid: return "iid";
    case Family::cube_indicator: return "cube_indicator";
    case Family::gaussian_kernel: return "gaussian_kernel";
    case Family::exponential: return "exponential";
  }
  return "?";
}

Family family_from_string(const std::string& name) {
  if (name == "iid") return Family::iid;
  if (name == "cube_indicator") return Family::cube_indicator;
  if (name == "gaussian_kernel") return Family::gaussian_kernel;
  if (name == "exponential") return Family::exponential;
  throw ConfigError("unknown covariance family '" + name + "'");
}

CovarianceModel::CovarianceModel(Family f, int dim, double param)
    : family_(f), dim_(dim), param_(param) {
  if (dim < 1 || dim > kMaxDim) throw DomainError("covariance: dimension must be in 1..3");
  if (f != Family::iid && !(param > 0.0 && std::isfinite(param)))
    throw DomainError("covariance: family parameter must be positive");
  switch (f) {
    case Family::iid: radius_ = 0; break;
    case Family::cube_indicator: radius_ = static_cast<int>(std::ceil(param)) - 1; break;
    case Family::gaussian_kernel:
      radius_ = static_cast<int>(std::ceil(param * std::sqrt(-2.0 * std::log(kNegligible))));
      break;
    case Family::exponential:
      radius_ = static_cast<int>(std::ceil(-std::log(kNegligible) / param));
      break;
  }
  radius_ = std::max(radius_, 0);
  d_L_ = derive_dL(*this);
}

CovarianceModel::CovarianceModel() : CovarianceModel(Family::iid, 1, 0.0) {}

CovarianceModel CovarianceModel::iid(int dim) { return {Family::iid, dim, 0.0}; }
CovarianceModel CovarianceModel::cube_indicator(int dim, double m) { return {Family::cube_indicator, dim, m}; }
CovarianceModel CovarianceModel::gaussian_kernel(int dim, double ell) { return {Family::gaussian_kernel, dim, ell}; }
CovarianceModel CovarianceModel::exponential(int dim, double alpha) { return {Family::exponential, dim, alpha}; }

CovarianceModel CovarianceModel::from_json(const nlohmann::json& spec, int dim) {
  if (!spec.is_object() || !spec.contains("family")) throw ConfigError("model spec needs a 'family' field");
  const Family f = family_from_string(spec.at("family").get<std::string>());
  auto need = [&](const char* key) {
    if (!spec.contains(key)) throw ConfigError(std::string("model spec for ") + to_string(f) + " needs '" + key + "'");
    return spec.at(key).get<double>();
  };
  switch (f) {
    case Family::iid: return iid(dim);
    case Family::cube_indicator: return cube_indicator(dim, need("m"));
    case Family::gaussian_kernel: return gaussian_kernel(dim, need("ell"));
    case Family::exponential: return exponential(dim, need("alpha"));
  }
  throw ConfigError("unreachable family");
}

nlohmann::json CovarianceModel::to_json() const {
  nlohmann::json j{{"family", to_string(family_)}};
  switch (family_) {
    case Family::iid: break;
    case Family::cube_indicator: j["m"] = param_; break;
    case Family::gaussian_kernel: j["ell"] = param_; break;
    case Family::exponential: j["alpha"] = param_; break;
  }
  return j;
}

double CovarianceModel::operator()(const Point& x) const {
  switch (family_) {
    case Family::iid:
      return (x[0] == 0 && x[1] == 0 && x[2] == 0) ? 1.0 : 0.0;
    case Family::cube_indicator: {
      double v = 1.0;
      for (int i = 0; i < dim_; ++i) v *= std::max(0.0, 1.0 - std::abs(x[i]) / param_);
      return v;
    }
    case Family::gaussian_kernel: {
      double r2 = 0.0;
      for (int i = 0; i < dim_; ++i) r2 += static_cast<double>(x[i]) * x[i];
      return std::exp(-r2 / (2.0 * param_ * param_));
    }
    case Family::exponential:
      return std::exp(-param_ * norm(x));
  }
  return 0.0;
}

std::string CovarianceModel::describe() const {
  std::ostringstream os;
  os << to_string(family_);
  switch (family_) {
    case Family::iid: break;
    case Family::cube_indicator: os << "(m=" << param_ << ")"; break;
    case Family::gaussian_kernel: os << "(ell=" << param_ << ")"; break;
    case Family::exponential: os << "(alpha=" << param_ << ")"; break;
  }
  os << ", d=" << dim_;
  return os.str();
}

double eval_cov(const CovarianceModel& model, const Point& x) { return model(x); }

double derive_dL(const CovarianceModel& model) {
  double sup = 0.0;
  for (const Point& e : unit_vectors(model.dim())) sup = std::max(sup, model(e));
  if (!(sup < 1.0)) throw DomainError("derive_dL: degenerate covariance, v = 1 at a neighbour");
  // the tent gives 1 - 1/m at distance one; return m itself to avoid rounding
  if (model.family() == Family::cube_indicator && model.param() >= 1.0) return model.param();
  return 1.0 / (1.0 - sup);
}

double shape(const CovarianceModel& model, double a_L, const Point& x) {
  return a_L * (1.0 - model(x));
}

HypothesisReport check_hypotheses(const CovarianceModel& model, std::int64_t L, const ScaleSet& scales) {
  HypothesisReport r;
  const int d = model.dim();
  const double dL = model.d_L();
  // v is below 1e-14 beyond the effective radius, so the scan of Q_{3L}
  // stops there.
  const int half3L = static_cast<int>(std::min<std::int64_t>(3 * L / 2, std::numeric_limits<int>::max() / 4));
  const int reach = std::min(half3L, model.effective_radius());
  const double tail_radius = std::exp(std::sqrt(std::log(static_cast<double>(L))));

  double inf_gap = reach < half3L ? 1.0 : std::numeric_limits<double>::infinity();
  double c_up = -std::numeric_limits<double>::infinity();
  const Box scan(d, 2 * reach + 1);
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const Point x = scan.point(i);
    if (x == Point{}) continue;
    const double v = model(x);
    const double rad = norm(x);
    if (rad >= tail_radius) r.tail_stat = std::max(r.tail_stat, v * std::log(rad));
    inf_gap = std::min(inf_gap, 1.0 - v);
    if (v > 0.0 || norm1(x) == 1) c_up = std::max(c_up, std::log(dL * (1.0 - v)) / rad);
  }
  if (scan.size() == 1) {
    inf_gap = 1.0;
    c_up = std::log(dL);
  }
  r.c_lower = dL * inf_gap;
  r.c_upper = c_up;
  r.shortrange_ok = r.c_lower > 0.0 && std::isfinite(r.c_upper);
  r.dL_over_aL = dL / scales.a_L;
  r.assumption14_ok = r.dL_over_aL < 1.0;
  r.tau_ratio = scales.tau_L / ((1.0 / scales.a_L) * std::sqrt(scales.a_L / dL));
  r.assumption15_ok = r.tau_ratio < 1.0;
  return r;
}

void to_json(nlohmann::json& j, const HypothesisReport& r) {
  j = nlohmann::json{{"tail_stat", r.tail_stat},       {"shortrange_ok", r.shortrange_ok},
                     {"c_lower", r.c_lower},           {"c_upper", r.c_upper},
                     {"dL_over_aL", r.dL_over_aL},     {"assumption14_ok", r.assumption14_ok},
                     {"tau_ratio", r.tau_ratio},       {"assumption15_ok", r.assumption15_ok}};
}

std::vector<double> circulant_spectrum(const CovarianceModel& model, int torus_side) {
  if (torus_side < 1) throw DomainError("circulant_spectrum: torus side must be positive");
  const int d = model.dim();
  const int n = torus_side;
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(n);
  if (total > (std::size_t{1} << 27)) throw SizeError("circulant_spectrum: torus too large");

  std::vector<std::complex<double>> c(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Point k{};
    std::size_t rem = idx;
    for (int i = d - 1; i >= 0; --i) {
      const int ki = static_cast<int>(rem % n);
      rem /= n;
      k[i] = std::min(ki, n - ki);
    }
    c[idx] = model(k);
  }
  detail::forward_dft(c, d, n);

  std::vector<double> out(total);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < total; ++i) {
    out[i] = c[i].real();
    lo = std::min(lo, out[i]);
    hi = std::max(hi, out[i]);
  }
  if (lo < -1e-8 * hi)
    throw EmbeddingInvalid("circulant embedding has a negative spectral entry", lo, hi);
  return out;
}

}  // namespace corrloc
