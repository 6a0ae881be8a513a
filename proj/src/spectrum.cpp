#include "corrloc/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>

#include "corrloc/errors.hpp"
#include "corrloc/rng.hpp"

namespace corrloc {

LatticeOperator::LatticeOperator(const Grid& V) : box_(V.box) {
  const int d = box_.dim();
  const std::size_t n = box_.size();
  if (n > static_cast<std::size_t>(INT32_MAX)) throw SizeError("operator box too large");
  stride_ = 2 * d;
  diag_.resize(n);
  nbr_.assign(n * stride_, -1);
  const auto units = unit_vectors(d);
  double vmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diag_[i] = V.values[i] - 2.0 * d;
    vmax = std::max(vmax, std::abs(diag_[i]));
    const Point x = box_.point(i);
    for (int u = 0; u < stride_; ++u) {
      const Point y = x + units[u];
      if (box_.contains(y)) nbr_[i * stride_ + u] = static_cast<std::int32_t>(box_.index(y));
    }
  }
  norm_bound_ = vmax + 2.0 * d;
}

void LatticeOperator::apply(const double* psi, double* out) const {
  const std::size_t n = diag_.size();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = diag_[i] * psi[i];
    const std::int32_t* nb = &nbr_[i * stride_];
    for (int u = 0; u < stride_; ++u)
      if (nb[u] >= 0) acc += psi[nb[u]];
    out[i] = acc;
  }
}

Grid apply_hamiltonian(const Grid& V, const Grid& psi) {
  if (!(V.box == psi.box)) throw DomainError("apply_hamiltonian: shape mismatch");
  const LatticeOperator H(V);
  Grid out(V.box);
  H.apply(psi.values.data(), out.values.data());
  return out;
}

Point localisation_center(const Grid& phi) {
  double best = 0.0;
  for (double v : phi.values) best = std::max(best, std::abs(v));
  for (std::size_t i = 0; i < phi.size(); ++i)
    if (std::abs(phi.values[i]) >= best * (1.0 - 1e-10)) return phi.box.point(i);
  return phi.box.center();
}

namespace {

double residual_norm(const LatticeOperator& H, const Grid& phi, double lambda) {
  std::vector<double> out(phi.size());
  H.apply(phi.values.data(), out.data());
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = out[i] - lambda * phi.values[i];
    s += r * r;
  }
  return std::sqrt(s);
}

// Normalise, fix the sign at the centre and fill in the derived fields.
void finalize(SpectralResult& r, const LatticeOperator& H) {
  r.centers.clear();
  r.residuals.clear();
  for (std::size_t i = 0; i < r.eigenfunctions.size(); ++i) {
    Grid& phi = r.eigenfunctions[i];
    double nrm = 0.0;
    for (double v : phi.values) nrm += v * v;
    nrm = std::sqrt(nrm);
    const Point c = localisation_center(phi);
    const double sgn = phi.at(c) < 0 ? -1.0 : 1.0;
    for (double& v : phi.values) v *= sgn / nrm;
    r.centers.push_back(c);
    r.residuals.push_back(residual_norm(H, phi, r.eigenvalues[i]));
  }
  if (r.eigenvalues.size() >= 2) r.gap = r.eigenvalues[0] - r.eigenvalues[1];
  r.tied_blocks.clear();
  const int k = static_cast<int>(r.eigenvalues.size());
  for (int i = 0; i < k;) {
    int j = i + 1;
    while (j < k && std::abs(r.eigenvalues[j - 1] - r.eigenvalues[j]) <= 1e-12) ++j;
    if (j - i > 1) r.tied_blocks.emplace_back(i, j);
    i = j;
  }
}

}  // namespace

namespace {

struct LanczosPairs {
  std::vector<double> values;  // descending
  std::vector<Eigen::VectorXd> vectors;
  int iterations = 0;
};

// Top-k Ritz pairs of H restricted to the orthogonal complement of `locked`.
LanczosPairs lanczos_run(const LatticeOperator& H, int k, const LanczosOptions& opts,
                         const std::vector<Eigen::VectorXd>& locked, Engine& rng) {
  const int n = static_cast<int>(H.size());
  const int room = n - static_cast<int>(locked.size());
  const int max_iter = opts.max_iter > 0 ? std::min(opts.max_iter, room) : room;
  std::normal_distribution<double> gauss;
  std::vector<Eigen::VectorXd> Q;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(std::min(room, 64), std::min(room, 64));

  auto deflate = [&](Eigen::VectorXd& w) {
    for (const auto& u : locked) w -= u.dot(w) * u;
  };
  auto orthogonalize = [&](Eigen::VectorXd& w, int upto, int col) {
    for (int pass = 0; pass < 2; ++pass) {
      deflate(w);
      for (int i = 0; i < upto; ++i) {
        const double h = Q[i].dot(w);
        if (col >= 0) G(i, col) += h;
        w -= h * Q[i];
      }
    }
  };
  auto fresh_vector = [&]() {
    for (int attempt = 0; attempt < 20; ++attempt) {
      Eigen::VectorXd z(n);
      for (int i = 0; i < n; ++i) z[i] = gauss(rng);
      orthogonalize(z, static_cast<int>(Q.size()), -1);
      const double nz = z.norm();
      if (nz > 1e-8) return Eigen::VectorXd(z / nz);
    }
    throw ConvergenceError("top_k_eigs: could not extend the Krylov basis");
  };

  Q.push_back(fresh_vector());
  Eigen::VectorXd w(n);
  Eigen::VectorXd hw(n);
  const double breakdown = 1e-10 * std::max(1.0, H.norm_bound());
  int next_check = std::min(max_iter, 2 * k + 10);
  std::vector<double> last_residuals;

  for (int j = 0;; ++j) {
    if (j >= G.rows()) {
      const Eigen::Index grow = std::min<Eigen::Index>(room, 2 * G.rows());
      G.conservativeResize(grow, grow);
      G.rightCols(grow - j).setZero();
      G.bottomRows(grow - j).setZero();
    }
    H.apply(Q[j].data(), w.data());
    orthogonalize(w, j + 1, j);
    const double beta = w.norm();
    const int m = j + 1;
    const bool exhausted = m == max_iter;

    if (m >= k && (m >= next_check || exhausted)) {
      Eigen::MatrixXd S = G.topLeftCorner(m, m).selfadjointView<Eigen::Upper>();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
      const Eigen::VectorXd& theta = es.eigenvalues();
      const Eigen::MatrixXd& Y = es.eigenvectors();
      bool estimates_ok = true;
      for (int t = 0; t < k; ++t)
        if (beta * std::abs(Y(m - 1, m - 1 - t)) > 0.5 * opts.tol) estimates_ok = false;
      if (estimates_ok || exhausted) {
        LanczosPairs out;
        out.iterations = m;
        bool ok = true;
        last_residuals.clear();
        for (int t = 0; t < k; ++t) {
          const int col = m - 1 - t;
          Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
          for (int i = 0; i < m; ++i) y += Y(i, col) * Q[i];
          y.normalize();
          H.apply(y.data(), hw.data());
          const double res = (hw - theta[col] * y).norm();
          last_residuals.push_back(res);
          ok = ok && res <= opts.tol;
          out.values.push_back(theta[col]);
          out.vectors.push_back(std::move(y));
        }
        if (ok) return out;
        if (exhausted) throw ConvergenceError("top_k_eigs: iteration limit reached", last_residuals);
      }
      next_check = std::min(max_iter, m + std::max(5, m / 10));
    }
    if (exhausted) throw ConvergenceError("top_k_eigs: iteration limit reached", last_residuals);
    if (beta < breakdown)
      Q.push_back(fresh_vector());
    else
      Q.push_back(w / beta);
  }
}

}  // namespace

SpectralResult top_k_eigs(const Grid& V, int k, const LanczosOptions& opts) {
  if (k < 1 || k > kMaxTopK) throw DomainError("top_k_eigs: k must be in 1..32");
  if (!(opts.tol >= 1e-13)) throw DomainError("top_k_eigs: tolerance below 1e-13");
  const LatticeOperator H(V);
  const int n = static_cast<int>(H.size());
  if (k > n) throw DomainError("top_k_eigs: k exceeds the number of sites");

  Engine rng(opts.start_seed);
  LanczosPairs found = lanczos_run(H, k, opts, {}, rng);
  int iterations = found.iterations;

  // A single Krylov sequence sees one direction per eigenspace, so repeated
  // eigenvalues are missed. Probe the complement of the converged vectors
  // until its top eigenvalue falls below the current k-th value.
  std::vector<Eigen::VectorXd> locked = found.vectors;
  while (static_cast<int>(locked.size()) < n) {
    const LanczosPairs probe = lanczos_run(H, 1, opts, locked, rng);
    iterations += probe.iterations;
    if (!(probe.values[0] > found.values.back() + opts.tol)) break;
    locked.push_back(probe.vectors[0]);
    const auto pos = std::upper_bound(found.values.begin(), found.values.end(), probe.values[0], std::greater<>());
    const auto at = pos - found.values.begin();
    found.values.insert(pos, probe.values[0]);
    found.vectors.insert(found.vectors.begin() + at, probe.vectors[0]);
    found.values.pop_back();
    found.vectors.pop_back();
  }

  SpectralResult r;
  r.box = V.box;
  r.iterations = iterations;
  r.eigenvalues = found.values;
  for (const auto& y : found.vectors) r.eigenfunctions.emplace_back(V.box, std::vector<double>(y.data(), y.data() + n));
  finalize(r, H);
  return r;
}

SpectralResult dense_eigs(const Grid& V, int k) {
  const std::size_t n = V.size();
  if (n > kDenseEigLimit) throw SizeError("dense_eigs: limited to 4000 sites");
  const LatticeOperator H(V);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    H.apply(e.data(), col.data());
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) M(i, j) = col[i];
  }
  if (!(M == M.transpose())) throw Error("dense_eigs: assembled matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success) throw ConvergenceError("dense_eigs: eigensolver failed");
  const int kk = (k <= 0 || k > static_cast<int>(n)) ? static_cast<int>(n) : k;
  SpectralResult r;
  r.box = V.box;
  for (int t = 0; t < kk; ++t) {
    const Eigen::Index c = static_cast<Eigen::Index>(n) - 1 - t;
    r.eigenvalues.push_back(es.eigenvalues()[c]);
    const Eigen::VectorXd v = es.eigenvectors().col(c);
    r.eigenfunctions.emplace_back(V.box, std::vector<double>(v.data(), v.data() + n));
  }
  finalize(r, H);
  return r;
}

BarSolution solve_bar_problem(const CovarianceModel& model, double a_L, int r_L) {
  if (r_L < 3 || r_L % 2 == 0) throw DomainError("solve_bar_problem: r_L must be odd and at least 3");
  if (!(a_L >= 0.0) || !std::isfinite(a_L)) throw DomainError("solve_bar_problem: a_L must be finite and non-negative");
  const Box box(model.dim(), r_L);
  BarSolution b;
  b.r_L = r_L;
  b.shape_used = Grid(box);
  Grid V(box);
  for (std::size_t i = 0; i < box.size(); ++i) {
    const double s = shape(model, a_L, box.point(i));
    b.shape_used.values[i] = s;
    V.values[i] = -s;
  }
  const SpectralResult r = dense_eigs(V, 1);
  b.bar_lambda = r.eigenvalues[0];
  b.bar_phi = r.eigenfunctions[0];
  if (b.bar_phi.at(Point{}) < 0)
    for (double& v : b.bar_phi.values) v = -v;
  b.residual = r.residuals[0];
  if (!(b.bar_phi.at(Point{}) > 0.0)) throw ConvergenceError("solve_bar_problem: profile vanishes at the origin");
  b.expansion_value = a_L > 0.0 && model.d_L() > 0.0 ? bar_lambda_expansion(model, a_L, model.dim())
                                                     : std::numeric_limits<double>::quiet_NaN();
  return b;
}

double bar_lambda_expansion(const CovarianceModel& model, double a_L, int d) {
  double value = -2.0 * d;
  for (const Point& e : unit_vectors(d)) {
    const double s = shape(model, a_L, e);
    if (!(s > 0.0)) throw DomainError("bar_lambda_expansion: shape vanishes at a neighbour");
    value += 1.0 / s;
  }
  return value;
}

double quadratic_form(const Grid& V, const Grid& psi) {
  const Grid h = apply_hamiltonian(V, psi);
  double s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) s += psi.values[i] * h.values[i];
  return s;
}

Grid complete_profile(const Grid& psi_off, const Point& anchor) {
  if (!psi_off.box.contains(anchor)) throw DomainError("anchor outside the box");
  const std::size_t ia = psi_off.box.index(anchor);
  double rest = 0.0;
  for (std::size_t i = 0; i < psi_off.size(); ++i)
    if (i != ia) rest += psi_off.values[i] * psi_off.values[i];
  const double rad = 1.0 - rest;
  if (!(rad > 0.0)) throw DomainError("normalisation leaves no mass at the anchor");
  Grid psi = psi_off;
  psi.values[ia] = std::sqrt(rad);
  return psi;
}

double constrained_form(const Grid& V, const Grid& psi_off, const Point& anchor) {
  return quadratic_form(V, complete_profile(psi_off, anchor));
}

Grid form_gradient(const Grid& V, const Grid& psi_off, const Point& anchor) {
  if (!(V.box == psi_off.box)) throw DomainError("form_gradient: shape mismatch");
  const Grid psi = complete_profile(psi_off, anchor);
  const Box& box = psi.box;
  const auto units = unit_vectors(box.dim());
  const double p0 = psi.at(anchor);
  const double v0 = V.at(anchor);
  double around_anchor = 0.0;
  for (const Point& u : units) around_anchor += psi.value_or_zero(anchor + u);

  Grid g(box);
  for (std::size_t i = 0; i < box.size(); ++i) {
    const Point x = box.point(i);
    if (x == anchor) continue;
    const double px = psi.values[i];
    const double dp0 = -px / p0;
    double nb = 0.0;
    bool next_to_anchor = false;
    for (const Point& u : units) {
      const Point y = x + u;
      if (y == anchor) {
        next_to_anchor = true;
        continue;
      }
      nb += psi.value_or_zero(y);
    }
    g.values[i] = (next_to_anchor ? 2.0 * p0 : 0.0) + 2.0 * dp0 * around_anchor + 2.0 * nb +
                  2.0 * px * V.values[i] - 2.0 * px * v0;
  }
  return g;
}

DecayReport decay_check(const Grid& phi, const Point& center, double rate, double c) {
  DecayReport r;
  r.c = c;
  r.c_fit = std::numeric_limits<double>::infinity();
  const double base = 1.0 + c * rate;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const Point x = phi.box.point(i);
    if (x == center) continue;
    const double dist = norm(x - center);
    const double p2 = phi.values[i] * phi.values[i];
    const double ratio = p2 * std::pow(base, 2.0 * dist);
    if (ratio > r.max_ratio) {
      r.max_ratio = ratio;
      r.worst = x;
    }
    if (p2 > 0.0) r.c_fit = std::min(r.c_fit, (std::pow(p2, -1.0 / (2.0 * dist)) - 1.0) / rate);
  }
  r.holds = r.max_ratio <= 1.0;
  return r;
}

ApproximationError approximation_error(double xi_cap_x0, const BarSolution& bar, const SpectralResult& result,
                                       const Point& x0, double a_L, double d_L) {
  if (result.eigenvalues.empty()) throw DomainError("approximation_error: empty spectral result");
  const Box window(result.box.dim(), bar.bar_phi.box.side(), x0);
  if (!result.box.contains(window)) throw DomainError("approximation_error: bar window leaves the eigenproblem box");
  ApproximationError e;
  e.xi_cap_x0 = xi_cap_x0;
  e.eig_err = a_L * std::abs(result.eigenvalues[0] - (xi_cap_x0 + bar.bar_lambda));
  const Grid& phi = result.eigenfunctions[0];
  double s = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const Point p = phi.box.point(i);
    const double diff = phi.values[i] - bar.bar_phi.value_or_zero(p - x0);
    s += diff * diff;
  }
  e.fun_err = (a_L / d_L) * std::sqrt(s);
  return e;
}

GapCheck spectral_gap_check(const SpectralResult& result, double xi_x0, double a_L, double d_L, double c_prime) {
  if (result.eigenvalues.size() < 2) throw DomainError("spectral_gap_check: needs at least two eigenvalues");
  GapCheck g;
  g.margin = xi_x0 - c_prime * a_L / d_L - result.eigenvalues[1];
  g.pass = g.margin >= 0.0;
  return g;
}

nlohmann::json to_json(const SpectralResult& r) {
  nlohmann::json centers = nlohmann::json::array();
  for (const Point& c : r.centers) centers.push_back(std::vector<int>(c.begin(), c.begin() + r.box.dim()));
  nlohmann::json j{{"eigenvalues", r.eigenvalues},
                   {"centers", centers},
                   {"residuals", r.residuals},
                   {"gap", nullptr},
                   {"iterations", r.iterations}};
  if (r.gap) j["gap"] = *r.gap;
  return j;
}

}  // namespace corrloc
