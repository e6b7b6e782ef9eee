#ifndef HEATSC_PARTITION_HPP
#define HEATSC_PARTITION_HPP

// Quantum and classical partition functions, heat-coefficient fits and the
// explicit upper bound for Tr exp(-t H) in terms of geodesic ball volumes.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "heatsc/errors.hpp"
#include "heatsc/fields.hpp"
#include "heatsc/geometry.hpp"
#include "heatsc/quadrature.hpp"
#include "heatsc/regression.hpp"
#include "heatsc/spectral_oracle.hpp"

namespace heatsc {

namespace detail {

inline Eigen::Vector3d orthogonal_unit(const Eigen::Vector3d& p) {
  const Eigen::Vector3d trial = std::abs(p.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  return (trial - trial.dot(p) * p).normalized();
}

}  // namespace detail

/// a_0(t) = integral over M of tr exp(-t V(x)).
inline double field_trace_integral(const ModelManifold& m, const EndomorphismField& V, double t) {
  V.check_compatible(m);
  const double vol = total_volume(m);
  if (V.is_constant()) return vol * exp_symmetric(V.constant_value(), -t).trace();

  auto tr = [&](const Point& p) { return exp_symmetric(V(m, p), -t).trace(); };

  if (V.kind() == FieldKind::zonal) {
    // integral over S^2_R = 2 pi R^2 * integral_{-1}^{1} f(c) dc
    const Eigen::Vector3d pole = V.pole();
    const Eigen::Vector3d side = detail::orthogonal_unit(pole);
    const double r = m.scale()[0];
    auto at = [&](double c) {
      const Eigen::Vector3d x = c * pole + std::sqrt(std::max(0.0, 1.0 - c * c)) * side;
      return tr(m.point({x[0], x[1], x[2]}));
    };
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int nodes = 16; nodes <= 1024; nodes *= 2) {
      const GaussRule g = make_gauss_legendre(nodes);
      double acc = 0.0;
      for (int i = 0; i < nodes; ++i) acc += g.weights[i] * at(2.0 * g.nodes[i] - 1.0);
      const double val = 2.0 * std::numbers::pi * r * r * 2.0 * acc;
      if (std::abs(val - prev) <= 1e-14 * std::abs(val)) return val;
      prev = val;
    }
    throw QuadratureFailure("zonal trace integral did not converge");
  }

  // Fourier field: tensor trapezoid rule, refined until two levels agree
  const int n = m.dim();
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int pts = 8 * (V.max_frequency() + 1); std::pow(static_cast<double>(pts), n) <= 1 << 22; pts *= 2) {
    std::vector<int> idx(n, 0);
    double acc = 0.0;
    while (true) {
      Eigen::VectorXd c(n);
      for (int i = 0; i < n; ++i) c[i] = 2.0 * std::numbers::pi * idx[i] / pts;
      acc += tr(Point{c});
      int d = 0;
      while (d < n && ++idx[d] == pts) idx[d++] = 0;
      if (d == n) break;
    }
    const double val = vol * acc / std::pow(static_cast<double>(pts), n);
    if (std::abs(val - prev) <= 1e-14 * std::abs(val)) return val;
    prev = val;
  }
  throw QuadratureFailure("torus trace integral did not converge");
}

/// (2 sqrt(pi t) hbar)^{-n} * a_0(t).
inline double classical_prefactor(int n, double t, double hbar) {
  return std::pow(2.0 * std::sqrt(std::numbers::pi * t) * hbar, -n);
}

inline double z_classical(const ModelManifold& m, const EndomorphismField& V, double t, double hbar) {
  if (!(t > 0.0) || !(hbar > 0.0)) throw DomainError("t and hbar must be positive");
  return classical_prefactor(m.dim(), t, hbar) * field_trace_integral(m, V, t);
}

inline double z_quantum(const SpectralDecomposition& sd, double t) { return oracle_trace(sd, t); }

struct HeatFit {
  std::vector<double> a;  ///< a_0(t) .. a_order(t)
  std::vector<double> stderr_;
  double residual_norm = 0.0;
  double condition = 0.0;
};

/// Least-squares fit of Z_Q (2 sqrt(pi t) hbar)^n = sum_j a_j t^j hbar^{2j}.
inline HeatFit fit_heat_coefficients(const std::vector<std::pair<double, double>>& samples, double t, int n,
                                     int order) {
  if (order < 0) throw ValidationError("fit order must be nonnegative");
  if (static_cast<int>(samples.size()) < order + 2) throw ValidationError("fit needs at least order+2 samples");
  std::vector<double> x, y;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& [h, zq] : samples) {
    const double tau = t * h * h;
    lo = std::min(lo, tau);
    hi = std::max(hi, tau);
    x.push_back(tau);
    y.push_back(zq / classical_prefactor(n, t, h));
  }
  if (hi < 10.0 * lo * (1.0 - 1e-12)) throw ValidationError("fit samples must span a decade in t*hbar^2");
  const auto f = polyfit(x, y, order, 1e12);
  HeatFit out;
  out.residual_norm = f.residual_norm;
  out.condition = f.condition;
  for (int j = 0; j <= order; ++j) {
    out.a.push_back(f.coeffs[j] / std::pow(t, j));
    out.stderr_.push_back(f.stderr_[j] / std::pow(t, j));
  }
  return out;
}

struct BoundConstants {
  double alpha = 2.0;
  double delta = 1.0;
  double kappa = 0.0;  ///< Ric >= -kappa
  double w0 = 0.0;     ///< W >= w0
  double K = 0.0;      ///< sectional curvature <= K
  int n = 1;
  double c1 = 0.0;
  double c_tilde = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;

  static BoundConstants make(int n, double alpha, double delta, double kappa, double w0, double K) {
    if (!(alpha > 1.0)) throw DomainError("alpha must exceed 1");
    if (!(delta > 0.0)) throw DomainError("delta must be positive");
    if (!(kappa >= 0.0)) throw DomainError("kappa must be nonnegative");
    if (n < 1) throw DomainError("dimension must be positive");
    BoundConstants bc;
    bc.alpha = alpha;
    bc.delta = delta;
    bc.kappa = kappa;
    bc.w0 = w0;
    bc.K = K;
    bc.n = n;
    bc.c1 = std::pow(1.0 + delta, n * alpha) * std::exp((1.0 + alpha) / delta);
    bc.c_tilde = alpha * n / (alpha - 1.0) * kappa * delta;
    bc.c2 = bc.c_tilde - w0;
    bc.c3 = bc.c1 * std::pow(2.0 * std::sqrt(std::numbers::pi), n) / ball_volume_model(0.0, n, 1.0);
    return bc;
  }
};

/// Largest admissible t hbar^2: min(inj^2, pi^2 / K).
inline double bound_tau_limit(const ModelManifold& m, double K) {
  const double inj = m.injectivity_radius();
  double lim = inj * inj;
  if (K > 0.0) lim = std::min(lim, std::numbers::pi * std::numbers::pi / K);
  return lim;
}

/// c1 e^{c2 t hbar^2} a_0(t) / omega(sqrt(t hbar^2)), omega the exact ball
/// volume of the model manifold.
inline double gt_upper_bound(const ModelManifold& m, double a0, const BoundConstants& bc, double t, double hbar) {
  if (!(t > 0.0) || !(hbar > 0.0)) throw DomainError("t and hbar must be positive");
  const double tau = t * hbar * hbar;
  if (!(tau < bound_tau_limit(m, bc.K))) throw DomainError("t*hbar^2 outside the admissible radius window");
  const double omega = ball_volume_model(m.curvature(), m.dim(), std::sqrt(tau));
  return bc.c1 * std::exp(bc.c2 * tau) * a0 / omega;
}

struct CorollaryRow {
  double hbar = 0.0;
  double tau = 0.0;
  double zq = 0.0;
  double zc = 0.0;
  double ratio = 0.0;
  double rhs = 0.0;
  double bound = 0.0;  ///< gt_upper_bound
  bool holds = false;
  std::string error;   ///< nonempty if the entry lies outside the window
};

/// Right-hand side c3 e^{c2 tau} v_{0,n}(sqrt tau) / v_{K,n}(sqrt tau).
inline double corollary_rhs(const BoundConstants& bc, double tau) {
  const double r = std::sqrt(tau);
  return bc.c3 * std::exp(bc.c2 * tau) * ball_volume_model(0.0, bc.n, r) / ball_volume_model(bc.K, bc.n, r);
}

/// Evaluates Z_Q / Z_C against the volume-comparison bound for every hbar.
/// Z_Q is taken from zq(hbar); entries outside the window carry an error string.
template <typename ZqFn>
std::vector<CorollaryRow> check_corollary_47(const ModelManifold& m, const EndomorphismField& V,
                                             const BoundConstants& bc, double t, const std::vector<double>& hbar_grid,
                                             ZqFn&& zq) {
  std::vector<CorollaryRow> rows;
  const double a0 = field_trace_integral(m, V, t);
  for (double h : hbar_grid) {
    CorollaryRow row;
    row.hbar = h;
    row.tau = t * h * h;
    try {
      if (!(row.tau < bound_tau_limit(m, bc.K))) throw DomainError("t*hbar^2 outside the admissible radius window");
      row.zq = zq(h);
      row.zc = classical_prefactor(m.dim(), t, h) * a0;
      row.ratio = row.zq / row.zc;
      row.rhs = corollary_rhs(bc, row.tau);
      row.bound = gt_upper_bound(m, a0, bc, t, h);
      row.holds = row.ratio <= row.rhs * (1.0 + 1e-9);
    } catch (const DomainError& e) {
      row.error = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

/// Largest ratio * v_{K,n} / (e^{c2 tau} v_{0,n}) over valid rows: the smallest
/// constant that could replace c3 on this grid.
inline double empirical_constant(const std::vector<CorollaryRow>& rows, const BoundConstants& bc) {
  double c = 0.0;
  for (const auto& r : rows) {
    if (!r.error.empty()) continue;
    const double s = std::sqrt(r.tau);
    c = std::max(c, r.ratio * ball_volume_model(bc.K, bc.n, s) / (std::exp(bc.c2 * r.tau) * ball_volume_model(0.0, bc.n, s)));
  }
  return c;
}

}  // namespace heatsc

#endif  // HEATSC_PARTITION_HPP
