#ifndef HEATSC_PARAMETRIX_HPP
#define HEATSC_PARAMETRIX_HPP

// Semi-classical heat-kernel parametrix for H = hbar^2 (Delta + W) + V on a
// trivial bundle M x R^m with the flat connection:
//
//   khat^(N)(x, y, t, hbar) = chi(d(x,y)) q(x, y, t hbar^2) sum_j (t hbar^2)^j phi_j(x, y, t)
//
// The coefficients phi_j solve the transport equations along the geodesic ray
// from y to x, written in the ray parameter u in [0, 1]:
//
//   phi_0 = exp(I(r)) A(1)^{-1},
//   phi_j = -exp(I(r)) A(1)^{-1} int_0^1 u^{j-1} exp(-I(ur)) A(u) (L phi_{j-1})(x_u, y, ut) du,
//
// with I(r) = int_0^1 G(ur)/u du, x_u the geodesic point at u, and A(u) the
// propagator dA/du = A t V(x_u), A(0) = id. L = Delta + W is applied with a
// five-point central stencil in normal coordinates.

#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "heatsc/errors.hpp"
#include "heatsc/fields.hpp"
#include "heatsc/geometry.hpp"
#include "heatsc/quadrature.hpp"

namespace heatsc {

struct ParametrixConfig {
  int N = 1;                    ///< truncation order, 0..2
  double eta = 0.0;             ///< cutoff radius; 0 selects 0.9 * injectivity radius
  int ode_steps = 256;          ///< Magnus steps over a full ray
  double quad_tol = 1e-10;      ///< Gauss-Legendre agreement tolerance
  double fd_step = 5e-3;        ///< stencil step when differentiating phi_0
  double fd_nest_factor = 4.0;  ///< step growth per further nesting level

  double cutoff_radius(const ModelManifold& m) const { return eta > 0.0 ? eta : 0.9 * m.injectivity_radius(); }

  /// Stencil step used to apply L to phi_{level}.
  double stencil_step(int level) const { return fd_step * std::pow(fd_nest_factor, level); }

  void validate(const ModelManifold& m) const {
    if (N < 0 || N > 2) throw ValidationError("parametrix order N must lie in 0..2");
    const double e = cutoff_radius(m);
    if (!(e > 0.0) || e >= radial_limit(m)) throw ValidationError("eta must satisfy 0 < eta < injectivity radius");
    if (!(quad_tol > 0.0)) throw ValidationError("quad_tol must be positive");
    if (ode_steps < 1) throw ValidationError("ode_steps must be positive");
    if (!(fd_step > 0.0) || !(fd_nest_factor >= 1.0)) throw ValidationError("invalid finite-difference steps");
  }
};

/// Euclidean heat kernel (4 pi tau)^{-n/2} exp(-r2 / (4 tau)).
inline double gaussian_q(double r2, double tau, int n) {
  if (!(tau > 0.0)) throw DomainError("gaussian_q: tau must be positive");
  if (!(r2 >= 0.0)) throw DomainError("gaussian_q: squared distance must be nonnegative");
  return std::pow(4.0 * std::numbers::pi * tau, -0.5 * n) * std::exp(-r2 / (4.0 * tau));
}

/// Smooth step: 1 on (-inf, eta/2], 0 on [eta, inf).
inline double cutoff_chi(double r, double eta) {
  if (!(eta > 0.0)) throw DomainError("cutoff_chi: eta must be positive");
  const double x = std::clamp((2.0 * r - eta) / eta, 0.0, 1.0);
  auto g = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
  const double a = g(1.0 - x), b = g(x);
  return a / (a + b);
}

/// Nonnegative Laplacian -sum_i d^2/dv_i^2 of f at z in normal coordinates,
/// five-point stencil with step h. f maps a Point to a matrix.
template <typename F>
Eigen::MatrixXd laplacian_fd(const ModelManifold& m, const Point& z, double h, F&& f) {
  const int n = m.dim();
  Eigen::MatrixXd center = f(z);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(center.rows(), center.cols());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    e.setZero();
    e[i] = h;
    acc += 16.0 * (f(m.exp_map(z, e)) + f(m.exp_map(z, -e)));
    acc -= f(m.exp_map(z, 2.0 * e)) + f(m.exp_map(z, -2.0 * e));
  }
  acc -= 30.0 * n * center;
  return -acc / (12.0 * h * h);
}

struct TransportState {
  double theta = 0.0;
  double s = 0.0;
  Point base;
  Eigen::VectorXd direction;      ///< unit tangent at base (frame coordinates)
  Eigen::MatrixXd A;              ///< propagator at s
  double det_abel = 1.0;          ///< exp(int cos(theta) tr V ds)
  double det_direct = 1.0;        ///< det(A) from the integrated matrix
  double max_abel_rel_err = 0.0;  ///< max over steps of |det A - det_abel| / det_abel
};

struct ParametrixEvaluation {
  double distance = 0.0;
  double chi = 0.0;
  double q_value = 0.0;
  std::vector<Eigen::MatrixXd> phi;
  Eigen::MatrixXd khat;
  std::optional<Eigen::MatrixXd> residual;
};

class Parametrix {
 public:
  Parametrix(ModelManifold m, EndomorphismField V, std::optional<EndomorphismField> W, ParametrixConfig cfg)
      : m_(std::move(m)),
        V_(std::move(V)),
        W_(W ? std::move(*W) : EndomorphismField::zero(V_.rank())),
        cfg_(cfg) {
    cfg_.validate(m_);
    V_.check_compatible(m_);
    W_.check_compatible(m_);
    if (W_.rank() != V_.rank()) throw DimensionMismatch("V and W must have equal rank");
  }

  const ModelManifold& manifold() const { return m_; }
  const EndomorphismField& potential() const { return V_; }
  const EndomorphismField& endomorphism() const { return W_; }
  const ParametrixConfig& config() const { return cfg_; }
  int rank() const { return V_.rank(); }
  double eta() const { return cfg_.cutoff_radius(m_); }

  /// Integrates dA/ds = A cos(theta) V(gamma(sin(theta) s)), A(0) = id, up to
  /// s_max with cfg.ode_steps fourth-order Magnus steps, where gamma is the unit-speed geodesic
  /// from y in direction dir. Tracks the Abel identity for det A.
  TransportState transport_propagator(const Point& y, const Eigen::VectorXd& dir, double theta,
                                      double s_max) const {
    if (!(s_max >= 0.0)) throw DomainError("s_max must be nonnegative");
    if (std::sin(theta) * s_max >= m_.injectivity_radius()) throw CutLocusError("ray leaves the injectivity domain");
    const double dn = dir.norm();
    if (dir.size() != m_.dim() || !(dn > 0.0)) throw ValidationError("direction must be a nonzero tangent vector");
    TransportState st;
    st.theta = theta;
    st.s = s_max;
    st.base = y;
    st.direction = dir / dn;
    const Eigen::VectorXd v = std::sin(theta) * s_max * st.direction;
    const double t = std::cos(theta) * s_max;
    RayResult ray = integrate_ray(y, v, t, {}, cfg_.ode_steps, true, /*exact_constant=*/false);
    st.A = std::move(ray.final_A);
    st.det_abel = std::exp(ray.log_det);
    st.det_direct = st.A.determinant();
    st.max_abel_rel_err = ray.max_abel_rel_err;
    return st;
  }

  /// phi_0(x, y, t); requires d(x, y) < eta.
  Eigen::MatrixXd phi0(const Point& x, const Point& y, double t) const {
    require_within_cutoff(x, y);
    if (!(t >= 0.0)) throw DomainError("t must be nonnegative");
    return phi0_impl(x, y, t);
  }

  /// phi_j(x, y, t) for 0 <= j <= 2; requires d(x, y) < eta.
  Eigen::MatrixXd phi(int j, const Point& x, const Point& y, double t) const {
    if (j < 0 || j > 2) throw ValidationError("phi_j is available for j = 0..2");
    require_within_cutoff(x, y);
    if (!(t >= 0.0)) throw DomainError("t must be nonnegative");
    return phi_impl(j, x, y, t);
  }

  /// phi_0 .. phi_N at (x, y, t).
  std::vector<Eigen::MatrixXd> coefficients(const Point& x, const Point& y, double t) const {
    std::vector<Eigen::MatrixXd> out;
    for (int j = 0; j <= cfg_.N; ++j) out.push_back(phi(j, x, y, t));
    return out;
  }

  /// Assembles khat^(N) from precomputed coefficients.
  Eigen::MatrixXd assemble(const std::vector<Eigen::MatrixXd>& phis, double r, double t, double hbar) const {
    const double chi = cutoff_chi(r, eta());
    if (chi == 0.0) return Eigen::MatrixXd::Zero(rank(), rank());
    const double tau = t * hbar * hbar;
    Eigen::MatrixXd sum = phis.at(0);
    double pw = 1.0;
    for (std::size_t j = 1; j < phis.size(); ++j) {
      pw *= tau;
      sum += pw * phis[j];
    }
    return chi * gaussian_q(r * r, tau, m_.dim()) * sum;
  }

  ParametrixEvaluation approximate_kernel(const Point& x, const Point& y, double t, double hbar,
                                          bool with_residual = false) const {
    if (!(t > 0.0) || !(hbar > 0.0)) throw DomainError("t and hbar must be positive");
    ParametrixEvaluation ev;
    ev.distance = distance(m_, x, y);
    ev.chi = cutoff_chi(ev.distance, eta());
    ev.q_value = gaussian_q(ev.distance * ev.distance, t * hbar * hbar, m_.dim());
    if (ev.chi == 0.0) {
      ev.khat = Eigen::MatrixXd::Zero(rank(), rank());
    } else {
      ev.phi = coefficients(x, y, t);
      ev.khat = assemble(ev.phi, ev.distance, t, hbar);
    }
    if (with_residual) ev.residual = residual(x, y, t, hbar);
    return ev;
  }

  /// r_N = (d/dt + hbar^2 L_x + V) khat^(N) by finite differences: central
  /// difference in t with step 1e-5 t, five-point stencil in x with step
  /// min(fd_step, 0.02 sqrt(t hbar^2)).
  Eigen::MatrixXd residual(const Point& x, const Point& y, double t, double hbar) const {
    if (!(t > 0.0) || !(hbar > 0.0)) throw DomainError("t and hbar must be positive");
    auto khat_at = [&](const Point& xp, double tp) -> Eigen::MatrixXd {
      const double r = distance(m_, xp, y);
      if (cutoff_chi(r, eta()) == 0.0) return Eigen::MatrixXd::Zero(rank(), rank());
      std::vector<Eigen::MatrixXd> phis;
      for (int j = 0; j <= cfg_.N; ++j) phis.push_back(phi_impl(j, xp, y, tp));
      return assemble(phis, r, tp, hbar);
    };
    const double dt = 1e-5 * t;
    const Eigen::MatrixXd dkdt = (khat_at(x, t + dt) - khat_at(x, t - dt)) / (2.0 * dt);
    const double h = std::min(cfg_.fd_step, 0.02 * std::sqrt(t * hbar * hbar));
    const Eigen::MatrixXd k0 = khat_at(x, t);
    const Eigen::MatrixXd lap = laplacian_fd(m_, x, h, [&](const Point& p) { return khat_at(p, t); });
    return dkdt + hbar * hbar * (lap + W_(m_, x) * k0) + V_(m_, x) * k0;
  }

  /// I(r) = int_0^1 G(u r)/u du.
  double log_volume_factor(double r) const {
    if (m_.curvature() == 0.0 || r == 0.0) return 0.0;
    return integrate_unit([&](double u) { return r * g_over_r(m_, u * r); }, cfg_.quad_tol).value;
  }

 private:
  struct RayResult {
    Eigen::MatrixXd final_A;
    std::vector<Eigen::MatrixXd> node_A;
    double log_det = 0.0;
    double max_abel_rel_err = 0.0;
  };

  void require_within_cutoff(const Point& x, const Point& y) const {
    if (distance(m_, x, y) >= eta()) throw CutLocusError("d(x, y) must be smaller than eta");
  }

  // Integrates dA/du = A t V(exp_y(u v)) over u in [0, 1], recording A at the
  // sorted nodes. Step counts per segment depend only on the nodes, so the
  // result is a smooth function of (y, v, t).
  RayResult integrate_ray(const Point& y, const Eigen::VectorXd& v, double t, const std::vector<double>& nodes,
                          int steps, bool track_abel, bool exact_constant) const {
    RayResult out;
    const int m = rank();
    if (V_.is_constant() && exact_constant) {
      const Eigen::MatrixXd& v0 = V_.constant_value();
      const bool zero = v0.cwiseAbs().maxCoeff() == 0.0;
      for (double u : nodes)
        out.node_A.push_back(zero ? Eigen::MatrixXd::Identity(m, m) : exp_symmetric(v0, u * t));
      out.final_A = zero ? Eigen::MatrixXd::Identity(m, m) : exp_symmetric(v0, t);
      out.log_det = t * v0.trace();
      return out;
    }
    auto rhs_field = [&](double u) -> Eigen::MatrixXd {
      if (V_.is_constant()) return t * V_.constant_value();
      return t * V_(m_, m_.exp_map(y, u * v));
    };
    // fourth-order Magnus step at the two Gauss points; exact for fields that
    // are constant along the ray
    const double gauss = std::sqrt(3.0) / 6.0;
    MatrixXld a = MatrixXld::Identity(m, m);
    long double log_a = 0.0L;
    double log_det = 0.0;
    double u0 = 0.0;
    auto advance = [&](double u1) {
      const double len = u1 - u0;
      if (len <= 0.0) return;
      const int n = std::max(1, static_cast<int>(std::ceil(steps * len - 1e-9)));
      const double h = len / n;
      for (int k = 0; k < n; ++k) {
        const double ua = u0 + k * h;
        const Eigen::MatrixXd g1 = rhs_field(ua + (0.5 - gauss) * h);
        const Eigen::MatrixXd g2 = rhs_field(ua + (0.5 + gauss) * h);
        const Eigen::MatrixXd omega = 0.5 * h * (g1 + g2) - (std::sqrt(3.0) / 12.0) * h * h * (g2 * g1 - g1 * g2);
        if (m == 1) {
          log_a += omega(0, 0);
          a(0, 0) = std::exp(log_a);
        } else {
          a = (a * step_exponential(MatrixXld(omega.cast<long double>()))).eval();
        }
        if (!a.allFinite()) throw StepFailure("transport propagator became non-finite");
        if (track_abel) {
          log_det += (h / 6.0) * (rhs_field(ua).trace() + 4.0 * rhs_field(ua + 0.5 * h).trace() + rhs_field(ua + h).trace());
          const double det = static_cast<double>(a.determinant());
          if (!(det > 0.0)) throw StepFailure("transport propagator lost invertibility");
          const double ref = std::exp(log_det);
          out.max_abel_rel_err = std::max(out.max_abel_rel_err, std::abs(det - ref) / ref);
        }
      }
      u0 = u1;
    };
    for (double u : nodes) {
      advance(u);
      out.node_A.push_back(a.cast<double>());
    }
    advance(1.0);
    out.final_A = a.cast<double>();
    out.log_det = log_det;
    return out;
  }

  Eigen::MatrixXd phi0_impl(const Point& x, const Point& y, double t) const {
    const Eigen::VectorXd v = m_.log_map(y, x);
    const double r = v.norm();
    if (r >= radial_limit(m_)) throw CutLocusError("x lies beyond the injectivity radius of y");
    const double pref = std::exp(log_volume_factor(r));
    RayResult ray = integrate_ray(y, v, t, {}, cfg_.ode_steps, false, true);
    return pref * inverse(ray.final_A);
  }

  // Degree-12 Taylor polynomial, scaled to norm <= 1/4 first. A fixed
  // polynomial keeps A a smooth function of the ray, which the nested finite
  // differences rely on.
  using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

  static MatrixXld step_exponential(const MatrixXld& omega) {
    using M = MatrixXld;
    const auto nrm = static_cast<double>(omega.cwiseAbs().colwise().sum().maxCoeff());
    int squarings = 0;
    while (std::ldexp(nrm, -squarings) > 0.25) ++squarings;
    const M b = std::ldexp(1.0L, -squarings) * omega;
    const M id = M::Identity(omega.rows(), omega.cols());
    M e = id;
    for (int k = 12; k >= 1; --k) e = (id + b * e / static_cast<long double>(k)).eval();
    for (int i = 0; i < squarings; ++i) e = (e * e).eval();
    return e;
  }

  static Eigen::MatrixXd inverse(const Eigen::MatrixXd& a) {
    if (a.rows() == 1) return Eigen::MatrixXd::Constant(1, 1, 1.0 / a(0, 0));
    return a.partialPivLu().inverse();
  }

  Eigen::MatrixXd phi_impl(int j, const Point& x, const Point& y, double t) const {
    if (j == 0) return phi0_impl(x, y, t);
    const Eigen::VectorXd v = m_.log_map(y, x);
    const double r = v.norm();
    const double h = cfg_.stencil_step(j - 1);
    const int m = rank();

    auto apply_rule = [&](const GaussRule& rule, double& scale) -> Eigen::MatrixXd {
      RayResult ray = integrate_ray(y, v, t, rule.nodes, cfg_.ode_steps, false, true);
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
      for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double u = rule.nodes[k];
        const Point xu = m_.exp_map(y, u * v);
        const double tu = u * t;
        auto f = [&](const Point& p) { return phi_impl(j - 1, p, y, tu); };
        Eigen::MatrixXd lphi = laplacian_fd(m_, xu, h, f);
        const Eigen::MatrixXd center = f(xu);
        scale = std::max(scale, center.cwiseAbs().maxCoeff());
        lphi += W_(m_, xu) * center;
        const double w = rule.weights[k] * std::pow(u, j - 1) * std::exp(-log_volume_factor(u * r));
        acc += w * ray.node_A[k] * lphi;
      }
      return acc;
    };

    double scale = 1.0;
    Eigen::MatrixXd prev = apply_rule(gauss_rule_at(0), scale);
    Eigen::MatrixXd integral;
    bool ok = false;
    for (std::size_t level = 1; level < kGaussLadder.size(); ++level) {
      integral = apply_rule(gauss_rule_at(level), scale);
      // roundoff floor of the five-point stencil
      const double fd_noise = 8.0 * m_.dim() * 1e-16 * scale / (h * h);
      const double tol = std::max(cfg_.quad_tol, fd_noise);
      if ((integral - prev).cwiseAbs().maxCoeff() <= tol * std::max(1.0, integral.cwiseAbs().maxCoeff())) {
        ok = true;
        break;
      }
      prev = integral;
    }
    if (!ok) throw QuadratureFailure("phi_j quadrature did not converge");
    RayResult ray = integrate_ray(y, v, t, {}, cfg_.ode_steps, false, true);
    return -std::exp(log_volume_factor(r)) * inverse(ray.final_A) * integral;
  }

  ModelManifold m_;
  EndomorphismField V_;
  EndomorphismField W_;
  ParametrixConfig cfg_;
};

}  // namespace heatsc

#endif  // HEATSC_PARAMETRIX_HPP
