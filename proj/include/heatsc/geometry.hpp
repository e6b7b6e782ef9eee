#ifndef HEATSC_GEOMETRY_HPP
#define HEATSC_GEOMETRY_HPP

// Closed-form Riemannian geometry of the constant-curvature model manifolds:
// circles, rectangular flat tori and round spheres.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "heatsc/errors.hpp"
#include "heatsc/quadrature.hpp"

namespace heatsc {

enum class ManifoldKind { circle, flat_torus, round_sphere };

inline std::string to_string(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::circle: return "circle";
    case ManifoldKind::flat_torus: return "flat_torus";
    case ManifoldKind::round_sphere: return "round_sphere";
  }
  return "unknown";
}

/// A point on a model manifold. Circle and torus points carry one angle in
/// [0, 2pi) per factor; sphere points are unit vectors of the ambient space.
struct Point {
  Eigen::VectorXd coords;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_signed(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

inline double wrap_positive(double a) {
  a = std::fmod(a, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  if (a >= 2.0 * std::numbers::pi) a = 0.0;
  return a;
}

class ModelManifold {
 public:
  static ModelManifold circle(double radius) { return ModelManifold(ManifoldKind::circle, 1, {radius}); }

  static ModelManifold flat_torus(std::vector<double> lengths) {
    const int n = static_cast<int>(lengths.size());
    return ModelManifold(ManifoldKind::flat_torus, n, std::move(lengths));
  }

  static ModelManifold round_sphere(double radius, int dim = 2) {
    return ModelManifold(ManifoldKind::round_sphere, dim, {radius});
  }

  ManifoldKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const std::vector<double>& scale() const { return scale_; }
  bool is_flat() const { return kind_ != ManifoldKind::round_sphere; }

  /// Sectional curvature.
  double curvature() const { return is_flat() ? 0.0 : 1.0 / (scale_[0] * scale_[0]); }

  double injectivity_radius() const {
    if (kind_ == ManifoldKind::flat_torus) return *std::min_element(scale_.begin(), scale_.end()) / 2.0;
    return std::numbers::pi * scale_[0];
  }

  double diameter() const {
    switch (kind_) {
      case ManifoldKind::circle:
      case ManifoldKind::round_sphere: return std::numbers::pi * scale_[0];
      case ManifoldKind::flat_torus: {
        double s = 0.0;
        for (double l : scale_) s += 0.25 * l * l;
        return std::sqrt(s);
      }
    }
    return 0.0;
  }

  /// Period lengths of the angle coordinates (circle and torus only).
  std::vector<double> periods() const {
    if (kind_ == ManifoldKind::circle) return {2.0 * std::numbers::pi * scale_[0]};
    return scale_;
  }

  /// Number of stored coordinates per point.
  int coordinate_size() const { return kind_ == ManifoldKind::round_sphere ? dim_ + 1 : dim_; }

  /// Validates and normalizes raw coordinates: angles are wrapped into
  /// [0, 2pi), sphere vectors renormalized to unit length.
  Point point(Eigen::VectorXd coords) const {
    if (coords.size() != coordinate_size()) throw DimensionMismatch("point has wrong coordinate count");
    if (!coords.allFinite()) throw ValidationError("point coordinates must be finite");
    if (kind_ == ManifoldKind::round_sphere) {
      const double nrm = coords.norm();
      if (nrm < 1e-300) throw ValidationError("sphere point must be nonzero");
      coords /= nrm;
    } else {
      for (auto& c : coords) c = wrap_positive(c);
    }
    return Point{std::move(coords)};
  }

  Point point(std::initializer_list<double> c) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(c.size()));
    Eigen::Index i = 0;
    for (double x : c) v[i++] = x;
    return point(std::move(v));
  }

  /// Orthonormal tangent frame at p as an (n+1) x n matrix (sphere only).
  Eigen::MatrixXd frame(const Point& p) const {
    const Eigen::Index amb = dim_ + 1;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(p.coords);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(amb, amb);
    return q.rightCols(dim_);
  }

  /// Riemannian exponential map; v is given in an orthonormal frame at p.
  Point exp_map(const Point& p, const Eigen::VectorXd& v) const {
    if (v.size() != dim_) throw DimensionMismatch("tangent vector has wrong dimension");
    if (kind_ == ManifoldKind::round_sphere) {
      const double radius = scale_[0];
      const double rho = v.norm();
      if (rho == 0.0) return p;
      const Eigen::VectorXd w = frame(p) * v;
      const double a = rho / radius;
      Eigen::VectorXd x = std::cos(a) * p.coords + std::sin(a) * (w / rho);
      return Point{x / x.norm()};
    }
    const auto per = periods();
    Eigen::VectorXd c = p.coords;
    for (int i = 0; i < dim_; ++i) c[i] = wrap_positive(c[i] + v[i] * 2.0 * std::numbers::pi / per[i]);
    return Point{std::move(c)};
  }

  /// Inverse of exp_map at p, in frame coordinates. Requires d(p, x) < inj.
  Eigen::VectorXd log_map(const Point& p, const Point& x) const {
    if (kind_ == ManifoldKind::round_sphere) {
      const double radius = scale_[0];
      const double angle = sphere_angle(p, x);
      if (angle * radius >= injectivity_radius()) throw CutLocusError("points are antipodal");
      if (angle == 0.0) return Eigen::VectorXd::Zero(dim_);
      Eigen::VectorXd u = x.coords - x.coords.dot(p.coords) * p.coords;
      const double un = u.norm();
      if (un == 0.0) return Eigen::VectorXd::Zero(dim_);
      return frame(p).transpose() * (u * (radius * angle / un));
    }
    const auto per = periods();
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v[i] = wrap_signed(x.coords[i] - p.coords[i]) * per[i] / (2.0 * std::numbers::pi);
    if (v.norm() >= injectivity_radius()) throw CutLocusError("points lie beyond the injectivity radius");
    return v;
  }

  static double sphere_angle(const Point& a, const Point& b) {
    return 2.0 * std::atan2((a.coords - b.coords).norm(), (a.coords + b.coords).norm());
  }

 private:
  ModelManifold(ManifoldKind kind, int dim, std::vector<double> scale)
      : kind_(kind), dim_(dim), scale_(std::move(scale)) {
    for (double s : scale_) {
      if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("manifold scale entries must be positive");
    }
    if (kind_ == ManifoldKind::circle && dim_ != 1) throw ValidationError("circle has dimension 1");
    if (kind_ == ManifoldKind::round_sphere && dim_ != 2) throw ValidationError("only the 2-sphere is supported");
    if (kind_ == ManifoldKind::flat_torus && dim_ < 1) throw ValidationError("torus needs at least one length");
    if (kind_ != ManifoldKind::flat_torus && scale_.size() != 1) throw ValidationError("expected a single radius");
  }

  ManifoldKind kind_;
  int dim_;
  std::vector<double> scale_;
};

inline double distance(const ModelManifold& m, const Point& x, const Point& y) {
  if (m.kind() == ManifoldKind::round_sphere) return m.scale()[0] * ModelManifold::sphere_angle(x, y);
  const auto per = m.periods();
  double s = 0.0;
  for (int i = 0; i < m.dim(); ++i) {
    const double d = wrap_signed(x.coords[i] - y.coords[i]) * per[i] / (2.0 * std::numbers::pi);
    s += d * d;
  }
  return std::sqrt(s);
}

/// Point at parameter u of the shortest geodesic running from y (u=0) to x (u=1).
inline Point geodesic_point(const ModelManifold& m, const Point& y, const Point& x, double u) {
  if (distance(m, x, y) >= m.injectivity_radius()) throw CutLocusError("x lies on or beyond the cut locus of y");
  return m.exp_map(y, u * m.log_map(y, x));
}

inline double total_volume(const ModelManifold& m) {
  switch (m.kind()) {
    case ManifoldKind::circle: return 2.0 * std::numbers::pi * m.scale()[0];
    case ManifoldKind::flat_torus: {
      double v = 1.0;
      for (double l : m.scale()) v *= l;
      return v;
    }
    case ManifoldKind::round_sphere: return 4.0 * std::numbers::pi * m.scale()[0] * m.scale()[0];
  }
  return 0.0;
}

/// Largest radius on which G and the radial quantities are defined.
inline double radial_limit(const ModelManifold& m) {
  const double k = m.curvature();
  return k > 0.0 ? std::min(m.injectivity_radius(), std::numbers::pi / std::sqrt(k)) : m.injectivity_radius();
}

/// G(r) = (2n + Delta(r^2)) / 4 with the nonnegative Laplacian; a function of
/// the distance alone on model spaces.
inline double g_function(const ModelManifold& m, double r) {
  if (!(r >= 0.0) || r >= radial_limit(m)) throw DomainError("g_function: radius outside [0, inj)");
  const double k = m.curvature();
  if (k == 0.0 || r == 0.0) return 0.0;
  const double x = std::sqrt(k) * r;
  const double half = 0.5 * (m.dim() - 1);
  if (x < 1e-3) {
    const double x2 = x * x;
    return half * x2 * (1.0 / 3.0 + x2 * (1.0 / 45.0 + x2 * 2.0 / 945.0));
  }
  return half * (1.0 - x / std::tan(x));
}

/// G(r) / r, continued smoothly through r = 0.
inline double g_over_r(const ModelManifold& m, double r) {
  const double k = m.curvature();
  if (k == 0.0) return 0.0;
  if (r < 1e-4) return (m.dim() - 1) * k * r / 6.0;
  return g_function(m, r) / r;
}

/// Volume of the unit (n-1)-sphere.
inline double unit_sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// Volume of a geodesic ball of radius r in the n-dimensional model space of
/// constant curvature K.
inline double ball_volume_model(double K, int n, double r) {
  if (n < 1) throw DomainError("dimension must be positive");
  if (!(r > 0.0)) throw DomainError("ball radius must be positive");
  if (K > 0.0 && r >= std::numbers::pi / std::sqrt(K)) throw DomainError("ball radius exceeds pi/sqrt(K)");
  if (n == 1) return 2.0 * r;
  if (K == 0.0) return unit_sphere_area(n) * std::pow(r, n) / n;
  const double a = std::sqrt(std::abs(K));
  if (n == 2) {
    if (K > 0.0) {
      const double s = std::sin(0.5 * a * r);
      return 2.0 * std::numbers::pi * 2.0 * s * s / K;  // 1 - cos = 2 sin^2(x/2)
    }
    const double s = std::sinh(0.5 * a * r);
    return 2.0 * std::numbers::pi * 2.0 * s * s / (-K);
  }
  auto sn = [&](double rho) { return K > 0.0 ? std::sin(a * rho) / a : std::sinh(a * rho) / a; };
  const double integral =
      integrate_adaptive([&](double rho) { return std::pow(sn(rho), n - 1); }, 0.0, r, 1e-15 * std::pow(r, n));
  return unit_sphere_area(n) * integral;
}

}  // namespace heatsc

#endif  // HEATSC_GEOMETRY_HPP
