#ifndef HEATSC_FIELDS_HPP
#define HEATSC_FIELDS_HPP

// Symmetric matrix-valued fields on model manifolds (potential V, endomorphism
// W) and the dense symmetric-matrix utilities built on them.

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "heatsc/errors.hpp"
#include "heatsc/geometry.hpp"

namespace heatsc {

/// Dense real symmetric matrix. Construction rejects inputs whose asymmetry
/// exceeds 1e-12 (relative to max(1, max|a_ij|)) and symmetrizes the rest.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw DimensionMismatch("symmetric matrix must be square");
    if (!a.allFinite()) throw ValidationError("symmetric matrix has non-finite entries");
    const double scale = std::max(1.0, a.size() ? a.cwiseAbs().maxCoeff() : 0.0);
    if (a.size() && (a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw ValidationError("matrix is not symmetric");
    a_ = 0.5 * (a + a.transpose());
  }

  static SymMatrix identity(int order) { return SymMatrix(Eigen::MatrixXd::Identity(order, order)); }
  static SymMatrix zero(int order) { return SymMatrix(Eigen::MatrixXd::Zero(order, order)); }
  static SymMatrix diagonal(const Eigen::VectorXd& d) { return SymMatrix(Eigen::MatrixXd(d.asDiagonal())); }

  int order() const { return static_cast<int>(a_.rows()); }
  const Eigen::MatrixXd& matrix() const { return a_; }
  double operator()(int i, int j) const { return a_(i, j); }

  friend SymMatrix operator+(const SymMatrix& x, const SymMatrix& y) {
    if (x.order() != y.order()) throw DimensionMismatch("order mismatch");
    return SymMatrix(x.a_ + y.a_);
  }
  friend SymMatrix operator*(double s, const SymMatrix& x) { return SymMatrix(s * x.a_); }

 private:
  Eigen::MatrixXd a_;
};

/// exp(scale * a) for symmetric a via the eigendecomposition.
inline Eigen::MatrixXd exp_symmetric(const Eigen::MatrixXd& a, double scale) {
  if (a.rows() == 1) return Eigen::MatrixXd::Constant(1, 1, std::exp(scale * a(0, 0)));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd e = (scale * es.eigenvalues().array()).exp();
  return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().transpose();
}

inline SymMatrix sym_exp(const SymMatrix& a, double scale) {
  if (!std::isfinite(scale)) throw ValidationError("sym_exp: scale must be finite");
  return SymMatrix(exp_symmetric(a.matrix(), scale));
}

/// Largest singular value.
inline double operator_norm(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() == a.cols() && (a - a.transpose()).cwiseAbs().maxCoeff() == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(0);
}

struct InequalityCheck {
  double lhs;
  double rhs;
  bool holds;
};

/// |tr(a1 a2)| <= |a1| tr(a2) for positive semidefinite a2.
inline InequalityCheck trace_product_bound_check(const Eigen::MatrixXd& a1, const SymMatrix& a2) {
  if (a1.rows() != a1.cols() || a1.rows() != a2.order()) throw DimensionMismatch("trace bound: order mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a2.matrix(), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12) throw NotPsdError("second argument is not positive semidefinite");
  const double lhs = std::abs((a1 * a2.matrix()).trace());
  const double rhs = operator_norm(a1) * a2.matrix().trace();
  return {lhs, rhs, lhs <= rhs + 1e-12 * (1.0 + rhs)};
}

/// tr exp(-(b + c)) <= tr(exp(-b) exp(-c)).
inline InequalityCheck golden_thompson_check(const SymMatrix& b, const SymMatrix& c) {
  if (b.order() != c.order()) throw DimensionMismatch("Golden-Thompson: order mismatch");
  const double lhs = exp_symmetric(b.matrix() + c.matrix(), -1.0).trace();
  const double rhs = (exp_symmetric(b.matrix(), -1.0) * exp_symmetric(c.matrix(), -1.0)).trace();
  return {lhs, rhs, lhs <= rhs * (1.0 + 1e-12)};
}

enum class FieldKind { constant, fourier, zonal };

/// One real Fourier term a*cos(k.theta) + b*sin(k.theta) of matrix entry (row, col).
struct FourierTerm {
  int row = 0;
  int col = 0;
  std::vector<int> k;
  double cos_coef = 0.0;
  double sin_coef = 0.0;
};

/// Polynomial sum_i coeffs[i] * c^i in c = cos(angle to the pole), entry (row, col).
struct ZonalTerm {
  int row = 0;
  int col = 0;
  std::vector<double> coeffs;
};

class EndomorphismField {
 public:
  static EndomorphismField constant(const SymMatrix& value) {
    EndomorphismField f(FieldKind::constant, value.order());
    f.constant_ = value.matrix();
    return f;
  }

  static EndomorphismField zero(int rank) { return constant(SymMatrix::zero(rank)); }

  /// Terms on the same (row, col) accumulate; off-diagonal terms are mirrored.
  static EndomorphismField fourier(int rank, int dim, std::vector<FourierTerm> terms) {
    EndomorphismField f(FieldKind::fourier, rank);
    f.dim_ = dim;
    for (auto& t : terms) {
      if (t.row < 0 || t.col < 0 || t.row >= rank || t.col >= rank) throw ValidationError("Fourier term entry out of range");
      if (static_cast<int>(t.k.size()) != dim) throw DimensionMismatch("Fourier wave vector has wrong dimension");
      if (!std::isfinite(t.cos_coef) || !std::isfinite(t.sin_coef)) throw ValidationError("non-finite Fourier coefficient");
      if (t.row > t.col) std::swap(t.row, t.col);
    }
    f.fourier_ = std::move(terms);
    return f;
  }

  static EndomorphismField zonal(int rank, Eigen::Vector3d pole, std::vector<ZonalTerm> terms) {
    EndomorphismField f(FieldKind::zonal, rank);
    if (pole.norm() == 0.0) throw ValidationError("zonal pole must be nonzero");
    f.pole_ = pole.normalized();
    for (auto& t : terms) {
      if (t.row < 0 || t.col < 0 || t.row >= rank || t.col >= rank) throw ValidationError("zonal term entry out of range");
      if (t.row > t.col) std::swap(t.row, t.col);
    }
    f.zonal_ = std::move(terms);
    return f;
  }

  FieldKind kind() const { return kind_; }
  int rank() const { return rank_; }
  bool is_constant() const { return kind_ == FieldKind::constant; }
  const Eigen::MatrixXd& constant_value() const { return constant_; }
  const std::vector<FourierTerm>& fourier_terms() const { return fourier_; }
  const std::vector<ZonalTerm>& zonal_terms() const { return zonal_; }
  const Eigen::Vector3d& pole() const { return pole_; }

  std::optional<double> lower_bound() const { return lower_bound_; }
  void set_lower_bound(double w0) { lower_bound_ = w0; }

  /// Highest |k_i| over all Fourier terms (0 for other kinds).
  int max_frequency() const {
    int f = 0;
    for (const auto& t : fourier_)
      for (int k : t.k) f = std::max(f, std::abs(k));
    return f;
  }

  void check_compatible(const ModelManifold& m) const {
    if (kind_ == FieldKind::fourier) {
      if (!m.is_flat()) throw ValidationError("Fourier fields need a circle or torus");
      if (dim_ != m.dim()) throw DimensionMismatch("Fourier field dimension differs from the manifold");
    }
    if (kind_ == FieldKind::zonal && m.kind() != ManifoldKind::round_sphere)
      throw ValidationError("zonal fields need a sphere");
  }

  /// Field value at p (symmetric by construction).
  Eigen::MatrixXd operator()(const ModelManifold& m, const Point& p) const {
    switch (kind_) {
      case FieldKind::constant: return constant_;
      case FieldKind::fourier: {
        (void)m;
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(rank_, rank_);
        for (const auto& t : fourier_) {
          double phase = 0.0;
          for (int i = 0; i < dim_; ++i) phase += t.k[i] * p.coords[i];
          double val = t.cos_coef * std::cos(phase);
          if (t.sin_coef != 0.0) val += t.sin_coef * std::sin(phase);
          v(t.row, t.col) += val;
          if (t.row != t.col) v(t.col, t.row) += val;
        }
        return v;
      }
      case FieldKind::zonal: {
        const double c = p.coords.head<3>().dot(pole_);
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(rank_, rank_);
        for (const auto& t : zonal_) {
          double acc = 0.0;
          for (auto it = t.coeffs.rbegin(); it != t.coeffs.rend(); ++it) acc = acc * c + *it;
          v(t.row, t.col) += acc;
          if (t.row != t.col) v(t.col, t.row) += acc;
        }
        return v;
      }
    }
    return {};
  }

  SymMatrix value(const ModelManifold& m, const Point& p) const { return SymMatrix((*this)(m, p)); }

 private:
  EndomorphismField(FieldKind kind, int rank) : kind_(kind), rank_(rank) {
    if (rank < 1) throw ValidationError("field rank must be at least 1");
  }

  FieldKind kind_;
  int rank_;
  int dim_ = 0;
  Eigen::MatrixXd constant_;
  std::vector<FourierTerm> fourier_;
  std::vector<ZonalTerm> zonal_;
  Eigen::Vector3d pole_ = Eigen::Vector3d::UnitZ();
  std::optional<double> lower_bound_;
};

/// Sample grid used to certify field bounds: `resolution` angles per circle or
/// torus factor; `resolution` polar x 2*resolution azimuthal nodes on the sphere.
inline std::vector<Point> validation_grid(const ModelManifold& m, int resolution) {
  std::vector<Point> pts;
  if (resolution < 2) throw ValidationError("grid resolution must be at least 2");
  if (m.kind() == ManifoldKind::round_sphere) {
    for (int i = 0; i < resolution; ++i) {
      const double pol = std::numbers::pi * i / (resolution - 1);
      for (int j = 0; j < 2 * resolution; ++j) {
        const double az = std::numbers::pi * j / resolution;
        pts.push_back(m.point({std::sin(pol) * std::cos(az), std::sin(pol) * std::sin(az), std::cos(pol)}));
        if (i == 0 || i == resolution - 1) break;
      }
    }
    return pts;
  }
  const int n = m.dim();
  std::vector<int> idx(n, 0);
  while (true) {
    Eigen::VectorXd c(n);
    for (int i = 0; i < n; ++i) c[i] = 2.0 * std::numbers::pi * idx[i] / resolution;
    pts.push_back(m.point(c));
    int d = 0;
    while (d < n && ++idx[d] == resolution) idx[d++] = 0;
    if (d == n) break;
  }
  return pts;
}

/// Minimum eigenvalue of f over the validation grid.
inline double field_min_eigen(const EndomorphismField& f, const ModelManifold& m, int resolution) {
  f.check_compatible(m);
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& p : validation_grid(m, resolution)) {
    const Eigen::MatrixXd v = f(m, p);
    const double e = v.rows() == 1 ? v(0, 0)
                                   : Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(v, Eigen::EigenvaluesOnly)
                                         .eigenvalues()
                                         .minCoeff();
    lo = std::min(lo, e);
  }
  return lo;
}

/// Throws if the declared lower bound is violated on the validation grid.
inline void validate_lower_bound(const EndomorphismField& f, const ModelManifold& m, int resolution = 64) {
  if (!f.lower_bound()) return;
  if (field_min_eigen(f, m, resolution) < *f.lower_bound() - 1e-9)
    throw ValidationError("field violates its declared lower bound");
}

}  // namespace heatsc

#endif  // HEATSC_FIELDS_HPP
