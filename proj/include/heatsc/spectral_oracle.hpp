#ifndef HEATSC_SPECTRAL_ORACLE_HPP
#define HEATSC_SPECTRAL_ORACLE_HPP

// Reference heat kernels and heat traces of H = hbar^2 (Delta + W) + V.
//
// exact mode:    closed-form Laplace spectra (circle, torus, sphere) with a
//                constant matrix shift V + hbar^2 W;
// galerkin mode: diagonalization of H in the orthonormal Fourier basis of a
//                circle or torus, split into the connected components of the
//                mode-coupling graph of the fields. Blocks closed under
//                k -> -k are solved in the real cos/sin basis.
//
// Sums are truncated by a fixed rule: the estimated tail must fall below 1e-14
// of the partial sum (for kernels: of the mean diagonal value), otherwise
// NotConverged is raised.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "heatsc/errors.hpp"
#include "heatsc/fields.hpp"
#include "heatsc/geometry.hpp"

namespace heatsc {

inline constexpr double kTailRelTol = 1e-14;

enum class SpectralMode { exact, galerkin };

struct GalerkinBlock {
  std::vector<std::vector<int>> modes;  ///< wave vectors of the block
  Eigen::VectorXd eigenvalues;          ///< ascending
  bool real = true;                     ///< eigenvectors stored in vectors_real
  Eigen::MatrixXd vectors_real;         ///< (modes * rank) x (modes * rank); empty if not requested
  Eigen::MatrixXcd vectors_complex;
  bool has_vectors() const { return real ? vectors_real.size() > 0 : vectors_complex.size() > 0; }
};

struct SpectralDecomposition {
  SpectralMode mode = SpectralMode::exact;
  ModelManifold manifold = ModelManifold::circle(1.0);
  int rank = 1;
  double hbar = 1.0;

  // exact mode
  double lap_cutoff = 0.0;  ///< every Laplace eigenvalue <= lap_cutoff is included
  Eigen::MatrixXd shift;    ///< constant V + hbar^2 W

  // galerkin mode
  int cutoff = 0;
  std::vector<GalerkinBlock> blocks;
  double potential_floor = 0.0;  ///< min eigenvalue of V + hbar^2 W on a grid
  double potential_ceil = 0.0;

  std::size_t basis_size() const {
    std::size_t s = 0;
    for (const auto& b : blocks) s += b.modes.size() * rank;
    return s;
  }
};

namespace detail {

// Laplace frequency indices along torus axis i with (2 pi k / l)^2 <= cap.
inline int axis_cutoff(double period, double cap) {
  return static_cast<int>(std::floor(std::sqrt(std::max(cap, 0.0)) * period / (2.0 * std::numbers::pi) + 1e-12));
}

inline int sphere_degree_cutoff(double radius, double cap) {
  const double c = cap * radius * radius;
  int l = static_cast<int>(std::floor(0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * std::max(c, 0.0)))));
  while ((l + 1.0) * (l + 2.0) <= c * (1 + 1e-14)) ++l;
  while (l > 0 && l * (l + 1.0) > c * (1 + 1e-14)) --l;
  return l;
}

// sum_{|k|>K} exp(-a k^2)
inline double theta_tail(double a, int K) {
  const double first = std::exp(-a * (K + 1.0) * (K + 1.0));
  const double ratio = std::exp(-a * (2.0 * K + 3.0));
  if (ratio >= 1.0) return std::numeric_limits<double>::infinity();
  return 2.0 * first / (1.0 - ratio);
}

inline double theta_partial(double a, int K) {
  double s = 0.0;
  for (int k = K; k >= 1; --k) s += 2.0 * std::exp(-a * k * k);
  return s + 1.0;
}

// sum_{l>L} (2l+1) exp(-a l(l+1))
inline double sphere_tail(double a, int L) {
  const double l1 = L + 1.0;
  if ((2.0 * l1 + 1.0) * (2.0 * l1 + 1.0) * a <= 2.0) return std::numeric_limits<double>::infinity();
  const double e = std::exp(-a * l1 * (l1 + 1.0));
  return (2.0 * l1 + 1.0) * e + e / a;
}

inline double min_eigen(const Eigen::MatrixXd& a) {
  if (a.rows() == 1) return a(0, 0);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

inline double max_eigen(const Eigen::MatrixXd& a) {
  if (a.rows() == 1) return a(0, 0);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

// Laplace eigenvalues of the free model manifold with 0 <= lambda <= cap, ascending.
inline std::vector<double> laplace_levels(const ModelManifold& m, double cap) {
  std::vector<double> out;
  if (m.kind() == ManifoldKind::round_sphere) {
    const double r2 = m.scale()[0] * m.scale()[0];
    const int L = sphere_degree_cutoff(m.scale()[0], cap);
    for (int l = 0; l <= L; ++l)
      for (int i = 0; i < 2 * l + 1; ++i) out.push_back(l * (l + 1.0) / r2);
    return out;
  }
  const auto per = m.periods();
  const int n = m.dim();
  std::vector<int> K(n);
  for (int i = 0; i < n; ++i) K[i] = axis_cutoff(per[i], cap);
  std::vector<int> k(n);
  for (int i = 0; i < n; ++i) k[i] = -K[i];
  while (true) {
    double lam = 0.0;
    for (int i = 0; i < n; ++i) {
      const double xi = 2.0 * std::numbers::pi * k[i] / per[i];
      lam += xi * xi;
    }
    if (lam <= cap * (1 + 1e-14)) out.push_back(lam);
    int d = 0;
    while (d < n && ++k[d] > K[d]) {
      k[d] = -K[d];
      ++d;
    }
    if (d == n) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Legendre polynomials P_0..P_L at c.
inline std::vector<double> legendre_series(int L, double c) {
  std::vector<double> p(L + 1);
  p[0] = 1.0;
  if (L >= 1) p[1] = c;
  for (int l = 2; l <= L; ++l) p[l] = ((2.0 * l - 1.0) * c * p[l - 1] - (l - 1.0) * p[l - 2]) / l;
  return p;
}

}  // namespace detail

/// Decomposition in exact mode for constant fields: eigenvalues hbar^2 lambda + mu,
/// lambda over the Laplace spectrum up to lap_cutoff, mu over eig(shift).
inline SpectralDecomposition exact_decomposition(const ModelManifold& m, double hbar, const SymMatrix& shift,
                                                 double lap_cutoff) {
  if (!(hbar > 0.0)) throw DomainError("hbar must be positive");
  if (!(lap_cutoff >= 0.0)) throw DomainError("Laplace cutoff must be nonnegative");
  SpectralDecomposition sd;
  sd.mode = SpectralMode::exact;
  sd.manifold = m;
  sd.rank = shift.order();
  sd.hbar = hbar;
  sd.lap_cutoff = lap_cutoff;
  sd.shift = shift.matrix();
  return sd;
}

/// Laplace spectrum of the model manifold containing at least max_count eigenvalues
/// (whole eigenspaces included).
inline SpectralDecomposition exact_spectrum(const ModelManifold& m, std::size_t max_count) {
  if (max_count == 0) throw ValidationError("max_count must be positive");
  double cap = 1.0;
  std::vector<double> lv;
  while ((lv = detail::laplace_levels(m, cap)).size() < max_count) cap *= 2.0;
  return exact_decomposition(m, 1.0, SymMatrix::zero(1), lv[max_count - 1]);
}

/// Sorted eigenvalues of H recorded by the decomposition. In exact mode these are
/// the complete set below hbar^2 * lap_cutoff + min eig(shift).
inline std::vector<double> eigenvalues(const SpectralDecomposition& sd) {
  std::vector<double> out;
  if (sd.mode == SpectralMode::exact) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sd.shift, Eigen::EigenvaluesOnly);
    const double h2 = sd.hbar * sd.hbar;
    for (double lam : detail::laplace_levels(sd.manifold, sd.lap_cutoff))
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(h2 * lam + es.eigenvalues()[i]);
  } else {
    for (const auto& b : sd.blocks)
      for (Eigen::Index i = 0; i < b.eigenvalues.size(); ++i) out.push_back(b.eigenvalues[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Coupling support of a Fourier field: wave vectors with nonzero coefficient.
inline std::vector<std::vector<int>> field_support(const EndomorphismField& f) {
  std::vector<std::vector<int>> out;
  if (f.kind() != FieldKind::fourier) return out;
  for (const auto& t : f.fourier_terms()) {
    bool zero = true;
    for (int k : t.k) zero = zero && k == 0;
    if (zero || (t.cos_coef == 0.0 && t.sin_coef == 0.0)) continue;
    out.push_back(t.k);
    std::vector<int> neg(t.k);
    for (auto& k : neg) k = -k;
    out.push_back(neg);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace detail {

using CoeffMap = std::map<std::vector<int>, Eigen::MatrixXcd>;

// Complex Fourier coefficients f_hat(kappa) (rank x rank) of a field, scaled.
inline void add_fourier_coefficients(const EndomorphismField& f, int dim, double scale, CoeffMap& out) {
  const int m = f.rank();
  auto slot = [&](const std::vector<int>& k) -> Eigen::MatrixXcd& {
    auto it = out.find(k);
    if (it == out.end()) it = out.emplace(k, Eigen::MatrixXcd::Zero(m, m)).first;
    return it->second;
  };
  if (f.kind() == FieldKind::constant) {
    slot(std::vector<int>(dim, 0)) += scale * f.constant_value().cast<std::complex<double>>();
    return;
  }
  for (const auto& t : f.fourier_terms()) {
    bool zero = true;
    for (int k : t.k) zero = zero && k == 0;
    auto put = [&](const std::vector<int>& k, std::complex<double> c) {
      auto& s = slot(k);
      s(t.row, t.col) += scale * c;
      if (t.row != t.col) s(t.col, t.row) += scale * c;
    };
    if (zero) {
      put(t.k, t.cos_coef);
      continue;
    }
    std::vector<int> neg(t.k);
    for (auto& k : neg) k = -k;
    put(t.k, std::complex<double>(0.5 * t.cos_coef, -0.5 * t.sin_coef));
    put(neg, std::complex<double>(0.5 * t.cos_coef, 0.5 * t.sin_coef));
  }
}

inline double frequency_sq(const std::vector<int>& k, const std::vector<double>& per) {
  double s = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double xi = 2.0 * std::numbers::pi * k[i] / per[i];
    s += xi * xi;
  }
  return s;
}

// Basis wave vectors: sum_i (k_i * l_min / l_i)^2 <= K^2.
inline std::vector<std::vector<int>> galerkin_modes(const ModelManifold& m, int K) {
  const auto per = m.periods();
  const int n = m.dim();
  const double lmin = *std::min_element(per.begin(), per.end());
  const double cap = std::pow(2.0 * std::numbers::pi * K / lmin, 2);
  std::vector<int> lim(n);
  for (int i = 0; i < n; ++i) lim[i] = axis_cutoff(per[i], cap);
  std::vector<std::vector<int>> out;
  std::vector<int> k(n);
  for (int i = 0; i < n; ++i) k[i] = -lim[i];
  while (true) {
    if (frequency_sq(k, per) <= cap * (1 + 1e-14)) out.push_back(k);
    int d = 0;
    while (d < n && ++k[d] > lim[d]) {
      k[d] = -lim[d];
      ++d;
    }
    if (d == n) break;
  }
  return out;
}

// Eigenvalues of a Hermitian matrix with bandwidth kd from its upper band in
// LAPACK storage.
inline Eigen::VectorXd banded_eigenvalues(const Eigen::MatrixXcd& h, Eigen::Index kd, bool real) {
  const Eigen::Index dim = h.rows();
  const auto ld = static_cast<lapack_int>(kd + 1);
  Eigen::VectorXd w(dim);
  lapack_int info = 0;
  if (real) {
    Eigen::MatrixXd ab = Eigen::MatrixXd::Zero(kd + 1, dim);
    for (Eigen::Index j = 0; j < dim; ++j)
      for (Eigen::Index i = std::max<Eigen::Index>(0, j - kd); i <= j; ++i) ab(kd + i - j, j) = h(i, j).real();
    info = LAPACKE_dsbevd(LAPACK_COL_MAJOR, 'N', 'U', static_cast<lapack_int>(dim), static_cast<lapack_int>(kd),
                          ab.data(), ld, w.data(), nullptr, 1);
  } else {
    Eigen::MatrixXcd ab = Eigen::MatrixXcd::Zero(kd + 1, dim);
    for (Eigen::Index j = 0; j < dim; ++j)
      for (Eigen::Index i = std::max<Eigen::Index>(0, j - kd); i <= j; ++i) ab(kd + i - j, j) = h(i, j);
    info = LAPACKE_zhbevd(LAPACK_COL_MAJOR, 'N', 'U', static_cast<lapack_int>(dim), static_cast<lapack_int>(kd),
                          ab.data(), ld, w.data(), nullptr, 1);
  }
  if (info != 0) throw NotConverged("banded eigensolver failed");
  return w;
}

// Dense divide-and-conquer solvers; on return a holds the eigenvectors when
// requested.
inline Eigen::VectorXd dense_eigen(Eigen::MatrixXd& a, bool with_vectors) {
  Eigen::VectorXd w(a.rows());
  const auto n = static_cast<lapack_int>(a.rows());
  if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, with_vectors ? 'V' : 'N', 'U', n, a.data(), n, w.data()) != 0)
    throw NotConverged("symmetric eigensolver failed");
  return w;
}

inline Eigen::VectorXd dense_eigen(Eigen::MatrixXcd& a, bool with_vectors) {
  Eigen::VectorXd w(a.rows());
  const auto n = static_cast<lapack_int>(a.rows());
  if (LAPACKE_zheevd(LAPACK_COL_MAJOR, with_vectors ? 'V' : 'N', 'U', n, a.data(), n, w.data()) != 0)
    throw NotConverged("Hermitian eigensolver failed");
  return w;
}

// For a block closed under k -> -k, rewrites h in the cos/sin basis, where a
// real field gives a real symmetric matrix. Returns the basis change U
// (columns: real basis functions in exponential coefficients), or an empty
// matrix when the block is not closed.
inline Eigen::SparseMatrix<std::complex<double>> real_basis(const std::vector<std::vector<int>>& block_modes, int rk) {
  std::map<std::vector<int>, Eigen::Index> pos;
  for (std::size_t a = 0; a < block_modes.size(); ++a) pos.emplace(block_modes[a], static_cast<Eigen::Index>(a));
  const auto dim = static_cast<Eigen::Index>(block_modes.size()) * rk;
  std::vector<Eigen::Triplet<std::complex<double>>> entries;
  const double s = std::sqrt(0.5);
  const std::complex<double> i_s(0.0, s);
  Eigen::Index col = 0;
  for (std::size_t a = 0; a < block_modes.size(); ++a) {
    std::vector<int> neg(block_modes[a]);
    for (auto& v : neg) v = -v;
    auto it = pos.find(neg);
    if (it == pos.end()) return {};
    const auto b = it->second;
    const auto ai = static_cast<Eigen::Index>(a);
    if (b < ai) continue;
    for (int f = 0; f < rk; ++f) {
      if (b == ai) {
        entries.emplace_back(ai * rk + f, col++, 1.0);
        continue;
      }
      entries.emplace_back(ai * rk + f, col, s);
      entries.emplace_back(b * rk + f, col++, s);
      entries.emplace_back(ai * rk + f, col, -i_s);
      entries.emplace_back(b * rk + f, col++, i_s);
    }
  }
  Eigen::SparseMatrix<std::complex<double>> u(dim, dim);
  u.setFromTriplets(entries.begin(), entries.end());
  return u;
}

// Omitted free trace sum_{xi outside basis} exp(-tau |xi|^2), bounded above.
inline double galerkin_free_tail(const ModelManifold& m, int K, double tau) {
  const auto per = m.periods();
  const double lmin = *std::min_element(per.begin(), per.end());
  if (m.dim() == 1) return theta_tail(tau * std::pow(2.0 * std::numbers::pi / per[0], 2), K);
  const double cap = std::pow(2.0 * std::numbers::pi * K / lmin, 2);
  constexpr double eps = 0.1;
  double prod = 1.0;
  for (double l : per) {
    const double a = eps * tau * std::pow(2.0 * std::numbers::pi / l, 2);
    const int kk = static_cast<int>(std::ceil(std::sqrt(60.0 / a))) + 1;
    prod *= theta_partial(a, kk) + theta_tail(a, kk);
  }
  return std::exp(-(1.0 - eps) * tau * cap) * prod;
}

inline double free_trace(const ModelManifold& m, double tau) {
  double prod = 1.0;
  for (double l : m.periods()) {
    const double a = tau * std::pow(2.0 * std::numbers::pi / l, 2);
    const int kk = static_cast<int>(std::ceil(std::sqrt(60.0 / a))) + 1;
    prod *= theta_partial(a, kk);
  }
  return prod;
}

inline std::pair<double, double> operator_range(const ModelManifold& m, const EndomorphismField& V,
                                                const EndomorphismField& W, double hbar) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : validation_grid(m, m.dim() == 1 ? 256 : 64)) {
    const Eigen::MatrixXd a = V(m, p) + hbar * hbar * W(m, p);
    lo = std::min(lo, min_eigen(a));
    hi = std::max(hi, max_eigen(a));
  }
  return {lo, hi};
}

}  // namespace detail

/// Fourier-Galerkin decomposition of hbar^2 (Delta + W) + V on a circle or torus.
/// Basis: wave vectors with sum_i (k_i l_min / l_i)^2 <= cutoff^2.
inline SpectralDecomposition galerkin_spectrum(const ModelManifold& m, const EndomorphismField& V,
                                               const std::optional<EndomorphismField>& W_opt, double hbar, int cutoff,
                                               bool with_vectors = true) {
  if (!m.is_flat()) throw ValidationError("Galerkin oracle supports circles and tori only");
  if (!(hbar > 0.0)) throw DomainError("hbar must be positive");
  const EndomorphismField W = W_opt ? *W_opt : EndomorphismField::zero(V.rank());
  for (const auto* f : {&V, &W}) {
    if (f->kind() == FieldKind::zonal) throw ValidationError("Galerkin oracle needs Fourier or constant fields");
    f->check_compatible(m);
  }
  if (V.rank() != W.rank()) throw DimensionMismatch("V and W must have equal rank");
  const int fmax = std::max(V.max_frequency(), W.max_frequency());
  if (cutoff < 1 || cutoff < 4 * fmax) throw CutoffTooSmall("Galerkin cutoff must be at least 4x the field frequency");

  const int n = m.dim();
  const int rk = V.rank();
  const auto per = m.periods();
  const double vol = total_volume(m);
  (void)vol;

  detail::CoeffMap coeffs;
  detail::add_fourier_coefficients(V, n, 1.0, coeffs);
  detail::add_fourier_coefficients(W, n, hbar * hbar, coeffs);

  const auto modes = detail::galerkin_modes(m, cutoff);
  std::map<std::vector<int>, int> index;
  for (std::size_t i = 0; i < modes.size(); ++i) index.emplace(modes[i], static_cast<int>(i));

  // connected components of the coupling graph
  std::vector<int> parent(modes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  std::vector<std::vector<int>> support = field_support(V);
  for (auto& s : field_support(W)) support.push_back(s);
  for (std::size_t p = 0; p < modes.size(); ++p) {
    for (const auto& kap : support) {
      std::vector<int> q(modes[p]);
      for (int i = 0; i < n; ++i) q[i] -= kap[i];
      auto it = index.find(q);
      if (it != index.end()) parent[find(static_cast<int>(p))] = find(it->second);
    }
  }
  std::map<int, std::vector<int>> comps;
  for (std::size_t p = 0; p < modes.size(); ++p) comps[find(static_cast<int>(p))].push_back(static_cast<int>(p));

  bool real = true;
  for (const auto& [k, c] : coeffs) real = real && c.imag().cwiseAbs().maxCoeff() == 0.0;

  SpectralDecomposition sd;
  sd.mode = SpectralMode::galerkin;
  sd.manifold = m;
  sd.rank = rk;
  sd.hbar = hbar;
  sd.cutoff = cutoff;
  std::tie(sd.potential_floor, sd.potential_ceil) = detail::operator_range(m, V, W, hbar);

  std::vector<int> local(modes.size());
  for (const auto& [root, members] : comps) {
    (void)root;
    for (std::size_t a = 0; a < members.size(); ++a) local[members[a]] = static_cast<int>(a);
    const Eigen::Index dim = static_cast<Eigen::Index>(members.size()) * rk;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::Index kd = 0;
    for (std::size_t a = 0; a < members.size(); ++a) {
      const auto& ka = modes[members[a]];
      const double kin = hbar * hbar * detail::frequency_sq(ka, per);
      for (int f = 0; f < rk; ++f) h(a * rk + f, a * rk + f) += kin;
      for (const auto& [kap, c] : coeffs) {
        std::vector<int> kb(ka);
        for (int i = 0; i < n; ++i) kb[i] -= kap[i];
        auto it = index.find(kb);
        if (it == index.end()) continue;
        const Eigen::Index b = local[it->second];
        h.block(a * rk, b * rk, rk, rk) += c;
        kd = std::max(kd, std::abs(static_cast<Eigen::Index>(a) - b) * rk + rk - 1);
      }
    }
    if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()))
      throw NumericalError("Galerkin matrix is not Hermitian");
    GalerkinBlock blk;
    for (int p : members) blk.modes.push_back(modes[p]);
    blk.real = real;
    if (!with_vectors && 4 * kd < dim) {
      blk.eigenvalues = detail::banded_eigenvalues(h, kd, real);
    } else if (real) {
      Eigen::MatrixXd hr = h.real();
      blk.eigenvalues = detail::dense_eigen(hr, with_vectors);
      if (with_vectors) blk.vectors_real = std::move(hr);
    } else if (const auto u = with_vectors ? detail::real_basis(blk.modes, rk) : Eigen::SparseMatrix<std::complex<double>>();
               u.nonZeros() > 0) {
      const Eigen::MatrixXcd hu = h * u;
      Eigen::MatrixXd hr = (u.adjoint() * hu).real();
      blk.eigenvalues = detail::dense_eigen(hr, true);
      blk.vectors_complex = u * hr;
    } else {
      blk.eigenvalues = detail::dense_eigen(h, with_vectors);
      if (with_vectors) blk.vectors_complex = std::move(h);
    }
    sd.blocks.push_back(std::move(blk));
  }
  return sd;
}

namespace detail {

// Upper estimate of the truncated trace tail for decomposition sd at time t.
inline double trace_tail(const SpectralDecomposition& sd, double t) {
  const double tau = t * sd.hbar * sd.hbar;
  const auto& m = sd.manifold;
  if (sd.mode == SpectralMode::galerkin)
    return sd.rank * std::exp(-t * sd.potential_floor) * galerkin_free_tail(m, sd.cutoff, tau);
  const double shift_tr = exp_symmetric(sd.shift, -t).trace();
  if (m.kind() == ManifoldKind::round_sphere) {
    const double r = m.scale()[0];
    return sphere_tail(tau / (r * r), sphere_degree_cutoff(r, sd.lap_cutoff)) * shift_tr;
  }
  double with_tail = 1.0, partial = 1.0;
  for (double l : m.periods()) {
    const double a = tau * std::pow(2.0 * std::numbers::pi / l, 2);
    const int K = axis_cutoff(l, sd.lap_cutoff);
    const double s = theta_partial(a, K);
    partial *= s;
    with_tail *= s + theta_tail(a, K);
  }
  return (with_tail - partial) * shift_tr;
}

}  // namespace detail

/// Tr exp(-t H).
inline double oracle_trace(const SpectralDecomposition& sd, double t) {
  if (!(t > 0.0)) throw DomainError("t must be positive");
  const double tau = t * sd.hbar * sd.hbar;
  const auto& m = sd.manifold;
  double sum = 0.0;
  if (sd.mode == SpectralMode::galerkin) {
    std::vector<double> ev = eigenvalues(sd);
    for (auto it = ev.rbegin(); it != ev.rend(); ++it) sum += std::exp(-t * *it);
  } else {
    const double shift_tr = exp_symmetric(sd.shift, -t).trace();
    if (m.kind() == ManifoldKind::round_sphere) {
      const double r = m.scale()[0];
      const int L = detail::sphere_degree_cutoff(r, sd.lap_cutoff);
      for (int l = L; l >= 0; --l) sum += (2.0 * l + 1.0) * std::exp(-tau * l * (l + 1.0) / (r * r));
    } else {
      sum = 1.0;
      for (double l : m.periods())
        sum *= detail::theta_partial(tau * std::pow(2.0 * std::numbers::pi / l, 2), detail::axis_cutoff(l, sd.lap_cutoff));
    }
    sum *= shift_tr;
  }
  const double tail = detail::trace_tail(sd, t);
  if (!(tail <= kTailRelTol * std::abs(sum))) throw NotConverged("heat trace: spectral cutoff exhausted before the tail bound was met");
  return sum;
}

/// Heat kernel k(x, y, t) of H as a rank x rank matrix.
inline Eigen::MatrixXd oracle_heat_kernel(const SpectralDecomposition& sd, const Point& x, const Point& y, double t) {
  if (!(t > 0.0)) throw DomainError("t must be positive");
  const auto& m = sd.manifold;
  const double vol = total_volume(m);
  const double tau = t * sd.hbar * sd.hbar;
  Eigen::MatrixXd k;
  double reference = 0.0;
  if (sd.mode == SpectralMode::exact) {
    const Eigen::MatrixXd e = exp_symmetric(sd.shift, -t);
    double scalar = 0.0, diag = 0.0;
    if (m.kind() == ManifoldKind::round_sphere) {
      const double r = m.scale()[0];
      const int L = detail::sphere_degree_cutoff(r, sd.lap_cutoff);
      const auto p = detail::legendre_series(L, std::cos(ModelManifold::sphere_angle(x, y)));
      for (int l = L; l >= 0; --l) {
        const double w = (2.0 * l + 1.0) * std::exp(-tau * l * (l + 1.0) / (r * r));
        scalar += w * p[l];
        diag += w;
      }
      scalar /= 4.0 * std::numbers::pi * r * r;
      diag /= 4.0 * std::numbers::pi * r * r;
    } else {
      const auto per = m.periods();
      scalar = 1.0;
      diag = 1.0;
      for (int i = 0; i < m.dim(); ++i) {
        const double a = tau * std::pow(2.0 * std::numbers::pi / per[i], 2);
        const int K = detail::axis_cutoff(per[i], sd.lap_cutoff);
        const double dth = x.coords[i] - y.coords[i];
        double s = 0.0;
        for (int kk = K; kk >= 1; --kk) s += 2.0 * std::exp(-a * kk * kk) * std::cos(kk * dth);
        scalar *= (1.0 + s) / per[i];
        diag *= detail::theta_partial(a, K) / per[i];
      }
    }
    k = scalar * e;
    reference = diag * operator_norm(e);
  } else {
    const int rk = sd.rank;
    k = Eigen::MatrixXd::Zero(rk, rk);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(rk, rk);
    const double inv_sqrt_vol = 1.0 / std::sqrt(vol);
    for (const auto& b : sd.blocks) {
      if (!b.has_vectors()) throw ValidationError("decomposition was built without eigenvectors");
      const Eigen::Index dim = b.eigenvalues.size();
      Eigen::MatrixXcd ex = Eigen::MatrixXcd::Zero(rk, dim), ey = Eigen::MatrixXcd::Zero(rk, dim);
      for (std::size_t p = 0; p < b.modes.size(); ++p) {
        double px = 0.0, py = 0.0;
        for (int i = 0; i < m.dim(); ++i) {
          px += b.modes[p][i] * x.coords[i];
          py += b.modes[p][i] * y.coords[i];
        }
        const std::complex<double> cx = std::polar(inv_sqrt_vol, px), cy = std::polar(inv_sqrt_vol, py);
        for (int f = 0; f < rk; ++f) {
          ex(f, p * rk + f) = cx;
          ey(f, p * rk + f) = cy;
        }
      }
      Eigen::MatrixXcd psi_x, psi_y;
      if (b.real) {
        psi_x = ex * b.vectors_real.cast<std::complex<double>>();
        psi_y = ey * b.vectors_real.cast<std::complex<double>>();
      } else {
        psi_x = ex * b.vectors_complex;
        psi_y = ey * b.vectors_complex;
      }
      Eigen::VectorXd w = (-t * b.eigenvalues.array()).exp();
      acc += psi_x * w.asDiagonal() * psi_y.adjoint();
      for (Eigen::Index i = 0; i < dim; ++i) reference += w[i];
    }
    k = acc.real();
    reference *= 1.0 / vol;
  }
  double tail = detail::trace_tail(sd, t) / vol;
  if (!(tail <= kTailRelTol * reference)) throw NotConverged("heat kernel: spectral cutoff exhausted before the tail bound was met");
  return k;
}

/// Smallest Laplace cutoff meeting the tail rule at tau = t hbar^2 (with margin).
inline double required_lap_cutoff(const ModelManifold& m, double tau) {
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  return (40.0 + 2.0 * m.dim() * std::log1p(1.0 / tau)) / tau + 1.0;
}

/// Smallest Galerkin cutoff (>= 4x field frequency) whose free tail passes the
/// tail rule at time t, with a 10% margin for coupling near the boundary.
inline int required_galerkin_cutoff(const ModelManifold& m, const EndomorphismField& V,
                                    const std::optional<EndomorphismField>& W, double hbar, double t) {
  const EndomorphismField w = W ? *W : EndomorphismField::zero(V.rank());
  const int fmax = std::max(V.max_frequency(), w.max_frequency());
  const auto [lo, hi] = detail::operator_range(m, V, w, hbar);
  const double tau = t * hbar * hbar;
  const double scale = detail::free_trace(m, tau) * std::exp(-t * (hi - lo));
  int K = std::max(1, 4 * fmax);
  while (V.rank() * detail::galerkin_free_tail(m, K, tau) > 0.01 * kTailRelTol * scale) K = std::max(K + 1, K * 21 / 20);
  return std::max(4 * fmax, static_cast<int>(std::ceil(1.1 * K)));
}

/// Chooses exact mode for constant fields, Galerkin mode for Fourier fields on
/// circles and tori. Non-constant fields on the sphere are not supported.
inline SpectralDecomposition build_oracle(const ModelManifold& m, const EndomorphismField& V,
                                          const std::optional<EndomorphismField>& W, double hbar, double t,
                                          int cutoff = 0, bool with_vectors = true) {
  const bool constant = V.is_constant() && (!W || W->is_constant());
  if (constant) {
    Eigen::MatrixXd shift = V.constant_value();
    if (W) shift += hbar * hbar * W->constant_value();
    const double cap = cutoff > 0 ? static_cast<double>(cutoff) : required_lap_cutoff(m, t * hbar * hbar);
    return exact_decomposition(m, hbar, SymMatrix(shift), cap);
  }
  if (!m.is_flat()) throw ValidationError("sphere oracle supports constant fields only");
  const int K = cutoff > 0 ? cutoff : required_galerkin_cutoff(m, V, W, hbar, t);
  return galerkin_spectrum(m, V, W, hbar, K, with_vectors);
}

}  // namespace heatsc

#endif  // HEATSC_SPECTRAL_ORACLE_HPP
