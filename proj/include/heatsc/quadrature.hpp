#ifndef HEATSC_QUADRATURE_HPP
#define HEATSC_QUADRATURE_HPP

// One-dimensional quadrature: Gauss-Legendre rules with order escalation,
// adaptive Gauss-Kronrod (7/15), and the periodic trapezoidal rule.

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <queue>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "heatsc/errors.hpp"

namespace heatsc {

struct GaussRule {
  std::vector<double> nodes;    // on [0, 1]
  std::vector<double> weights;  // sum to 1
};

/// Gauss-Legendre rule of order n mapped to [0, 1], via Newton iteration on P_n.
inline GaussRule make_gauss_legendre(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 0 ? 1.0 : (n == 1 ? x : p1);
      const double pnm1 = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pnm1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[n - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

/// Ladder of rule orders used by `integrate_unit`.
inline constexpr std::array<int, 5> kGaussLadder{12, 20, 32, 48, 64};

inline const GaussRule& gauss_rule_at(std::size_t level) {
  static const std::array<GaussRule, kGaussLadder.size()> rules = [] {
    std::array<GaussRule, kGaussLadder.size()> r;
    for (std::size_t i = 0; i < kGaussLadder.size(); ++i) r[i] = make_gauss_legendre(kGaussLadder[i]);
    return r;
  }();
  return rules.at(level);
}

namespace detail {
inline double magnitude(double v) { return std::abs(v); }
template <typename Derived>
double magnitude(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseAbs().maxCoeff();
}
}  // namespace detail

template <typename T>
struct QuadResult {
  T value;
  double error;
  int order;
};

/// Integrates f over [0, 1] with successive Gauss-Legendre orders until two
/// consecutive rules agree to tol * max(1, |I|). The node set depends only on
/// the accepted order, so results are smooth in any parameter f depends on.
template <typename F>
auto integrate_unit(F&& f, double tol) {
  using T = std::decay_t<decltype(f(0.5))>;
  auto apply = [&](const GaussRule& rule) {
    T acc = rule.weights[0] * f(rule.nodes[0]);
    for (std::size_t i = 1; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(rule.nodes[i]);
    return acc;
  };
  T prev = apply(gauss_rule_at(0));
  for (std::size_t level = 1; level < kGaussLadder.size(); ++level) {
    T cur = apply(gauss_rule_at(level));
    T diff = cur - prev;
    const double err = detail::magnitude(diff);
    if (err <= tol * std::max(1.0, detail::magnitude(cur))) {
      return QuadResult<T>{std::move(cur), err, kGaussLadder[level]};
    }
    prev = std::move(cur);
  }
  throw QuadratureFailure("Gauss-Legendre ladder exhausted before reaching tolerance");
}

/// Adaptive Gauss-Kronrod 7/15 on [a, b] for scalar integrands.
inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                 double tol, int max_pieces = 4000) {
  static constexpr std::array<double, 8> xk{0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> wk{0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg{0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                            0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
  auto segment = [&](double lo, double hi) -> std::pair<double, double> {
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    const double fc = f(c);
    double k = wk[7] * fc, g = wg[3] * fc;
    for (int j = 0; j < 7; ++j) {
      const double v = f(c - h * xk[j]) + f(c + h * xk[j]);
      k += wk[j] * v;
      if (j % 2 == 1) g += wg[j / 2] * v;
    }
    return {k * h, std::abs((k - g) * h)};
  };
  // Global strategy: bisect the interval with the largest error estimate until
  // the summed estimate meets tol.
  struct Piece {
    double lo, hi, value, error;
    bool operator<(const Piece& o) const { return error < o.error; }
  };
  std::priority_queue<Piece> heap;
  auto push = [&](double lo, double hi) {
    auto [v, e] = segment(lo, hi);
    heap.push({lo, hi, v, e});
    return e;
  };
  double total_err = push(a, b);
  for (int pieces = 1; total_err > tol; ++pieces) {
    if (pieces >= max_pieces) throw QuadratureFailure("adaptive Gauss-Kronrod: interval budget exhausted");
    const Piece worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    total_err += push(worst.lo, mid) + push(mid, worst.hi) - worst.error;
  }
  double acc = 0.0;
  for (; !heap.empty(); heap.pop()) acc += heap.top().value;
  return acc;
}

/// Trapezoidal rule for a 2*pi-periodic integrand; spectrally accurate for
/// smooth periodic f. Returns the mean value over one period.
inline double periodic_mean(const std::function<double(double)>& f, int points) {
  double acc = 0.0;
  for (int i = 0; i < points; ++i) acc += f(2.0 * std::numbers::pi * i / points);
  return acc / points;
}

}  // namespace heatsc

#endif  // HEATSC_QUADRATURE_HPP
