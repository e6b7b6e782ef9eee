#ifndef HEATSC_REGRESSION_HPP
#define HEATSC_REGRESSION_HPP

// Least-squares helpers: polynomial fits with standard errors, log-log slopes.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "heatsc/errors.hpp"

namespace heatsc {

struct PolyFit {
  Eigen::VectorXd coeffs;
  Eigen::VectorXd stderr_;
  double residual_norm = 0.0;
  double condition = 0.0;
};

/// Fits y ~ sum_j c_j x^j, j = 0..order. Throws IllConditioned above max_condition.
inline PolyFit polyfit(const std::vector<double>& x, const std::vector<double>& y, int order,
                       double max_condition = 1e12) {
  const auto n = static_cast<Eigen::Index>(x.size());
  if (x.size() != y.size()) throw DimensionMismatch("polyfit: x and y sizes differ");
  if (n < order + 1) throw ValidationError("polyfit: not enough samples");
  Eigen::MatrixXd a(n, order + 1);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (int j = 0; j <= order; ++j, p *= x[i]) a(i, j) = p;
    b[i] = y[i];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  PolyFit out;
  out.condition = s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();
  if (!(out.condition <= max_condition)) throw IllConditioned("polyfit: design matrix condition number too large");
  out.coeffs = svd.solve(b);
  const Eigen::VectorXd r = a * out.coeffs - b;
  out.residual_norm = r.norm();
  const Eigen::Index dof = n - (order + 1);
  const double sigma2 = dof > 0 ? r.squaredNorm() / static_cast<double>(dof) : 0.0;
  const Eigen::MatrixXd cov = sigma2 * (a.transpose() * a).inverse();
  out.stderr_ = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
};

/// Least-squares slope of log(y) against log(x). Nonpositive y are rejected.
inline LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionMismatch("loglog_fit: sizes differ");
  if (x.size() < 2) throw ValidationError("loglog_fit: need at least two points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("loglog_fit: values must be positive");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const auto f = polyfit(lx, ly, 1, 1e12);
  return {f.coeffs[1], f.coeffs[0], f.stderr_[1]};
}

/// Empirical convergence order of an error sequence.
struct ConvergenceFit {
  std::string quantity;
  std::vector<std::pair<double, double>> pairs;  ///< (hbar, error)
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
  double theoretical = 0.0;
  bool fitted = false;
  bool pass = false;
};

inline ConvergenceFit convergence_fit(std::string quantity, std::vector<std::pair<double, double>> pairs,
                                      double theoretical) {
  ConvergenceFit out;
  out.quantity = std::move(quantity);
  out.pairs = std::move(pairs);
  out.theoretical = theoretical;
  std::vector<double> x, y;
  for (const auto& [h, e] : out.pairs) {
    x.push_back(h);
    y.push_back(e);
  }
  const auto f = loglog_fit(x, y);
  out.slope = f.slope;
  out.intercept = f.intercept;
  out.stderr_ = f.stderr_;
  out.fitted = true;
  out.pass = out.slope >= theoretical - 0.25;
  return out;
}

}  // namespace heatsc

#endif  // HEATSC_REGRESSION_HPP
