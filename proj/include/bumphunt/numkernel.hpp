#pragma once

// Dense numeric primitives used by the rest of the toolkit: a cyclic Jacobi
// eigensolver for symmetric matrices, symmetric square root, Cholesky,
// inverse-ECDF quantiles, the standard normal quantile and the chi-squared
// quantile. Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bumphunt/errors.hpp"

namespace bumphunt {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Eigenpairs of a symmetric matrix. Eigenvalues are nonincreasing, the
/// eigenvectors are the columns of an orthogonal matrix, and each column is
/// signed so that its largest-magnitude entry is positive.
template <typename Scalar>
struct SymEigen {
  VectorX<Scalar> eigenvalues;
  MatrixX<Scalar> eigenvectors;
  int sweeps = 0;
};

inline constexpr int kJacobiMaxSweeps = 100;
inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kPsdTolerance = 1e-10;

namespace detail {

template <typename Derived>
void require_square_finite(const Eigen::MatrixBase<Derived>& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ValidationError(std::string(who) + ": matrix must be square and nonempty, got " +
                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (!m.allFinite()) throw ValidationError(std::string(who) + ": matrix has non-finite entries");
}

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& m, const char* who) {
  using Scalar = typename Derived::Scalar;
  const Scalar scale = m.cwiseAbs().maxCoeff();
  const Scalar asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > Scalar(kSymmetryTolerance) * scale) {
    throw ValidationError(std::string(who) + ": matrix is not symmetric (max |m - m'| = " +
                          std::to_string(static_cast<double>(asym)) + ")");
  }
}

template <typename Scalar>
Scalar off_diagonal_norm(const MatrixX<Scalar>& a) {
  Scalar sum = 0;
  const Eigen::Index n = a.rows();
  for (Eigen::Index q = 1; q < n; ++q)
    for (Eigen::Index p = 0; p < q; ++p) sum += a(p, q) * a(p, q);
  return std::sqrt(Scalar(2) * sum);
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Each rotation annihilates one off-diagonal pair; sweeps visit the strict
/// upper triangle row by row. Convergence is declared once the off-diagonal
/// Frobenius norm falls to machine precision relative to the whole matrix.
template <typename Derived>
SymEigen<typename Derived::Scalar> sym_eigen(const Eigen::MatrixBase<Derived>& m,
                                             int max_sweeps = kJacobiMaxSweeps) {
  using Scalar = typename Derived::Scalar;
  detail::require_square_finite(m, "sym_eigen");
  detail::require_symmetric(m, "sym_eigen");

  const Eigen::Index n = m.rows();
  MatrixX<Scalar> a = (m + m.transpose()) / Scalar(2);
  MatrixX<Scalar> v = MatrixX<Scalar>::Identity(n, n);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar scale = a.norm();

  int sweep = 0;
  for (;; ++sweep) {
    const Scalar off = detail::off_diagonal_norm(a);
    if (off <= eps * scale) break;
    if (sweep == max_sweeps) throw ConvergenceError("sym_eigen: Jacobi iteration did not converge", sweep);

    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        // Negligible against both diagonal entries: drop it instead of rotating.
        if (sweep > 3 && std::abs(apq) <= eps * Scalar(0.5) * std::min(std::abs(a(p, p)), std::abs(a(q, q)))) {
          a(p, q) = a(q, p) = Scalar(0);
          continue;
        }
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        Scalar t;
        if (std::abs(theta) > Scalar(1) / eps) {
          t = Scalar(1) / (Scalar(2) * theta);
        } else {
          t = Scalar(1) / (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
          if (theta < Scalar(0)) t = -t;
        }
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;

        // a <- a * J, then a <- J' * a, with J = [[c, s], [-s, c]] in the (p, q) plane.
        VectorX<Scalar> col_p = a.col(p);
        a.col(p) = c * col_p - s * a.col(q);
        a.col(q) = s * col_p + c * a.col(q);
        Eigen::Matrix<Scalar, 1, Eigen::Dynamic> row_p = a.row(p);
        a.row(p) = c * row_p - s * a.row(q);
        a.row(q) = s * row_p + c * a.row(q);
        a(p, q) = a(q, p) = Scalar(0);

        VectorX<Scalar> vp = v.col(p);
        v.col(p) = c * vp - s * v.col(q);
        v.col(q) = s * vp + c * v.col(q);
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&a](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SymEigen<Scalar> out;
  out.sweeps = sweep;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = a(src, src);
    Eigen::Index big = 0;
    v.col(src).cwiseAbs().maxCoeff(&big);
    out.eigenvectors.col(k) = v(big, src) < Scalar(0) ? VectorX<Scalar>(-v.col(src)) : VectorX<Scalar>(v.col(src));
  }
  return out;
}

/// Principal square root of a symmetric positive semidefinite matrix.
/// Eigenvalues in [-1e-10, 0) are treated as rounding noise and clipped.
template <typename Derived>
MatrixX<typename Derived::Scalar> sym_sqrt(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const auto eig = sym_eigen(m);
  const Scalar smallest = eig.eigenvalues(eig.eigenvalues.size() - 1);
  if (smallest < -Scalar(kPsdTolerance)) {
    throw NotPositiveSemidefiniteError("sym_sqrt: matrix is not positive semidefinite (smallest eigenvalue " +
                                       std::to_string(static_cast<double>(smallest)) + ")");
  }
  const VectorX<Scalar> roots = eig.eigenvalues.cwiseMax(Scalar(0)).cwiseSqrt();
  MatrixX<Scalar> r = eig.eigenvectors * roots.asDiagonal() * eig.eigenvectors.transpose();
  return (r + r.transpose()) / Scalar(2);
}

/// Lower Cholesky factor L with L L' = m. Throws if m is not positive definite.
template <typename Derived>
MatrixX<typename Derived::Scalar> cholesky_lower(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  detail::require_square_finite(m, "cholesky_lower");
  detail::require_symmetric(m, "cholesky_lower");
  const Eigen::Index n = m.rows();
  MatrixX<Scalar> l = MatrixX<Scalar>::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Scalar d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > Scalar(0))) {
      throw NotPositiveSemidefiniteError("cholesky_lower: matrix is not positive definite (pivot " +
                                         std::to_string(j) + ")");
    }
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return l;
}

/// 1-based index of the order statistic returned for quantile level q:
/// ceil(q * n), with level 0 mapped to the first order statistic.
inline std::size_t quantile_rank(std::size_t n, double q) {
  const double x = q * static_cast<double>(n);
  double k = std::ceil(x);
  // q*n landing a hair above an integer is a representation artifact.
  if (k - x > 1.0 - 1e-9) k -= 1.0;
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(k, 1.0)), 1, n);
}

/// Left-continuous inverse of the empirical CDF of `sorted` (ascending).
template <typename Scalar>
Scalar empirical_quantile(std::span<const Scalar> sorted, double q) {
  if (sorted.empty()) throw ValidationError("empirical_quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("empirical_quantile: level must lie in [0, 1]");
  return sorted[quantile_rank(sorted.size(), q) - 1];
}

template <typename Scalar>
Scalar empirical_quantile(const std::vector<Scalar>& sorted, double q) {
  return empirical_quantile(std::span<const Scalar>(sorted), q);
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal density.
inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

namespace detail {

// Rational approximation of the lower half of the normal quantile
// (Acklam), polished by two Halley steps against erfc.
inline double normal_quantile_lower(double q) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  if (q == 0.5) return 0.0;
  double x;
  if (q < 0.02425) {
    const double r = std::sqrt(-2.0 * std::log(q));
    x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  } else {
    const double s = q - 0.5;
    const double r = s * s;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * s /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int i = 0; i < 2; ++i) {
    const double e = normal_cdf(x) - q;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace detail

/// Inverse of the standard normal CDF on (0, 1). Antisymmetric about 1/2
/// by construction: the upper half is the negated lower half at 1 - q.
inline double normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("normal_quantile: level must lie in (0, 1)");
  if (q > 0.5) return -detail::normal_quantile_lower(1.0 - q);
  return detail::normal_quantile_lower(q);
}

/// Regularized lower incomplete gamma function P(a, x).
inline double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw ValidationError("regularized_gamma_p: need a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  constexpr double eps = 1e-16;
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * eps) break;
    }
    return std::min(1.0, sum * std::exp(log_prefix));
  }
  // Continued fraction for Q(a, x), modified Lentz.
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_prefix) * h);
}

inline double chi_squared_cdf(double x, double dof) {
  return x <= 0.0 ? 0.0 : regularized_gamma_p(0.5 * dof, 0.5 * x);
}

/// Quantile of the chi-squared distribution, by bisection on its CDF.
inline double chi_squared_quantile(double prob, double dof) {
  if (!(prob > 0.0 && prob < 1.0)) throw ValidationError("chi_squared_quantile: level must lie in (0, 1)");
  if (!(dof > 0.0)) throw ValidationError("chi_squared_quantile: dof must be positive");
  double lo = 0.0;
  double hi = std::max(1.0, dof);
  while (chi_squared_cdf(hi, dof) < prob) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi_squared_cdf(mid, dof) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// log of the volume of the unit ball in dimension p.
inline double log_unit_ball_volume(int p) {
  return 0.5 * p * std::log(std::numbers::pi) - std::lgamma(0.5 * p + 1.0);
}

}  // namespace bumphunt
