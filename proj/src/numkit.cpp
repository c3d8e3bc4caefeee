// SPDX-License-Identifier: Apache-2.0

#include "asyncfp/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace asyncfp::numkit {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, Vector data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("DenseMatrix: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double DenseMatrix::frobenius_norm() const { return norm2(data_); }

bool DenseMatrix::all_finite() const { return numkit::all_finite(data_); }

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix product: shape mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("matrix sum: shape mismatch");
  DenseMatrix c = a;
  axpy(1.0, b.data(), c.data());
  return c;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("matrix difference: shape mismatch");
  DenseMatrix c = a;
  axpy(-1.0, b.data(), c.data());
  return c;
}

DenseMatrix operator*(double s, const DenseMatrix& a) {
  DenseMatrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

Vector operator*(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw std::invalid_argument("matrix-vector: shape mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) {
  // Scaled accumulation so that huge (diverging) iterates do not overflow early.
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (double v : a) {
    const double t = v / scale;
    s += t * t;
  }
  return scale * std::sqrt(s);
}

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) {
    if (std::isnan(v)) return v;
    m = std::max(m, std::abs(v));
  }
  return m;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

void axpy(double s, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

namespace {

struct QrResult {
  DenseMatrix r;    // k x k upper triangular
  Vector qt_rhs;    // first k entries of Q^T rhs
};

// Householder QR of the column set `cols` (each of equal length) applied to
// `rhs` in place.
QrResult householder_qr(std::vector<Vector> cols, Vector rhs) {
  const std::size_t k = cols.size();
  const std::size_t len = rhs.size();
  for (std::size_t j = 0; j < k; ++j) {
    Vector& a = cols[j];
    double nrm = 0.0;
    {
      double scale = 0.0;
      for (std::size_t i = j; i < len; ++i) scale = std::max(scale, std::abs(a[i]));
      if (scale > 0.0) {
        double s = 0.0;
        for (std::size_t i = j; i < len; ++i) s += (a[i] / scale) * (a[i] / scale);
        nrm = scale * std::sqrt(s);
      }
    }
    if (nrm == 0.0) continue;
    const double alpha = a[j] > 0.0 ? -nrm : nrm;
    Vector v(a.begin() + static_cast<std::ptrdiff_t>(j), a.end());
    v[0] -= alpha;
    const double vv = dot(v, v);
    if (vv == 0.0) continue;
    auto reflect = [&](Vector& c) {
      double s = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * c[j + i];
      s = 2.0 * s / vv;
      for (std::size_t i = 0; i < v.size(); ++i) c[j + i] -= s * v[i];
    };
    for (std::size_t c = j; c < k; ++c) reflect(cols[c]);
    reflect(rhs);
    a[j] = alpha;
    for (std::size_t i = j + 1; i < len; ++i) a[i] = 0.0;
  }
  QrResult out{DenseMatrix(k, k), Vector(rhs.begin(), rhs.begin() + static_cast<std::ptrdiff_t>(k))};
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i <= j; ++i) out.r(i, j) = cols[j][i];
  return out;
}

Vector back_substitute(const DenseMatrix& r, const Vector& rhs) {
  const std::size_t k = r.rows();
  Vector x(k, 0.0);
  for (std::size_t ii = k; ii-- > 0;) {
    double s = rhs[ii];
    for (std::size_t j = ii + 1; j < k; ++j) s -= r(ii, j) * x[j];
    x[ii] = s / r(ii, ii);
  }
  return x;
}

}  // namespace

Vector singular_values(const DenseMatrix& a) {
  // One-sided Jacobi on the columns of a copy.
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  std::vector<Vector> cols(n, Vector(m));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) cols[j][i] = a(i, j);
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(cols[p], cols[p]);
        const double beta = dot(cols[q], cols[q]);
        const double gamma = dot(cols[p], cols[q]);
        if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = cols[p][i];
          const double xq = cols[q][i];
          cols[p][i] = c * xp - s * xq;
          cols[q][i] = s * xp + c * xq;
        }
      }
    if (!rotated) break;
  }
  Vector sv(n);
  for (std::size_t j = 0; j < n; ++j) sv[j] = norm2(cols[j]);
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

LsSolution solve_constrained_ls(std::span<const Vector> residual_history, double regularization) {
  if (residual_history.empty()) throw std::invalid_argument("solve_constrained_ls: empty history");
  if (regularization < 0.0 || !std::isfinite(regularization))
    throw std::invalid_argument("solve_constrained_ls: regularization must be finite and >= 0");
  const std::size_t n = residual_history.front().size();
  for (const Vector& r : residual_history) {
    if (r.size() != n) throw std::invalid_argument("solve_constrained_ls: residual length mismatch");
    if (!all_finite(r)) throw NumericError("solve_constrained_ls: non-finite residual");
  }
  const std::size_t m = residual_history.size() - 1;
  const Vector& newest = residual_history[m];

  LsSolution sol;
  Vector gamma(m, 0.0);
  std::size_t first = 0;
  const bool reg = regularization > 0.0;
  const double sqrt_reg = std::sqrt(regularization);
  while (first < m) {
    const std::size_t k = m - first;
    const std::size_t len = n + (reg ? k : 0);
    std::vector<Vector> cols(k, Vector(len, 0.0));
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t j = first + c;
      for (std::size_t i = 0; i < n; ++i) cols[c][i] = residual_history[j + 1][i] - residual_history[j][i];
      if (reg) cols[c][n + c] = sqrt_reg;
    }
    Vector rhs(len, 0.0);
    std::copy(newest.begin(), newest.end(), rhs.begin());
    QrResult qr = householder_qr(std::move(cols), std::move(rhs));
    const Vector sv = singular_values(qr.r);
    const double smax = sv.front();
    const double smin = sv.back();
    if (smax == 0.0 || smin == 0.0 || smax / smin > kLsConditionLimit) {
      ++first;
      ++sol.dropped_columns;
      continue;
    }
    const Vector g = back_substitute(qr.r, qr.qt_rhs);
    for (std::size_t c = 0; c < k; ++c) gamma[first + c] = g[c];
    break;
  }

  // r_m - sum_j gamma_j (r_{j+1} - r_j) expressed in the original residuals.
  sol.coefficients.assign(m + 1, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    sol.coefficients[j] += gamma[j];
    sol.coefficients[j + 1] -= gamma[j];
  }
  sol.coefficients[m] += 1.0;

  Vector combined(n, 0.0);
  for (std::size_t j = 0; j <= m; ++j)
    if (sol.coefficients[j] != 0.0) axpy(sol.coefficients[j], residual_history[j], combined);
  sol.residual_norm = norm2(combined);
  return sol;
}

EigenDecomposition sym_eig(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("sym_eig: matrix is not square");
  const std::size_t n = a.rows();
  if (!a.all_finite()) throw NumericError("sym_eig: non-finite entry");
  const double amax = norm_inf(a.data());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-10 * std::max(1.0, amax))
        throw std::invalid_argument("sym_eig: matrix is not symmetric");

  DenseMatrix w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w(i, j) = 0.5 * (a(i, j) + a(j, i));
  DenseMatrix v = DenseMatrix::identity(n);
  const double anorm = w.frobenius_norm();

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += w(i, j) * w(i, j);
    return std::sqrt(s);
  };

  bool converged = anorm == 0.0;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    if (off_norm() < 1e-12 * anorm) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = w(p, q);
        if (apq == 0.0) continue;
        const double theta = (w(q, q) - w(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double wkp = w(k, p);
          const double wkq = w(k, q);
          w(k, p) = c * wkp - s * wkq;
          w(k, q) = s * wkp + c * wkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double wpk = w(p, k);
          const double wqk = w(q, k);
          w(p, k) = c * wpk - s * wqk;
          w(q, k) = s * wpk + c * wqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  if (!converged && off_norm() >= 1e-12 * anorm)
    throw NumericError("sym_eig: Jacobi rotations did not converge");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return w(i, i) < w(j, j); });

  EigenDecomposition out{Vector(n), DenseMatrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    out.eigenvalues[c] = w(src, src);
    double sign = 1.0;
    for (std::size_t k = 0; k < n; ++k)
      if (std::abs(v(k, src)) > 1e-10) {
        sign = v(k, src) < 0.0 ? -1.0 : 1.0;
        break;
      }
    for (std::size_t k = 0; k < n; ++k) out.eigenvectors(k, c) = sign * v(k, src);
  }
  return out;
}

Vector gmres_reference(const LinearOperator& apply, std::span<const double> b, std::size_t max_iters) {
  if (!all_finite(b)) throw NumericError("gmres_reference: non-finite right-hand side");
  const std::size_t n = b.size();
  const double beta = norm2(b);
  Vector history{beta};
  if (beta == 0.0) return history;

  std::vector<Vector> basis;
  basis.emplace_back(b.begin(), b.end());
  for (double& x : basis[0]) x /= beta;

  std::vector<Vector> h;  // h[k] is column k of the Hessenberg matrix (length k+2)
  Vector cs, sn;
  Vector g{beta};
  const double breakdown_tol = 1e-14 * beta;

  for (std::size_t k = 0; k < max_iters; ++k) {
    Vector w = apply(basis[k]);
    if (w.size() != n) throw std::invalid_argument("gmres_reference: operator changed dimension");
    Vector col(k + 2, 0.0);
    for (std::size_t i = 0; i <= k; ++i) {
      col[i] = dot(w, basis[i]);
      axpy(-col[i], basis[i], w);
    }
    col[k + 1] = norm2(w);

    for (std::size_t i = 0; i < k; ++i) {
      const double t = cs[i] * col[i] + sn[i] * col[i + 1];
      col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
      col[i] = t;
    }
    const double hkk = col[k];
    const double hk1 = col[k + 1];
    const double r = std::hypot(hkk, hk1);
    const double c = r == 0.0 ? 1.0 : hkk / r;
    const double s = r == 0.0 ? 0.0 : hk1 / r;
    cs.push_back(c);
    sn.push_back(s);
    col[k] = r;
    col[k + 1] = 0.0;
    h.push_back(std::move(col));

    g.push_back(-s * g[k]);
    g[k] = c * g[k];
    history.push_back(std::abs(g[k + 1]));

    if (hk1 <= breakdown_tol) break;
    for (double& x : w) x /= hk1;
    basis.push_back(std::move(w));
  }
  return history;
}

}  // namespace asyncfp::numkit
