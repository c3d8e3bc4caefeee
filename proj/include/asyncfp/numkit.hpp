// SPDX-License-Identifier: Apache-2.0

// Small dense linear algebra used by the accelerator and the SCF problem:
// constrained least squares for the extrapolation weights, a cyclic Jacobi
// symmetric eigensolver, and a full-memory GMRES used as a reference oracle.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace asyncfp {

using Vector = std::vector<double>;

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace numkit {

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, Vector data);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const Vector& values() const { return data_; }

  DenseMatrix transpose() const;
  double frobenius_norm() const;
  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& a);
Vector operator*(const DenseMatrix& a, std::span<const double> x);

// Vector helpers shared across modules.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
bool all_finite(std::span<const double> a);
/// y += s * x
void axpy(double s, std::span<const double> x, std::span<double> y);

struct LsSolution {
  Vector coefficients;  // sum to one, oldest first
  double residual_norm = 0.0;
  std::size_t dropped_columns = 0;
};

/// Condition threshold above which the oldest difference column is dropped.
inline constexpr double kLsConditionLimit = 1e12;

/// Minimizes ||sum_j a_j r_j||_2 subject to sum_j a_j = 1 over the given
/// residuals (oldest first). Solved as an unconstrained problem on
/// consecutive differences with Householder QR; `regularization` adds a
/// Tikhonov term on the difference coefficients.
LsSolution solve_constrained_ls(std::span<const Vector> residual_history,
                                double regularization = 0.0);

/// Singular values of a small dense matrix (one-sided Jacobi), descending.
Vector singular_values(const DenseMatrix& a);

struct EigenDecomposition {
  Vector eigenvalues;        // ascending
  DenseMatrix eigenvectors;  // column i pairs with eigenvalues[i]
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Each eigenvector has
/// its first non-negligible component positive.
EigenDecomposition sym_eig(const DenseMatrix& a);

using LinearOperator = std::function<Vector(std::span<const double>)>;

/// Full-memory GMRES from x0 = 0. Returns ||b - A x_k||_2 for k = 0, 1, ...
/// Stops early on breakdown (the history then ends with the exact residual).
Vector gmres_reference(const LinearOperator& apply, std::span<const double> b,
                       std::size_t max_iters);

}  // namespace numkit
}  // namespace asyncfp
