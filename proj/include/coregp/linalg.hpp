// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#ifndef COREGP_LINALG_HPP
#define COREGP_LINALG_HPP

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace coregp {

/// Dense row-major matrix. Column vectors are n x 1 matrices throughout.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0);

  static Matrix identity(int n);
  static Matrix column(const std::vector<double>& v);
  static Matrix constant(int r, int c, double v) { return Matrix(r, c, v); }
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& operator()(int i, int j) { return data[std::size_t(i) * cols + j]; }
  double operator()(int i, int j) const { return data[std::size_t(i) * cols + j]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  int size() const { return rows * cols; }
  double scalar() const;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
double trace(const Matrix& a);
double sum(const Matrix& a);
double dot(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);
bool all_finite(const Matrix& a);

/// C x C diagonal matrix from a C x 1 column.
Matrix diag_matrix(const Matrix& v);
/// n x 1 column holding the diagonal of a square matrix.
Matrix diag_vector(const Matrix& a);

/// Lower-triangular Cholesky factor of A + jitter_used * I.
struct CholFactor {
  Matrix lower;
  double jitter_used = 0.0;
};

/// Default jitter policy: 1e-8 times the mean diagonal magnitude.
double default_base_jitter(const Matrix& a);

/// Factor a symmetric positive definite matrix, escalating jitter through
/// base_jitter * {1, 10, 100, 1000} after an initial jitter-free attempt.
/// Throws NonSquare, NonSymmetric, or NotPositiveDefinite.
CholFactor cholesky(const Matrix& a, double base_jitter);

inline CholFactor cholesky(const Matrix& a) { return cholesky(a, default_base_jitter(a)); }

/// Solve (L L^T) X = B.
Matrix solve_psd(const CholFactor& f, const Matrix& b);

/// log det(A + jitter * I) = 2 sum_i log L_ii.
double logdet_psd(const CholFactor& f);

/// Triangular solves L X = B and L^T X = B.
Matrix solve_lower(const Matrix& l, const Matrix& b);
Matrix solve_lower_t(const Matrix& l, const Matrix& b);

/// Full inverse from a factor; used by logdet adjoints.
Matrix psd_inverse(const CholFactor& f);

}  // namespace coregp

#endif
