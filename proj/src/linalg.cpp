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

#include "coregp/linalg.hpp"

#include <cmath>
#include <cstdlib>

#include "coregp/errors.hpp"

namespace coregp {

Matrix::Matrix(int r, int c, double fill) : rows(r), cols(c), data(std::size_t(r) * c, fill) {}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(const std::vector<double>& v) {
  Matrix m(int(v.size()), 1);
  m.data = v;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(int(rows.size()), rows.size() ? int(rows.begin()->size()) : 0);
  int i = 0;
  for (const auto& r : rows) {
    if (int(r.size()) != m.cols) throw DimensionMismatch("ragged row in matrix literal");
    int j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

double Matrix::scalar() const {
  if (!is_scalar()) throw DimensionMismatch("scalar() on non 1x1 matrix");
  return data[0];
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("add: shape mismatch");
  Matrix c = a;
  for (int i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("sub: shape mismatch");
  Matrix c = a;
  for (int i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.data) v *= s;
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("hadamard: shape mismatch");
  Matrix c = a;
  for (int i = 0; i < c.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw DimensionMismatch("matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols, 0.0);
  // i-k-j order keeps the inner loop contiguous for row-major storage.
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[std::size_t(i) * a.cols];
    double* crow = &c.data[std::size_t(i) * c.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[std::size_t(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

double trace(const Matrix& a) {
  if (a.rows != a.cols) throw NonSquare("trace of non-square matrix");
  double t = 0.0;
  for (int i = 0; i < a.rows; ++i) t += a(i, i);
  return t;
}

double sum(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data) s += v;
  return s;
}

double dot(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("dot: shape mismatch");
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const Matrix& a) {
  for (double v : a.data)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix diag_matrix(const Matrix& v) {
  if (v.cols != 1) throw DimensionMismatch("diag_matrix expects a column");
  Matrix d(v.rows, v.rows);
  for (int i = 0; i < v.rows; ++i) d(i, i) = v(i, 0);
  return d;
}

Matrix diag_vector(const Matrix& a) {
  if (a.rows != a.cols) throw NonSquare("diag_vector of non-square matrix");
  Matrix v(a.rows, 1);
  for (int i = 0; i < a.rows; ++i) v(i, 0) = a(i, i);
  return v;
}

double default_base_jitter(const Matrix& a) {
  if (a.rows == 0) return 0.0;
  double mean_diag = 0.0;
  for (int i = 0; i < a.rows; ++i) mean_diag += std::abs(a(i, i));
  mean_diag /= a.rows;
  return 1e-8 * mean_diag;
}

namespace {

// In-place lower Cholesky of a symmetrized copy; false if a pivot fails.
bool try_factor(const Matrix& a, double jitter, Matrix& lower) {
  const int n = a.rows;
  lower = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = 0.5 * (a(i, j) + a(j, i));
      if (i == j) s += jitter;
      for (int k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) return false;
        lower(i, i) = std::sqrt(s);
      } else {
        lower(i, j) = s / lower(j, j);
      }
    }
  }
  return true;
}

}  // namespace

CholFactor cholesky(const Matrix& a, double base_jitter) {
  if (a.rows != a.cols) throw NonSquare("cholesky: matrix is not square");
  // Relative symmetry check; the factorization itself works on (A + A^T)/2.
  double asym = 0.0;
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < i; ++j) asym = std::max(asym, std::abs(a(i, j) - a(j, i)));
  if (asym > 1e-10 * std::max(1e-300, max_abs(a)))
    throw NonSymmetric("cholesky: matrix is not symmetric to tolerance");

  CholFactor f;
  double jitters[5] = {0.0, base_jitter, 10.0 * base_jitter, 100.0 * base_jitter,
                       1000.0 * base_jitter};
  for (int attempt = 0; attempt < 5; ++attempt) {
    if (attempt > 0 && jitters[attempt] <= jitters[attempt - 1]) continue;
    if (try_factor(a, jitters[attempt], f.lower)) {
      f.jitter_used = jitters[attempt];
      return f;
    }
    if (attempt == 0 && base_jitter <= 0.0) break;
  }
  throw NotPositiveDefinite("cholesky: factorization failed at maximum jitter");
}

Matrix solve_lower(const Matrix& l, const Matrix& b) {
  if (l.rows != b.rows) throw DimensionMismatch("solve_lower: row count mismatch");
  const int n = l.rows;
  const int m = b.cols;
  Matrix x = b;
  // Forward substitution over whole rows so the inner loop stays contiguous
  // for any number of right-hand sides.
  for (int i = 0; i < n; ++i) {
    double* xi = &x.data[std::size_t(i) * m];
    const double* li = &l.data[std::size_t(i) * n];
    for (int k = 0; k < i; ++k) {
      const double lik = li[k];
      if (lik == 0.0) continue;
      const double* xk = &x.data[std::size_t(k) * m];
      for (int c = 0; c < m; ++c) xi[c] -= lik * xk[c];
    }
    const double inv = 1.0 / li[i];
    for (int c = 0; c < m; ++c) xi[c] *= inv;
  }
  return x;
}

Matrix solve_lower_t(const Matrix& l, const Matrix& b) {
  if (l.rows != b.rows) throw DimensionMismatch("solve_lower_t: row count mismatch");
  const int n = l.rows;
  const int m = b.cols;
  Matrix x = b;
  // Right-looking back substitution for L^T X = B: once row i is final,
  // push its contribution up through column i of L.
  for (int i = n - 1; i >= 0; --i) {
    double* xi = &x.data[std::size_t(i) * m];
    const double* li = &l.data[std::size_t(i) * n];
    const double inv = 1.0 / li[i];
    for (int c = 0; c < m; ++c) xi[c] *= inv;
    for (int k = 0; k < i; ++k) {
      const double lik = li[k];
      if (lik == 0.0) continue;
      double* xk = &x.data[std::size_t(k) * m];
      for (int c = 0; c < m; ++c) xk[c] -= lik * xi[c];
    }
  }
  return x;
}

Matrix solve_psd(const CholFactor& f, const Matrix& b) {
  if (f.lower.rows != b.rows) throw DimensionMismatch("solve_psd: row count mismatch");
  return solve_lower_t(f.lower, solve_lower(f.lower, b));
}

double logdet_psd(const CholFactor& f) {
  double s = 0.0;
  for (int i = 0; i < f.lower.rows; ++i) s += std::log(f.lower(i, i));
  return 2.0 * s;
}

Matrix psd_inverse(const CholFactor& f) {
  // A^{-1} = W^T W with W = L^{-1}; both steps exploit the triangular
  // pattern, costing about n^3/3 instead of the n^3 of two full solves.
  const Matrix& l = f.lower;
  const int n = l.rows;
  Matrix w(n, n);
  for (int i = 0; i < n; ++i) {
    double* wi = &w.data[std::size_t(i) * n];
    const double* li = &l.data[std::size_t(i) * n];
    wi[i] = 1.0;
    for (int k = 0; k < i; ++k) {
      const double lik = li[k];
      if (lik == 0.0) continue;
      const double* wk = &w.data[std::size_t(k) * n];
      for (int c = 0; c <= k; ++c) wi[c] -= lik * wk[c];
    }
    const double inv_d = 1.0 / li[i];
    for (int c = 0; c <= i; ++c) wi[c] *= inv_d;
  }
  Matrix inv(n, n);
  for (int k = 0; k < n; ++k) {
    const double* wk = &w.data[std::size_t(k) * n];
    for (int i = 0; i <= k; ++i) {
      const double wki = wk[i];
      if (wki == 0.0) continue;
      double* invi = &inv.data[std::size_t(i) * n];
      for (int j = i; j <= k; ++j) invi[j] += wki * wk[j];
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) inv(i, j) = inv(j, i);
  return inv;
}

}  // namespace coregp
