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

#include "coregp/gp_models.hpp"

#include <cmath>
#include <numbers>

#include "coregp/errors.hpp"

namespace coregp {

namespace {
constexpr double kLn2Pi = 1.8378770664093454835606594728112353;

void symmetrize(Matrix& a) {
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < i; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
}
}  // namespace

double log_gaussian(const Matrix& x, const Matrix& mean, const CholFactor& f) {
  if (x.cols != 1 || !x.same_shape(mean)) throw DimensionMismatch("log_gaussian: shape mismatch");
  Matrix r = x - mean;
  const double quad = dot(r, solve_psd(f, r));
  return -0.5 * x.rows * kLn2Pi - 0.5 * logdet_psd(f) - 0.5 * quad;
}

double exact_log_marginal(const Matrix& x, const Matrix& y, const KernelParams& kp) {
  if (x.rows != y.rows || y.cols != 1) throw DimensionMismatch("exact_log_marginal: shapes");
  Matrix a = rbf_matrix(x, x, kp);
  const double s2n = kp.noise_variance();
  for (int i = 0; i < a.rows; ++i) a(i, i) += s2n;
  return log_gaussian(y, Matrix(y.rows, 1), cholesky(a));
}

Predictive exact_posterior_predictive(const Matrix& x_star, const Matrix& x, const Matrix& y,
                                      const KernelParams& kp) {
  if (x_star.cols != x.cols) throw DimensionMismatch("predictive: feature dimensions differ");
  Matrix a = rbf_matrix(x, x, kp);
  const double s2n = kp.noise_variance();
  for (int i = 0; i < a.rows; ++i) a(i, i) += s2n;
  CholFactor f = cholesky(a);

  Matrix k_sx = rbf_matrix(x_star, x, kp);
  Matrix alpha = solve_psd(f, y);
  Matrix v = solve_psd(f, transpose(k_sx));

  Predictive out;
  out.f.mean = matmul(k_sx, alpha);
  out.f.cov = rbf_matrix(x_star, x_star, kp) - matmul(k_sx, v);
  symmetrize(out.f.cov);
  out.var_y = Matrix(x_star.rows, 1);
  for (int i = 0; i < x_star.rows; ++i) out.var_y(i, 0) = out.f.cov(i, i) + s2n;
  return out;
}

double titsias_bound(const Matrix& x, const Matrix& y, const Matrix& x_m,
                     const KernelParams& kp) {
  const int n = x.rows;
  Matrix k_mm = rbf_matrix(x_m, x_m, kp);
  Matrix k_xm = rbf_matrix(x, x_m, kp);
  CholFactor f_m = cholesky(k_mm);
  Matrix t = solve_psd(f_m, transpose(k_xm));  // K_MM^{-1} K_MX

  Matrix q = matmul(k_xm, t);
  const double s2n = kp.noise_variance();
  for (int i = 0; i < n; ++i) q(i, i) += s2n;
  symmetrize(q);
  const double ll = log_gaussian(y, Matrix(n, 1), cholesky(q));

  // tr{K_XX - Q} with Q the Nystrom approximation; K_XX has a constant
  // s2 diagonal under the stationary kernel.
  const double tr_gap = n * kp.outputscale() - sum(hadamard(k_xm, transpose(t)));
  return ll - tr_gap / (2.0 * s2n);
}

double gaussian_kl_full(const Matrix& m, const Matrix& l_s, const CholFactor& k_factor) {
  const int dim = m.rows;
  if (l_s.rows != dim || l_s.cols != dim) throw DimensionMismatch("gaussian_kl_full: shapes");
  const double tr_ks = sum(hadamard(solve_psd(k_factor, l_s), l_s));
  const double quad = dot(m, solve_psd(k_factor, m));
  double logdet_s = 0.0;
  for (int i = 0; i < dim; ++i) logdet_s += std::log(l_s(i, i));
  logdet_s *= 2.0;
  return 0.5 * (tr_ks - dim + quad + logdet_psd(k_factor) - logdet_s);
}

double svgp_bound(const Matrix& x_b, const Matrix& y_b, const InducingVariational& iv,
                  const KernelParams& kp, int n_total) {
  const int batch = x_b.rows;
  if (batch < 1 || n_total < batch) throw DimensionMismatch("svgp_bound: bad batch size");

  Matrix k_mm = rbf_matrix(iv.inputs, iv.inputs, kp);
  CholFactor f_m = cholesky(k_mm);
  Matrix k_bm = rbf_matrix(x_b, iv.inputs, kp);
  Matrix t = solve_psd(f_m, transpose(k_bm));  // M x B

  Matrix mean_b = matmul(transpose(t), iv.mean);
  const double s2 = kp.outputscale();
  const double s2n = kp.noise_variance();

  double quad = 0.0;
  for (int i = 0; i < batch; ++i) {
    const double r = y_b(i, 0) - mean_b(i, 0);
    quad += r * r;
  }
  const double ll = -0.5 * batch * (kLn2Pi + std::log(s2n)) - quad / (2.0 * s2n);

  const double tr_gap = batch * s2 - sum(hadamard(k_bm, transpose(t)));
  Matrix u = matmul(transpose(iv.cov_factor), t);
  const double tr_s = sum(hadamard(u, u));

  const double data = (double(n_total) / batch) * (ll - (tr_gap + tr_s) / (2.0 * s2n));
  return data - gaussian_kl_full(iv.mean, iv.cov_factor, f_m);
}

void titsias_predict(const Matrix& x_star, const Matrix& x, const Matrix& y, const Matrix& x_m,
                     const KernelParams& kp, Matrix& mean_out, Matrix& var_y_out) {
  const double s2n = kp.noise_variance();
  Matrix k_mm = rbf_matrix(x_m, x_m, kp);
  Matrix k_mx = rbf_matrix(x_m, x, kp);
  Matrix b = s2n * k_mm + matmul(k_mx, transpose(k_mx));
  symmetrize(b);
  CholFactor f_b = cholesky(b);
  CholFactor f_m = cholesky(k_mm);

  Matrix k_sm = rbf_matrix(x_star, x_m, kp);
  mean_out = matmul(k_sm, solve_psd(f_b, matmul(k_mx, y)));

  Matrix v_m = solve_psd(f_m, transpose(k_sm));
  Matrix v_b = solve_psd(f_b, transpose(k_sm));
  var_y_out = Matrix(x_star.rows, 1);
  const double s2 = kp.outputscale();
  for (int i = 0; i < x_star.rows; ++i) {
    double nystrom = 0.0, sigma_part = 0.0;
    for (int j = 0; j < x_m.rows; ++j) {
      nystrom += k_sm(i, j) * v_m(j, i);
      sigma_part += k_sm(i, j) * v_b(j, i);
    }
    var_y_out(i, 0) = s2 - nystrom + s2n * sigma_part + s2n;
  }
}

void svgp_predict(const Matrix& x_star, const InducingVariational& iv, const KernelParams& kp,
                  Matrix& mean_out, Matrix& var_y_out) {
  Matrix k_mm = rbf_matrix(iv.inputs, iv.inputs, kp);
  CholFactor f_m = cholesky(k_mm);
  Matrix k_sm = rbf_matrix(x_star, iv.inputs, kp);
  Matrix t = solve_psd(f_m, transpose(k_sm));  // M x n*

  mean_out = matmul(transpose(t), iv.mean);
  Matrix u = matmul(transpose(iv.cov_factor), t);  // M x n*
  var_y_out = Matrix(x_star.rows, 1);
  const double s2 = kp.outputscale();
  const double s2n = kp.noise_variance();
  for (int i = 0; i < x_star.rows; ++i) {
    double nystrom = 0.0, s_part = 0.0;
    for (int j = 0; j < iv.inputs.rows; ++j) {
      nystrom += k_sm(i, j) * t(j, i);
      s_part += u(j, i) * u(j, i);
    }
    var_y_out(i, 0) = s2 - nystrom + s_part + s2n;
  }
}

}  // namespace coregp
