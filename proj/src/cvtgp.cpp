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

#include "coregp/cvtgp.hpp"

#include <cmath>

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

// Shared pieces of the bound and KL; everything flows through a single
// factorization of A = K_CC + Sigma_beta.
struct CoresetParts {
  Matrix k_cc;            // C x C prior covariance
  Matrix sigma_beta_vec;  // C x 1 diagonal of Sigma_beta
  CholFactor f_a;         // factor of K_CC + Sigma_beta
  Matrix alpha;           // (K_CC + Sigma_beta)^{-1} y_C
  double log_sigma_beta = 0.0;
};

CoresetParts make_parts(const Coreset& cs, const KernelParams& kp) {
  CoresetParts p;
  p.k_cc = rbf_matrix(cs.inputs, cs.inputs, kp);
  const Matrix beta = cs.beta();
  const double s2n = kp.noise_variance();
  p.sigma_beta_vec = Matrix(cs.size(), 1);
  Matrix a = p.k_cc;
  for (int c = 0; c < cs.size(); ++c) {
    const double v = s2n / beta(c, 0);
    p.sigma_beta_vec(c, 0) = v;
    a(c, c) += v;
    p.log_sigma_beta += std::log(v);
  }
  p.f_a = cholesky(a);
  p.alpha = solve_psd(p.f_a, cs.outputs);
  return p;
}

double kl_from_parts(const CoresetParts& p) {
  const Matrix t = solve_psd(p.f_a, p.k_cc);  // A^{-1} K_CC
  const double quad = dot(p.alpha, matmul(p.k_cc, p.alpha));
  return 0.5 * (-trace(t) + quad + logdet_psd(p.f_a) - p.log_sigma_beta);
}

// Per-point data terms for a batch: sum_i [ log N(y_i | m_i, sigma2)
// - k_{f_i,f_i|y_C} / (2 sigma2) ].
double batch_data_term(const Matrix& x_b, const Matrix& y_b, const CoresetParts& p,
                       const Coreset& cs, const KernelParams& kp) {
  const Matrix k_bc = rbf_matrix(x_b, cs.inputs, kp);
  const Matrix t = solve_psd(p.f_a, transpose(k_bc));  // C x B
  const double s2 = kp.outputscale();
  const double s2n = kp.noise_variance();
  double total = 0.0;
  for (int i = 0; i < x_b.rows; ++i) {
    double mean = 0.0, nystrom = 0.0;
    for (int c = 0; c < cs.size(); ++c) {
      mean += k_bc(i, c) * p.alpha(c, 0);
      nystrom += k_bc(i, c) * t(c, i);
    }
    const double r = y_b(i, 0) - mean;
    const double var_f = s2 - nystrom;
    total += -0.5 * (kLn2Pi + std::log(s2n)) - (r * r) / (2.0 * s2n) - var_f / (2.0 * s2n);
  }
  return total;
}

}  // namespace

Matrix Coreset::beta() const {
  Matrix b = raw_weights;
  for (double& v : b.data) v = softplus(v);
  return b;
}

Coreset Coreset::from_weights(Matrix inputs, Matrix outputs, const Matrix& beta) {
  Coreset cs;
  cs.inputs = std::move(inputs);
  cs.outputs = std::move(outputs);
  cs.raw_weights = beta;
  for (double& v : cs.raw_weights.data) v = softplus_inverse(v);
  return cs;
}

TemperedStats weighted_likelihood_stats(const Coreset& cs, const KernelParams& kp) {
  const Matrix beta = cs.beta();
  const double s2n = kp.noise_variance();
  const double ln_2pi_s2n = kLn2Pi + std::log(s2n);
  TemperedStats st;
  st.sigma_beta = Matrix(cs.size(), cs.size());
  st.log_q_c = 0.0;
  for (int c = 0; c < cs.size(); ++c) {
    const double b = beta(c, 0);
    st.sigma_beta(c, c) = s2n / b;
    st.log_q_c += 0.5 * (ln_2pi_s2n - std::log(b)) - 0.5 * b * ln_2pi_s2n;
  }
  return st;
}

double coreset_marginal_loglik(const Coreset& cs, const KernelParams& kp) {
  const TemperedStats st = weighted_likelihood_stats(cs, kp);
  Matrix a = rbf_matrix(cs.inputs, cs.inputs, kp) + st.sigma_beta;
  return st.log_q_c + log_gaussian(cs.outputs, Matrix(cs.size(), 1), cholesky(a));
}

GaussianPosterior coreset_posterior(const Coreset& cs, const KernelParams& kp) {
  const CoresetParts p = make_parts(cs, kp);
  GaussianPosterior post;
  post.mean = matmul(p.k_cc, p.alpha);
  post.cov = p.k_cc - matmul(p.k_cc, solve_psd(p.f_a, p.k_cc));
  symmetrize(post.cov);
  return post;
}

GaussianPosterior coreset_posterior_information(const Coreset& cs, const KernelParams& kp) {
  const Matrix k_cc = rbf_matrix(cs.inputs, cs.inputs, kp);
  const Matrix beta = cs.beta();
  const double s2n = kp.noise_variance();

  Matrix precision = psd_inverse(cholesky(k_cc));
  Matrix weighted_y(cs.size(), 1);
  for (int c = 0; c < cs.size(); ++c) {
    const double inv_sb = beta(c, 0) / s2n;  // Sigma_beta^{-1} diagonal
    precision(c, c) += inv_sb;
    weighted_y(c, 0) = inv_sb * cs.outputs(c, 0);
  }
  CholFactor f_p = cholesky(precision);
  GaussianPosterior post;
  post.cov = psd_inverse(f_p);
  post.mean = solve_psd(f_p, weighted_y);
  return post;
}

GaussianPosterior coreset_conditional_posterior(const Matrix& x_eval, const Coreset& cs,
                                                const KernelParams& kp) {
  if (x_eval.cols != cs.inputs.cols)
    throw DimensionMismatch("coreset_conditional_posterior: feature dimensions differ");
  const CoresetParts p = make_parts(cs, kp);
  const Matrix k_xc = rbf_matrix(x_eval, cs.inputs, kp);
  GaussianPosterior post;
  post.mean = matmul(k_xc, p.alpha);
  post.cov = rbf_matrix(x_eval, x_eval, kp) - matmul(k_xc, solve_psd(p.f_a, transpose(k_xc)));
  symmetrize(post.cov);
  return post;
}

double cvtgp_kl(const Coreset& cs, const KernelParams& kp) {
  const CoresetParts p = make_parts(cs, kp);
  return kl_from_parts(p);
}

double cvtgp_bound_full(const Matrix& x, const Matrix& y, const Coreset& cs,
                        const KernelParams& kp) {
  if (x.rows != y.rows || y.cols != 1) throw DimensionMismatch("cvtgp_bound_full: shapes");
  const int n = x.rows;
  const CoresetParts p = make_parts(cs, kp);

  const Matrix k_xc = rbf_matrix(x, cs.inputs, kp);
  const Matrix mean = matmul(k_xc, p.alpha);
  const double s2n = kp.noise_variance();
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = y(i, 0) - mean(i, 0);
    quad += r * r;
  }
  const double ll = -0.5 * n * (kLn2Pi + std::log(s2n)) - quad / (2.0 * s2n);

  const Matrix t = solve_psd(p.f_a, transpose(k_xc));
  const double tr_f = n * kp.outputscale() - sum(hadamard(k_xc, transpose(t)));

  return ll - tr_f / (2.0 * s2n) - kl_from_parts(p);
}

double cvtgp_bound_minibatch(const Matrix& x_b, const Matrix& y_b, int n_total, const Coreset& cs,
                             const KernelParams& kp) {
  const int batch = x_b.rows;
  if (batch < 1 || n_total < batch) throw DimensionMismatch("cvtgp_bound_minibatch: batch size");
  const CoresetParts p = make_parts(cs, kp);
  const double data = batch_data_term(x_b, y_b, p, cs, kp);
  return (double(n_total) / batch) * data - kl_from_parts(p);
}

double cvtgp_bound_alt(const Matrix& x, const Matrix& y, const Coreset& cs,
                       const KernelParams& kp) {
  const int n = x.rows;
  const int c_sz = cs.size();
  const CoresetParts p = make_parts(cs, kp);
  const TemperedStats st = weighted_likelihood_stats(cs, kp);

  // Expected data log-likelihood, as in the primary assembly.
  const Matrix k_xc = rbf_matrix(x, cs.inputs, kp);
  const Matrix mean = matmul(k_xc, p.alpha);
  const double s2n = kp.noise_variance();
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = y(i, 0) - mean(i, 0);
    quad += r * r;
  }
  const double ll = -0.5 * n * (kLn2Pi + std::log(s2n)) - quad / (2.0 * s2n);
  const Matrix t_x = solve_psd(p.f_a, transpose(k_xc));
  const double tr_f = n * kp.outputscale() - sum(hadamard(k_xc, transpose(t_x)));
  const double data_term = ll - tr_f / (2.0 * s2n);

  // E_q[log q(y_C | f_C, beta)] around the posterior moments of f_C.
  const Matrix t_cc = solve_psd(p.f_a, p.k_cc);
  const Matrix m_fc = matmul(p.k_cc, p.alpha);
  Matrix k_fc = p.k_cc - matmul(p.k_cc, t_cc);
  symmetrize(k_fc);

  double log_n_diag = -0.5 * c_sz * kLn2Pi - 0.5 * p.log_sigma_beta;
  double tr_scaled = 0.0;
  for (int c = 0; c < c_sz; ++c) {
    const double r = cs.outputs(c, 0) - m_fc(c, 0);
    const double sb = p.sigma_beta_vec(c, 0);
    log_n_diag -= 0.5 * (r * r) / sb;
    tr_scaled += k_fc(c, c) / sb;
  }
  const double expected_coreset_ll = st.log_q_c + log_n_diag - 0.5 * tr_scaled;

  // log q(y_C | X_C, beta): the marginal over pseudo-observations. The two
  // log Q_C contributions cancel in exact arithmetic; both are kept.
  const double marginal =
      st.log_q_c + log_gaussian(cs.outputs, Matrix(c_sz, 1), p.f_a);

  return data_term - expected_coreset_ll + marginal;
}

void cvtgp_predictive(const Matrix& x_star, const Coreset& cs, const KernelParams& kp,
                      Matrix& mean_out, Matrix& var_y_out) {
  if (x_star.cols != cs.inputs.cols)
    throw DimensionMismatch("cvtgp_predictive: feature dimensions differ");
  const CoresetParts p = make_parts(cs, kp);
  const Matrix k_sc = rbf_matrix(x_star, cs.inputs, kp);
  const Matrix t = solve_psd(p.f_a, transpose(k_sc));
  mean_out = matmul(k_sc, p.alpha);
  var_y_out = Matrix(x_star.rows, 1);
  const double s2 = kp.outputscale();
  const double s2n = kp.noise_variance();
  for (int i = 0; i < x_star.rows; ++i) {
    double nystrom = 0.0;
    for (int c = 0; c < cs.size(); ++c) nystrom += k_sc(i, c) * t(c, i);
    var_y_out(i, 0) = s2 - nystrom + s2n;
  }
}

}  // namespace coregp
