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

#ifndef COREGP_CVTGP_HPP
#define COREGP_CVTGP_HPP

#include "coregp/gp_models.hpp"
#include "coregp/kernels.hpp"
#include "coregp/linalg.hpp"
#include "coregp/softplus.hpp"

namespace coregp {

/// Learnable coreset triplet: pseudo-inputs, pseudo-observations, and raw
/// per-point likelihood weights (beta = softplus(raw_weights) > 0).
struct Coreset {
  Matrix inputs;       // C x D
  Matrix outputs;      // C x 1
  Matrix raw_weights;  // C x 1

  int size() const { return inputs.rows; }
  Matrix beta() const;

  static Coreset from_weights(Matrix inputs, Matrix outputs, const Matrix& beta);
};

/// Sufficient statistics of the tempered coreset likelihood
/// q(y_C | f_C, beta) = Q_C N(y_C | f_C, Sigma_beta):
/// Sigma_beta = sigma2 diag(beta^{-1}) and the log normalizer
/// log Q_C = sum_c [ 1/2 ln(2 pi sigma2 / beta_c) - beta_c/2 ln(2 pi sigma2) ].
/// Q_C is only ever handled in log space.
struct TemperedStats {
  Matrix sigma_beta;  // C x C diagonal
  double log_q_c = 0.0;
};

TemperedStats weighted_likelihood_stats(const Coreset& cs, const KernelParams& kp);

/// log q(y_C | X_C, beta) = log Q_C + log N(y_C | 0, K_CC + Sigma_beta).
double coreset_marginal_loglik(const Coreset& cs, const KernelParams& kp);

/// Tempered posterior over f_C in the form that only ever factors
/// K_CC + Sigma_beta:
///   mean = K_CC (K_CC + Sigma_beta)^{-1} y_C
///   cov  = K_CC - K_CC (K_CC + Sigma_beta)^{-1} K_CC.
GaussianPosterior coreset_posterior(const Coreset& cs, const KernelParams& kp);

/// Same posterior through the information form
/// (K_CC^{-1} + Sigma_beta^{-1})^{-1}; the dual route kept for equivalence
/// checks, not for the training path.
GaussianPosterior coreset_posterior_information(const Coreset& cs, const KernelParams& kp);

/// Posterior over f(X_eval) after marginalizing the prior-conditional over
/// the coreset posterior:
///   mean = K_{X,C} (K_CC + Sigma_beta)^{-1} y_C
///   cov  = K_{X,X} - K_{X,C} (K_CC + Sigma_beta)^{-1} K_{C,X}.
GaussianPosterior coreset_conditional_posterior(const Matrix& x_eval, const Coreset& cs,
                                                const KernelParams& kp);

/// KL(q(f_C | X_C, y_C, beta) || p(f_C)), expanded so that the only factored
/// matrix is K_CC + Sigma_beta.
double cvtgp_kl(const Coreset& cs, const KernelParams& kp);

/// Full-batch lower bound on log p(y):
/// log N(y | m_{f|y_C}, sigma2 I) - tr{K_{f|y_C}} / (2 sigma2) - KL.
double cvtgp_bound_full(const Matrix& x, const Matrix& y, const Coreset& cs,
                        const KernelParams& kp);

/// Minibatch estimate: (n_total / B) * sum over the batch of the per-point
/// data terms, minus the (unscaled) KL. Equals the full bound at B = n_total.
double cvtgp_bound_minibatch(const Matrix& x_b, const Matrix& y_b, int n_total, const Coreset& cs,
                             const KernelParams& kp);

/// The same bound assembled from the pre-simplification route:
/// data term - E_q[log q(y_C | f_C, beta)] + log q(y_C | X_C, beta),
/// with the log Q_C terms carried explicitly (they cancel numerically).
double cvtgp_bound_alt(const Matrix& x, const Matrix& y, const Coreset& cs,
                       const KernelParams& kp);

/// Predictive mean and variance at x_star under the coreset posterior;
/// the variance includes the observation noise.
void cvtgp_predictive(const Matrix& x_star, const Coreset& cs, const KernelParams& kp,
                      Matrix& mean_out, Matrix& var_y_out);

}  // namespace coregp

#endif
