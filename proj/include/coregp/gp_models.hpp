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

#ifndef COREGP_GP_MODELS_HPP
#define COREGP_GP_MODELS_HPP

#include "coregp/kernels.hpp"
#include "coregp/linalg.hpp"

namespace coregp {

/// Moments of a multivariate normal over function values.
struct GaussianPosterior {
  Matrix mean;  // n x 1
  Matrix cov;   // n x n, symmetric PSD to jitter tolerance
};

/// Free-form variational family q(f_M) = N(m, S) with S = L L^T. The factor
/// must be lower-triangular with a strictly positive diagonal; training
/// enforces this through a softplus map on the raw diagonal entries.
struct InducingVariational {
  Matrix inputs;      // M x D
  Matrix mean;        // M x 1
  Matrix cov_factor;  // M x M lower-triangular

  Matrix cov() const { return matmul(cov_factor, transpose(cov_factor)); }
};

/// log N(x | mean, A) where f factors A (including any jitter).
double log_gaussian(const Matrix& x, const Matrix& mean, const CholFactor& f);

/// log N(y | 0, sigma2 I + K_XX).
double exact_log_marginal(const Matrix& x, const Matrix& y, const KernelParams& kp);

struct Predictive {
  GaussianPosterior f;  // posterior over function values at the query points
  Matrix var_y;         // n x 1 predictive variances (function variance + noise)
};

/// Closed-form GP posterior at x_star given training data.
Predictive exact_posterior_predictive(const Matrix& x_star, const Matrix& x, const Matrix& y,
                                      const KernelParams& kp);

/// Collapsed variational bound for the inducing-point family:
/// log N(y | 0, sigma2 I + K_XM K_MM^{-1} K_MX)
///   - 1/(2 sigma2) tr{K_XX - K_XM K_MM^{-1} K_MX}.
double titsias_bound(const Matrix& x, const Matrix& y, const Matrix& x_m, const KernelParams& kp);

/// Stochastic bound with an explicit q(f_M) = N(m, S); the per-point data
/// terms are rescaled by n_total / batch, the KL is never rescaled.
double svgp_bound(const Matrix& x_b, const Matrix& y_b, const InducingVariational& iv,
                  const KernelParams& kp, int n_total);

/// KL(N(m, L_S L_S^T) || N(0, K)) given a factor of K.
double gaussian_kl_full(const Matrix& m, const Matrix& l_s, const CholFactor& k_factor);

/// Predictive mean / variance for the collapsed model at its optimal q(f_M).
void titsias_predict(const Matrix& x_star, const Matrix& x, const Matrix& y, const Matrix& x_m,
                     const KernelParams& kp, Matrix& mean_out, Matrix& var_y_out);

/// Predictive mean / variance under an explicit q(f_M).
void svgp_predict(const Matrix& x_star, const InducingVariational& iv, const KernelParams& kp,
                  Matrix& mean_out, Matrix& var_y_out);

}  // namespace coregp

#endif
