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

#ifndef COREGP_KERNELS_HPP
#define COREGP_KERNELS_HPP

#include "coregp/linalg.hpp"
#include "coregp/softplus.hpp"

namespace coregp {

/// RBF kernel hyperparameters plus observation noise, stored unconstrained.
/// The positive values are softplus maps of the raw fields: a single scalar
/// lengthscale l, the output scale s2 (the kernel's k(x,x)), and the noise
/// variance sigma2.
struct KernelParams {
  double raw_lengthscale = 0.0;
  double raw_outputscale = 0.0;
  double raw_noise = 0.0;

  double lengthscale() const { return softplus(raw_lengthscale); }
  double outputscale() const { return softplus(raw_outputscale); }
  double noise_variance() const { return softplus(raw_noise); }

  static KernelParams from_constrained(double lengthscale, double outputscale,
                                       double noise_variance) {
    return {softplus_inverse(lengthscale), softplus_inverse(outputscale),
            softplus_inverse(noise_variance)};
  }
};

/// k(a, b) = s2 * exp(-||a - b||^2 / (2 l^2)) for every row pair, giving an
/// N x M matrix. A and B must share the feature dimension.
Matrix rbf_matrix(const Matrix& a, const Matrix& b, const KernelParams& kp);

/// Diagonal of rbf_matrix(a, a, kp): a constant s2 column for the stationary
/// RBF kernel.
Matrix rbf_diag(const Matrix& a, const KernelParams& kp);

}  // namespace coregp

#endif
