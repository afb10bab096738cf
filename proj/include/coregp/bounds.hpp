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

#ifndef COREGP_BOUNDS_HPP
#define COREGP_BOUNDS_HPP

#include <optional>

#include "coregp/autodiff.hpp"
#include "coregp/linalg.hpp"

namespace coregp::bounds {

// Differentiable versions of the model objectives, written against the tape
// primitives so one reverse pass yields gradients for every raw parameter
// segment. Data always enters as tape constants. Every builder expects the
// "kernel" (2x1 raw: lengthscale, outputscale) and "noise" (1x1 raw)
// segments; the rest are listed per builder.

/// Exact log-marginal likelihood of (x, y).
ad::LossBuilder exact_loss(Matrix x, Matrix y);

/// Collapsed inducing-point bound. Uses the "inducing" (M x D) segment when
/// the layout provides it, otherwise the fixed inducing inputs.
ad::LossBuilder titsias_loss(Matrix x, Matrix y,
                             std::optional<Matrix> fixed_inducing = std::nullopt);

/// Stochastic bound over a batch; segments "inducing" (M x D),
/// "variational_mean" (M x 1) and "variational_cov_factor"
/// (M(M+1)/2 x 1 packed rows, softplus applied to the diagonal).
ad::LossBuilder svgp_loss(Matrix x_b, Matrix y_b, int n_total);

/// Coreset bound over a batch (the full bound at batch == n_total);
/// segments "coreset_inputs" (C x D), "coreset_outputs" (C x 1),
/// "coreset_weights" (C x 1 raw).
ad::LossBuilder cvtgp_loss(Matrix x_b, Matrix y_b, int n_total);

/// Pre-simplification assembly of the coreset bound; same segments as
/// cvtgp_loss, full batch only.
ad::LossBuilder cvtgp_alt_loss(Matrix x, Matrix y);

}  // namespace coregp::bounds

#endif
