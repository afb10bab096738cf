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

#include "coregp/kernels.hpp"

#include <cmath>

#include "coregp/errors.hpp"

namespace coregp {

Matrix rbf_matrix(const Matrix& a, const Matrix& b, const KernelParams& kp) {
  if (a.cols != b.cols) throw DimensionMismatch("rbf_matrix: feature dimensions differ");
  const double s2 = kp.outputscale();
  const double l = kp.lengthscale();
  const double inv_2l2 = 1.0 / (2.0 * l * l);
  Matrix k(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = &a.data[std::size_t(i) * a.cols];
    for (int j = 0; j < b.rows; ++j) {
      const double* bj = &b.data[std::size_t(j) * b.cols];
      double d2 = 0.0;
      for (int d = 0; d < a.cols; ++d) {
        const double diff = ai[d] - bj[d];
        d2 += diff * diff;
      }
      k(i, j) = s2 * std::exp(-d2 * inv_2l2);
    }
  }
  return k;
}

Matrix rbf_diag(const Matrix& a, const KernelParams& kp) {
  return Matrix(a.rows, 1, kp.outputscale());
}

}  // namespace coregp
