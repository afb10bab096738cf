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

#ifndef COREGP_SOFTPLUS_HPP
#define COREGP_SOFTPLUS_HPP

#include <cmath>

#include "coregp/errors.hpp"

namespace coregp {

/// softplus(x) = ln(1 + e^x), evaluated as max(x,0) + log1p(e^-|x|) so the
/// exponential never overflows.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

/// Inverse of softplus. Requires y > 0.
inline double softplus_inverse(double y) {
  if (!(y > 0.0)) throw InverseOfNonPositive("softplus_inverse requires a positive argument");
  // ln(e^y - 1); for large y the expm1 form overflows, so switch to
  // y + log1p(-e^-y) which is exact in that regime.
  if (y > 30.0) return y + std::log1p(-std::exp(-y));
  return std::log(std::expm1(y));
}

/// d softplus / dx.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace coregp

#endif
