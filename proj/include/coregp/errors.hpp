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

#ifndef COREGP_ERRORS_HPP
#define COREGP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace coregp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear algebra
struct NonSquare : Error {
  using Error::Error;
};
struct NonSymmetric : Error {
  using Error::Error;
};
struct NotPositiveDefinite : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};

// Autodiff
struct UnsupportedPrimitive : Error {
  using Error::Error;
};
struct NonFiniteLoss : Error {
  using Error::Error;
};

// Training
struct NonFiniteGradient : Error {
  using Error::Error;
};
struct InverseOfNonPositive : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};

// Data pipeline
struct InvalidId : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct MissingColumn : Error {
  using Error::Error;
};
struct NonNumericCell : Error {
  using Error::Error;
};
struct ConstantColumn : Error {
  using Error::Error;
};
struct TooFewRows : Error {
  using Error::Error;
};
struct KTooLarge : Error {
  using Error::Error;
};

// Experiment orchestration
struct IoError : Error {
  using Error::Error;
};

}  // namespace coregp

#endif
