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

#ifndef COREGP_PARAMS_HPP
#define COREGP_PARAMS_HPP

#include <string>
#include <vector>

#include "coregp/errors.hpp"
#include "coregp/linalg.hpp"

namespace coregp {

// Canonical segment names shared by the models.
namespace seg {
inline constexpr const char* kernel = "kernel";
inline constexpr const char* noise = "noise";
inline constexpr const char* coreset_inputs = "coreset_inputs";
inline constexpr const char* coreset_outputs = "coreset_outputs";
inline constexpr const char* coreset_weights = "coreset_weights";
inline constexpr const char* inducing = "inducing";
inline constexpr const char* variational_mean = "variational_mean";
inline constexpr const char* variational_cov_factor = "variational_cov_factor";
}  // namespace seg

struct SegmentSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  int len() const { return rows * cols; }
};

/// Flat vector of raw (unconstrained) parameters partitioned into named,
/// shaped segments. Segment contents are row-major slices of `values`.
struct ParamVector {
  std::vector<SegmentSpec> segments;
  std::vector<double> values;

  ParamVector() = default;
  explicit ParamVector(std::vector<SegmentSpec> segs);

  int total() const { return int(values.size()); }
  bool has(const std::string& name) const;
  int offset(const std::string& name) const;
  const SegmentSpec& spec(const std::string& name) const;

  Matrix segment_matrix(const std::string& name) const;
  void set_segment(const std::string& name, const Matrix& m);

  /// Same segment layout, all values zero.
  ParamVector zeros_like() const;
};

}  // namespace coregp

#endif
