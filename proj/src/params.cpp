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

#include "coregp/params.hpp"

namespace coregp {

ParamVector::ParamVector(std::vector<SegmentSpec> segs) : segments(std::move(segs)) {
  int total = 0;
  for (const auto& s : segments) total += s.len();
  values.assign(std::size_t(total), 0.0);
}

bool ParamVector::has(const std::string& name) const {
  for (const auto& s : segments)
    if (s.name == name) return true;
  return false;
}

int ParamVector::offset(const std::string& name) const {
  int off = 0;
  for (const auto& s : segments) {
    if (s.name == name) return off;
    off += s.len();
  }
  throw DimensionMismatch("unknown parameter segment: " + name);
}

const SegmentSpec& ParamVector::spec(const std::string& name) const {
  for (const auto& s : segments)
    if (s.name == name) return s;
  throw DimensionMismatch("unknown parameter segment: " + name);
}

Matrix ParamVector::segment_matrix(const std::string& name) const {
  const SegmentSpec& s = spec(name);
  const int off = offset(name);
  Matrix m(s.rows, s.cols);
  for (int i = 0; i < s.len(); ++i) m.data[std::size_t(i)] = values[std::size_t(off + i)];
  return m;
}

void ParamVector::set_segment(const std::string& name, const Matrix& m) {
  const SegmentSpec& s = spec(name);
  if (m.rows != s.rows || m.cols != s.cols)
    throw DimensionMismatch("set_segment: shape mismatch for " + name);
  const int off = offset(name);
  for (int i = 0; i < s.len(); ++i) values[std::size_t(off + i)] = m.data[std::size_t(i)];
}

ParamVector ParamVector::zeros_like() const {
  ParamVector z;
  z.segments = segments;
  z.values.assign(values.size(), 0.0);
  return z;
}

}  // namespace coregp
