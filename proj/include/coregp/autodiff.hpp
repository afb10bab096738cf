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

#ifndef COREGP_AUTODIFF_HPP
#define COREGP_AUTODIFF_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coregp/linalg.hpp"
#include "coregp/params.hpp"

namespace coregp::ad {

enum class Op {
  Constant,
  Leaf,
  Add,
  Sub,
  Mul,
  MatMul,
  Transpose,
  CholSolve,
  LogDet,
  Exp,
  Ln,
  Softplus,
  Sum,
  Trace,
  ScatterLower,
};

class Tape;

/// Handle to a tape node. Cheap to copy; valid for the tape's lifetime.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

/// Record of matrix operations with eagerly computed forward values.
/// One tape per evaluation; not shared across threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var leaf(Matrix value);

  const Matrix& value(Var v) const;
  const Matrix& adjoint(Var v) const;

  /// Backpropagate from a 1x1 root. Throws NonFiniteLoss if the root value
  /// is not finite.
  void backward(Var root);

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    Matrix value;
    Matrix adjoint;
    std::shared_ptr<CholFactor> factor;  // CholSolve / LogDet only
    int scatter_dim = 0;                 // ScatterLower only
  };

  Node& node(int id) { return nodes_[std::size_t(id)]; }
  const Node& node(int id) const { return nodes_[std::size_t(id)]; }
  int size() const { return int(nodes_.size()); }

  /// Factor of the value of node `id`, computed once per tape.
  std::shared_ptr<CholFactor> factor_of(int id);

  Var push(Op op, int a, int b, Matrix value);

 private:
  std::vector<Node> nodes_;
  std::map<int, std::shared_ptr<CholFactor>> factor_cache_;
};

// Primitive operations. Add/Sub/Mul broadcast a 1x1 operand against any
// shape; everything else requires exact shape agreement.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var chol_solve(Var a, Var b);  // (A + jitter I)^{-1} B with the default ladder
Var logdet(Var a);             // 1x1
Var exp(Var a);
Var ln(Var a);
Var softplus(Var a);
Var sum(Var a);    // 1x1
Var trace(Var a);  // 1x1
/// Unpack a k(k+1)/2 column into a lower-triangular k x k matrix.
Var scatter_lower(Var packed, int dim);

// Composite helpers built from the primitives above.
Var scalar(Tape& t, double v);
Var neg(Var a);
Var scale(double s, Var a);
/// Elementwise reciprocal of a strictly positive matrix, as exp(-ln x).
Var recip_positive(Var a);
/// C x C diagonal matrix from a C x 1 column.
Var diag_from_vector(Var v);
/// n x 1 column holding the diagonal of a square matrix node.
Var extract_diag(Var a);
/// Element of a column vector as a 1x1 node.
Var element(Var v, int i);
double value_of(Var v);

/// Builds a scalar loss from one leaf per layout segment (keyed by name).
using LossBuilder = std::function<Var(Tape&, const std::map<std::string, Var>&)>;

struct GradResult {
  double loss = 0.0;
  ParamVector grad;
};

/// Forward + reverse pass of `loss` at `p`. The gradient has the same
/// segment layout as `p`.
GradResult backward_gradient(const LossBuilder& loss, const ParamVector& p);

/// Forward evaluation only.
double evaluate(const LossBuilder& loss, const ParamVector& p);

/// Max relative disagreement between the reverse-mode gradient and central
/// finite differences with per-coordinate step `step * (1 + |p_i|)`:
/// max_i |g_ad - g_fd| / (1e-8 + |g_fd| + |g_ad|).
double finite_diff_check(const LossBuilder& loss, const ParamVector& p, double step);

}  // namespace coregp::ad

#endif
