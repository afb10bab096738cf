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

#include "coregp/autodiff.hpp"

#include <cmath>

#include "coregp/errors.hpp"
#include "coregp/softplus.hpp"

namespace coregp::ad {

namespace {

bool broadcastable(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) || a.is_scalar() || b.is_scalar();
}

// Shape of an elementwise op with 1x1 broadcast.
const Matrix& broadcast_shape(const Matrix& a, const Matrix& b) { return a.is_scalar() ? b : a; }

Matrix elementwise(const Matrix& a, const Matrix& b, double (*f)(double, double)) {
  const Matrix& shape = broadcast_shape(a, b);
  Matrix out(shape.rows, shape.cols);
  const bool sa = a.is_scalar(), sb = b.is_scalar();
  for (int i = 0; i < out.size(); ++i)
    out.data[i] = f(sa ? a.data[0] : a.data[i], sb ? b.data[0] : b.data[i]);
  return out;
}

Matrix map(const Matrix& a, double (*f)(double)) {
  Matrix out = a;
  for (double& v : out.data) v = f(v);
  return out;
}

}  // namespace

Var Tape::push(Op op, int a, int b, Matrix value) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, int(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) { return push(Op::Constant, -1, -1, std::move(value)); }

Var Tape::leaf(Matrix value) { return push(Op::Leaf, -1, -1, std::move(value)); }

const Matrix& Tape::value(Var v) const { return node(v.id).value; }

const Matrix& Tape::adjoint(Var v) const { return node(v.id).adjoint; }

std::shared_ptr<CholFactor> Tape::factor_of(int id) {
  auto it = factor_cache_.find(id);
  if (it != factor_cache_.end()) return it->second;
  const Matrix& a = node(id).value;
  auto f = std::make_shared<CholFactor>(cholesky(a, default_base_jitter(a)));
  factor_cache_.emplace(id, f);
  return f;
}

namespace {

Tape& tape_of(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw UnsupportedPrimitive("operands belong to different tapes");
  return *a.tape;
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix &va = t.value(a), &vb = t.value(b);
  if (!broadcastable(va, vb)) throw DimensionMismatch("add: incompatible shapes");
  return t.push(Op::Add, a.id, b.id, elementwise(va, vb, [](double x, double y) { return x + y; }));
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix &va = t.value(a), &vb = t.value(b);
  if (!broadcastable(va, vb)) throw DimensionMismatch("sub: incompatible shapes");
  return t.push(Op::Sub, a.id, b.id, elementwise(va, vb, [](double x, double y) { return x - y; }));
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix &va = t.value(a), &vb = t.value(b);
  if (!broadcastable(va, vb)) throw DimensionMismatch("mul: incompatible shapes");
  return t.push(Op::Mul, a.id, b.id, elementwise(va, vb, [](double x, double y) { return x * y; }));
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.push(Op::MatMul, a.id, b.id, coregp::matmul(t.value(a), t.value(b)));
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  return t.push(Op::Transpose, a.id, -1, coregp::transpose(t.value(a)));
}

Var chol_solve(Var a, Var b) {
  Tape& t = tape_of(a, b);
  auto f = t.factor_of(a.id);
  Var out = t.push(Op::CholSolve, a.id, b.id, solve_psd(*f, t.value(b)));
  t.node(out.id).factor = f;
  return out;
}

Var logdet(Var a) {
  Tape& t = *a.tape;
  auto f = t.factor_of(a.id);
  Var out = t.push(Op::LogDet, a.id, -1, Matrix(1, 1, logdet_psd(*f)));
  t.node(out.id).factor = f;
  return out;
}

Var exp(Var a) {
  Tape& t = *a.tape;
  return t.push(Op::Exp, a.id, -1, map(t.value(a), [](double x) { return std::exp(x); }));
}

Var ln(Var a) {
  Tape& t = *a.tape;
  return t.push(Op::Ln, a.id, -1, map(t.value(a), [](double x) { return std::log(x); }));
}

Var softplus(Var a) {
  Tape& t = *a.tape;
  return t.push(Op::Softplus, a.id, -1, map(t.value(a), coregp::softplus));
}

Var sum(Var a) {
  Tape& t = *a.tape;
  return t.push(Op::Sum, a.id, -1, Matrix(1, 1, coregp::sum(t.value(a))));
}

Var trace(Var a) {
  Tape& t = *a.tape;
  return t.push(Op::Trace, a.id, -1, Matrix(1, 1, coregp::trace(t.value(a))));
}

Var scatter_lower(Var packed, int dim) {
  Tape& t = *packed.tape;
  const Matrix& v = t.value(packed);
  if (v.cols != 1 || v.rows != dim * (dim + 1) / 2)
    throw DimensionMismatch("scatter_lower: packed length does not match dimension");
  Matrix l(dim, dim);
  int k = 0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j <= i; ++j) l(i, j) = v(k++, 0);
  Var out = t.push(Op::ScatterLower, packed.id, -1, std::move(l));
  t.node(out.id).scatter_dim = dim;
  return out;
}

Var scalar(Tape& t, double v) { return t.constant(Matrix(1, 1, v)); }

Var neg(Var a) { return mul(scalar(*a.tape, -1.0), a); }

Var scale(double s, Var a) { return mul(scalar(*a.tape, s), a); }

Var recip_positive(Var a) { return exp(neg(ln(a))); }

Var diag_from_vector(Var v) {
  Tape& t = *v.tape;
  const int n = t.value(v).rows;
  Var spread = matmul(v, t.constant(Matrix(1, n, 1.0)));
  return mul(spread, t.constant(Matrix::identity(n)));
}

Var extract_diag(Var a) {
  Tape& t = *a.tape;
  const int n = t.value(a).rows;
  return matmul(mul(a, t.constant(Matrix::identity(n))), t.constant(Matrix(n, 1, 1.0)));
}

Var element(Var v, int i) {
  Tape& t = *v.tape;
  Matrix mask(t.value(v).rows, t.value(v).cols);
  mask.data[std::size_t(i)] = 1.0;
  return sum(mul(v, t.constant(mask)));
}

double value_of(Var v) { return v.tape->value(v).scalar(); }

namespace {

// adjoint(id) += g, allocating the buffer on first touch.
void accumulate(Tape& t, int id, const Matrix& g) {
  Matrix& adj = t.node(id).adjoint;
  if (adj.size() == 0) {
    adj = g;
    return;
  }
  for (int i = 0; i < adj.size(); ++i) adj.data[i] += g.data[i];
}

// Reduce an elementwise-op adjoint onto a possibly-scalar operand.
void accumulate_broadcast(Tape& t, int id, const Matrix& g) {
  if (t.node(id).value.is_scalar() && !g.is_scalar()) {
    accumulate(t, id, Matrix(1, 1, coregp::sum(g)));
  } else {
    accumulate(t, id, g);
  }
}

Matrix broadcast_to(const Matrix& v, const Matrix& shape) {
  if (v.same_shape(shape)) return v;
  return Matrix(shape.rows, shape.cols, v.data[0]);
}

}  // namespace

void Tape::backward(Var root) {
  Node& r = node(root.id);
  if (!r.value.is_scalar()) throw DimensionMismatch("backward: root is not scalar");
  if (!std::isfinite(r.value.data[0])) throw NonFiniteLoss("backward: loss is not finite");
  r.adjoint = Matrix(1, 1, 1.0);

  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[std::size_t(id)];
    if (n.adjoint.size() == 0) continue;
    const Matrix& g = n.adjoint;
    switch (n.op) {
      case Op::Constant:
      case Op::Leaf:
        break;
      case Op::Add:
        accumulate_broadcast(*this, n.a, g);
        accumulate_broadcast(*this, n.b, g);
        break;
      case Op::Sub:
        accumulate_broadcast(*this, n.a, g);
        accumulate_broadcast(*this, n.b, -1.0 * g);
        break;
      case Op::Mul: {
        const Matrix& va = node(n.a).value;
        const Matrix& vb = node(n.b).value;
        accumulate_broadcast(*this, n.a, hadamard(g, broadcast_to(vb, g)));
        accumulate_broadcast(*this, n.b, hadamard(g, broadcast_to(va, g)));
        break;
      }
      case Op::MatMul:
        accumulate(*this, n.a, coregp::matmul(g, coregp::transpose(node(n.b).value)));
        accumulate(*this, n.b, coregp::matmul(coregp::transpose(node(n.a).value), g));
        break;
      case Op::Transpose:
        accumulate(*this, n.a, coregp::transpose(g));
        break;
      case Op::CholSolve: {
        // X = A^{-1} B: adjoint of a linear solve. With W = A^{-1} G,
        // dB = W and dA = -W X^T (A symmetric).
        Matrix w = solve_psd(*n.factor, g);
        accumulate(*this, n.b, w);
        accumulate(*this, n.a, -1.0 * coregp::matmul(w, coregp::transpose(n.value)));
        break;
      }
      case Op::LogDet:
        accumulate(*this, n.a, g.data[0] * psd_inverse(*n.factor));
        break;
      case Op::Exp:
        accumulate(*this, n.a, hadamard(g, n.value));
        break;
      case Op::Ln: {
        Matrix d = g;
        const Matrix& va = node(n.a).value;
        for (int i = 0; i < d.size(); ++i) d.data[i] /= va.data[i];
        accumulate(*this, n.a, d);
        break;
      }
      case Op::Softplus: {
        Matrix d = g;
        const Matrix& va = node(n.a).value;
        for (int i = 0; i < d.size(); ++i) d.data[i] *= sigmoid(va.data[i]);
        accumulate(*this, n.a, d);
        break;
      }
      case Op::Sum: {
        const Matrix& va = node(n.a).value;
        accumulate(*this, n.a, Matrix(va.rows, va.cols, g.data[0]));
        break;
      }
      case Op::Trace:
        accumulate(*this, n.a, g.data[0] * Matrix::identity(node(n.a).value.rows));
        break;
      case Op::ScatterLower: {
        const int dim = n.scatter_dim;
        Matrix packed(dim * (dim + 1) / 2, 1);
        int k = 0;
        for (int i = 0; i < dim; ++i)
          for (int j = 0; j <= i; ++j) packed(k++, 0) = g(i, j);
        accumulate(*this, n.a, packed);
        break;
      }
      default:
        throw UnsupportedPrimitive("backward: unknown operation on tape");
    }
  }
}

GradResult backward_gradient(const LossBuilder& loss, const ParamVector& p) {
  Tape t;
  std::map<std::string, Var> leaves;
  for (const auto& s : p.segments) leaves.emplace(s.name, t.leaf(p.segment_matrix(s.name)));
  Var root = loss(t, leaves);
  if (!t.value(root).is_scalar()) throw DimensionMismatch("loss did not produce a scalar");
  const double value = t.value(root).scalar();
  if (!std::isfinite(value)) throw NonFiniteLoss("loss evaluated to a non-finite value");
  t.backward(root);

  GradResult out;
  out.loss = value;
  out.grad = p.zeros_like();
  for (const auto& s : p.segments) {
    const Matrix& adj = t.adjoint(leaves.at(s.name));
    if (adj.size() > 0) out.grad.set_segment(s.name, adj);
  }
  return out;
}

double evaluate(const LossBuilder& loss, const ParamVector& p) {
  Tape t;
  std::map<std::string, Var> leaves;
  for (const auto& s : p.segments) leaves.emplace(s.name, t.leaf(p.segment_matrix(s.name)));
  Var root = loss(t, leaves);
  const double value = t.value(root).scalar();
  if (!std::isfinite(value)) throw NonFiniteLoss("loss evaluated to a non-finite value");
  return value;
}

double finite_diff_check(const LossBuilder& loss, const ParamVector& p, double step) {
  if (!(step > 0.0)) throw DimensionMismatch("finite_diff_check: step must be positive");
  GradResult ad = backward_gradient(loss, p);
  double worst = 0.0;
  ParamVector q = p;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double h = step * (1.0 + std::abs(p.values[i]));
    q.values[i] = p.values[i] + h;
    const double up = evaluate(loss, q);
    q.values[i] = p.values[i] - h;
    const double down = evaluate(loss, q);
    q.values[i] = p.values[i];
    const double fd = (up - down) / (2.0 * h);
    const double g = ad.grad.values[i];
    worst = std::max(worst, std::abs(g - fd) / (1e-8 + std::abs(fd) + std::abs(g)));
  }
  return worst;
}

}  // namespace coregp::ad
