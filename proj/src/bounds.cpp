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

#include "coregp/bounds.hpp"

#include <utility>

#include "coregp/params.hpp"

namespace coregp::bounds {

namespace {

using ad::Var;
using Leaves = std::map<std::string, Var>;

constexpr double kLn2Pi = 1.8378770664093454835606594728112353;
constexpr double k2Pi = 6.2831853071795864769252867665590058;

struct KernelVars {
  Var lengthscale;
  Var outputscale;
  Var noise_var;
};

KernelVars kernel_vars(const Leaves& leaves) {
  Var raw = leaves.at(seg::kernel);
  return {ad::softplus(ad::element(raw, 0)), ad::softplus(ad::element(raw, 1)),
          ad::softplus(leaves.at(seg::noise))};
}

// s2 * exp(-||a_i - b_j||^2 / (2 l^2)) assembled from the squared-norm
// expansion so the pseudo-input rows stay differentiable.
Var tape_rbf(ad::Tape& t, Var a, Var b, const KernelVars& kv) {
  const int n = t.value(a).rows;
  const int m = t.value(b).rows;
  const int d = t.value(a).cols;
  Var rowsq_a = ad::matmul(ad::mul(a, a), t.constant(Matrix(d, 1, 1.0)));
  Var rowsq_b = ad::matmul(ad::mul(b, b), t.constant(Matrix(d, 1, 1.0)));
  Var sq = ad::add(ad::matmul(rowsq_a, t.constant(Matrix(1, m, 1.0))),
                   ad::matmul(t.constant(Matrix(n, 1, 1.0)), ad::transpose(rowsq_b)));
  sq = ad::sub(sq, ad::scale(2.0, ad::matmul(a, ad::transpose(b))));
  Var l2 = ad::mul(kv.lengthscale, kv.lengthscale);
  Var expo = ad::mul(ad::scale(-0.5, ad::recip_positive(l2)), sq);
  return ad::mul(kv.outputscale, ad::exp(expo));
}

// log N(y | mean, sigma2 I) for constant y.
Var iso_log_gauss(ad::Tape& t, const Matrix& y, Var mean, Var noise_var) {
  Var r = ad::sub(t.constant(y), mean);
  Var quad = ad::sum(ad::mul(r, r));
  Var ln_s = ad::ln(ad::scale(k2Pi, noise_var));
  return ad::sub(ad::scale(-0.5 * y.rows, ln_s),
                 ad::mul(ad::scale(0.5, ad::recip_positive(noise_var)), quad));
}

// log N(y | 0, A) for constant y and an on-tape covariance A.
Var zero_mean_log_gauss(ad::Tape& t, const Matrix& y, Var a) {
  Var alpha = ad::chol_solve(a, t.constant(y));
  Var quad = ad::sum(ad::mul(t.constant(y), alpha));
  Var out = ad::add(ad::scalar(t, -0.5 * y.rows * kLn2Pi), ad::scale(-0.5, ad::logdet(a)));
  return ad::sub(out, ad::scale(0.5, quad));
}

Var add_scaled_identity(ad::Tape& t, Var a, Var scale_var) {
  const int n = t.value(a).rows;
  return ad::add(a, ad::mul(scale_var, t.constant(Matrix::identity(n))));
}

// Lower factor with a softplus-mapped diagonal from a packed raw column.
Var unpack_cov_factor(ad::Tape& t, Var packed, int dim) {
  Var raw = ad::scatter_lower(packed, dim);
  Matrix off(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < i; ++j) off(i, j) = 1.0;
  return ad::add(ad::mul(raw, t.constant(off)),
                 ad::mul(ad::softplus(raw), t.constant(Matrix::identity(dim))));
}

struct CoresetVars {
  Var k_cc;
  Var a;          // K_CC + Sigma_beta
  Var alpha;      // A^{-1} y_C
  Var sbv;        // C x 1 diagonal of Sigma_beta
  Var yc;         // coreset outputs leaf
};

CoresetVars coreset_vars(ad::Tape& t, const Leaves& leaves, const KernelVars& kv) {
  CoresetVars cv;
  Var xc = leaves.at(seg::coreset_inputs);
  cv.yc = leaves.at(seg::coreset_outputs);
  Var beta = ad::softplus(leaves.at(seg::coreset_weights));
  cv.sbv = ad::mul(kv.noise_var, ad::recip_positive(beta));
  cv.k_cc = tape_rbf(t, xc, xc, kv);
  cv.a = ad::add(cv.k_cc, ad::diag_from_vector(cv.sbv));
  cv.alpha = ad::chol_solve(cv.a, cv.yc);
  return cv;
}

// KL(q(f_C | .) || p(f_C)) in the form that only factors A.
Var coreset_kl(const CoresetVars& cv) {
  Var t_cc = ad::chol_solve(cv.a, cv.k_cc);
  Var quad = ad::sum(ad::mul(cv.alpha, ad::matmul(cv.k_cc, cv.alpha)));
  Var inner = ad::add(ad::sub(quad, ad::trace(t_cc)),
                      ad::sub(ad::logdet(cv.a), ad::sum(ad::ln(cv.sbv))));
  return ad::scale(0.5, inner);
}

// sum_i [ log N(y_i | m_i, sigma2) - k_{f_i,f_i|y_C} / (2 sigma2) ] on a batch.
Var coreset_data_term(ad::Tape& t, const Matrix& x_b, const Matrix& y_b, const CoresetVars& cv,
                      const Leaves& leaves, const KernelVars& kv) {
  Var k_bc = tape_rbf(t, t.constant(x_b), leaves.at(seg::coreset_inputs), kv);
  Var mean = ad::matmul(k_bc, cv.alpha);
  Var ll = iso_log_gauss(t, y_b, mean, kv.noise_var);
  Var t_bc = ad::chol_solve(cv.a, ad::transpose(k_bc));
  Var tr_f = ad::sub(ad::scale(double(x_b.rows), kv.outputscale),
                     ad::sum(ad::mul(k_bc, ad::transpose(t_bc))));
  return ad::sub(ll, ad::mul(ad::scale(0.5, ad::recip_positive(kv.noise_var)), tr_f));
}

}  // namespace

ad::LossBuilder exact_loss(Matrix x, Matrix y) {
  return [x = std::move(x), y = std::move(y)](ad::Tape& t, const Leaves& leaves) {
    KernelVars kv = kernel_vars(leaves);
    Var xc = t.constant(x);
    Var a = add_scaled_identity(t, tape_rbf(t, xc, xc, kv), kv.noise_var);
    return zero_mean_log_gauss(t, y, a);
  };
}

ad::LossBuilder titsias_loss(Matrix x, Matrix y, std::optional<Matrix> fixed_inducing) {
  return [x = std::move(x), y = std::move(y), fixed_inducing = std::move(fixed_inducing)](
             ad::Tape& t, const Leaves& leaves) {
    KernelVars kv = kernel_vars(leaves);
    Var xm = leaves.count(seg::inducing) ? leaves.at(seg::inducing)
                                         : t.constant(fixed_inducing.value());
    Var xc = t.constant(x);
    Var k_mm = tape_rbf(t, xm, xm, kv);
    Var k_xm = tape_rbf(t, xc, xm, kv);
    Var tt = ad::chol_solve(k_mm, ad::transpose(k_xm));
    Var a = add_scaled_identity(t, ad::matmul(k_xm, tt), kv.noise_var);
    Var ll = zero_mean_log_gauss(t, y, a);
    Var tr_gap = ad::sub(ad::scale(double(x.rows), kv.outputscale),
                         ad::sum(ad::mul(k_xm, ad::transpose(tt))));
    return ad::sub(ll, ad::mul(ad::scale(0.5, ad::recip_positive(kv.noise_var)), tr_gap));
  };
}

ad::LossBuilder svgp_loss(Matrix x_b, Matrix y_b, int n_total) {
  return [x_b = std::move(x_b), y_b = std::move(y_b), n_total](ad::Tape& t,
                                                               const Leaves& leaves) {
    KernelVars kv = kernel_vars(leaves);
    Var xm = leaves.at(seg::inducing);
    const int m_sz = t.value(xm).rows;
    const int batch = x_b.rows;
    Var m = leaves.at(seg::variational_mean);
    Var l_s = unpack_cov_factor(t, leaves.at(seg::variational_cov_factor), m_sz);

    Var k_mm = tape_rbf(t, xm, xm, kv);
    Var k_bm = tape_rbf(t, t.constant(x_b), xm, kv);
    Var tt = ad::chol_solve(k_mm, ad::transpose(k_bm));  // M x B

    Var mean_b = ad::matmul(ad::transpose(tt), m);
    Var ll = iso_log_gauss(t, y_b, mean_b, kv.noise_var);
    Var tr_gap = ad::sub(ad::scale(double(batch), kv.outputscale),
                         ad::sum(ad::mul(k_bm, ad::transpose(tt))));
    Var u = ad::matmul(ad::transpose(l_s), tt);
    Var tr_s = ad::sum(ad::mul(u, u));
    Var half_inv_noise = ad::scale(0.5, ad::recip_positive(kv.noise_var));
    Var data = ad::sub(ll, ad::mul(half_inv_noise, ad::add(tr_gap, tr_s)));

    // KL(q(f_M) || p(f_M)); never rescaled by the batch ratio.
    Var w = ad::chol_solve(k_mm, l_s);
    Var tr_ks = ad::sum(ad::mul(w, l_s));
    Var quad = ad::sum(ad::mul(m, ad::chol_solve(k_mm, m)));
    Var logdet_s = ad::scale(2.0, ad::sum(ad::ln(ad::extract_diag(l_s))));
    Var kl = ad::scale(0.5, ad::add(ad::sub(ad::add(tr_ks, quad), ad::scalar(t, double(m_sz))),
                                    ad::sub(ad::logdet(k_mm), logdet_s)));

    return ad::sub(ad::scale(double(n_total) / batch, data), kl);
  };
}

ad::LossBuilder cvtgp_loss(Matrix x_b, Matrix y_b, int n_total) {
  return [x_b = std::move(x_b), y_b = std::move(y_b), n_total](ad::Tape& t,
                                                               const Leaves& leaves) {
    KernelVars kv = kernel_vars(leaves);
    CoresetVars cv = coreset_vars(t, leaves, kv);
    Var data = coreset_data_term(t, x_b, y_b, cv, leaves, kv);
    return ad::sub(ad::scale(double(n_total) / x_b.rows, data), coreset_kl(cv));
  };
}

ad::LossBuilder cvtgp_alt_loss(Matrix x, Matrix y) {
  return [x = std::move(x), y = std::move(y)](ad::Tape& t, const Leaves& leaves) {
    KernelVars kv = kernel_vars(leaves);
    CoresetVars cv = coreset_vars(t, leaves, kv);
    const int c_sz = t.value(cv.yc).rows;
    Var data = coreset_data_term(t, x, y, cv, leaves, kv);

    // log Q_C = sum_c [ (1/2)(ln 2 pi sigma2 - ln beta_c)
    //                   - (beta_c / 2) ln 2 pi sigma2 ].
    Var beta = ad::softplus(leaves.at(seg::coreset_weights));
    Var ln_2pis = ad::ln(ad::scale(k2Pi, kv.noise_var));
    Var log_q = ad::sub(ad::scale(0.5, ad::sum(ad::sub(ln_2pis, ad::ln(beta)))),
                        ad::mul(ad::scale(0.5, ln_2pis), ad::sum(beta)));

    // E_q[log q(y_C | f_C, beta)] via the posterior moments of f_C.
    Var t_cc = ad::chol_solve(cv.a, cv.k_cc);
    Var m_fc = ad::matmul(cv.k_cc, cv.alpha);
    Var k_fc = ad::sub(cv.k_cc, ad::matmul(cv.k_cc, t_cc));
    Var inv_sbv = ad::recip_positive(cv.sbv);
    Var r = ad::sub(cv.yc, m_fc);
    Var log_n_diag =
        ad::sub(ad::scalar(t, -0.5 * c_sz * kLn2Pi),
                ad::scale(0.5, ad::add(ad::sum(ad::ln(cv.sbv)),
                                       ad::sum(ad::mul(ad::mul(r, r), inv_sbv)))));
    Var tr_scaled = ad::sum(ad::mul(ad::extract_diag(k_fc), inv_sbv));
    Var expected_ll = ad::add(log_q, ad::sub(log_n_diag, ad::scale(0.5, tr_scaled)));

    // log q(y_C | X_C, beta) with its own log Q_C kept explicit.
    Var quad_m = ad::sum(ad::mul(cv.yc, cv.alpha));
    Var marg_gauss = ad::sub(ad::scalar(t, -0.5 * c_sz * kLn2Pi),
                             ad::scale(0.5, ad::add(ad::logdet(cv.a), quad_m)));
    Var marginal = ad::add(log_q, marg_gauss);

    return ad::add(ad::sub(data, expected_ll), marginal);
  };
}

}  // namespace coregp::bounds
