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

#include "coregp/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "coregp/bounds.hpp"
#include "coregp/errors.hpp"

namespace coregp {

AdamState make_adam_state(int n_params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.assign(std::size_t(n_params), 0.0);
  s.v.assign(std::size_t(n_params), 0.0);
  return s;
}

AdamStepResult adam_step(AdamState state, ParamVector params, const ParamVector& grad) {
  if (grad.values.size() != params.values.size() || state.m.size() != params.values.size())
    throw DimensionMismatch("adam_step: parameter/gradient size mismatch");
  for (double g : grad.values)
    if (!std::isfinite(g)) throw NonFiniteGradient("adam_step: gradient is not finite");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    const double g = grad.values[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params.values[i] += state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
  return {std::move(state), std::move(params)};
}

double rmse(const Matrix& pred, const Matrix& truth) {
  if (pred.size() != truth.size() || pred.size() < 1)
    throw LengthMismatch("rmse: length mismatch or empty input");
  double ss = 0.0;
  for (int i = 0; i < pred.size(); ++i) {
    const double r = pred.data[std::size_t(i)] - truth.data[std::size_t(i)];
    ss += r * r;
  }
  return std::sqrt(ss / pred.size());
}

KernelParams kernel_from_params(const ParamVector& p) {
  const Matrix k = p.segment_matrix(seg::kernel);
  KernelParams kp;
  kp.raw_lengthscale = k(0, 0);
  kp.raw_outputscale = k(1, 0);
  kp.raw_noise = p.segment_matrix(seg::noise)(0, 0);
  return kp;
}

Coreset coreset_from_params(const ParamVector& p) {
  Coreset cs;
  cs.inputs = p.segment_matrix(seg::coreset_inputs);
  cs.outputs = p.segment_matrix(seg::coreset_outputs);
  cs.raw_weights = p.segment_matrix(seg::coreset_weights);
  return cs;
}

InducingVariational inducing_from_params(const ParamVector& p) {
  InducingVariational iv;
  iv.inputs = p.segment_matrix(seg::inducing);
  iv.mean = p.segment_matrix(seg::variational_mean);
  const Matrix packed = p.segment_matrix(seg::variational_cov_factor);
  const int m = iv.inputs.rows;
  iv.cov_factor = Matrix(m, m);
  int k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) {
      iv.cov_factor(i, j) = (i == j) ? softplus(packed(k, 0)) : packed(k, 0);
      ++k;
    }
  return iv;
}

Matrix pack_cov_factor_raw(const Matrix& l_s) {
  const int m = l_s.rows;
  Matrix packed(m * (m + 1) / 2, 1);
  int k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) {
      packed(k, 0) = (i == j) ? softplus_inverse(l_s(i, j)) : l_s(i, j);
      ++k;
    }
  return packed;
}

namespace {

Matrix kernel_raw_column(const KernelParams& kp) {
  Matrix k(2, 1);
  k(0, 0) = kp.raw_lengthscale;
  k(1, 0) = kp.raw_outputscale;
  return k;
}

ParamVector base_layout(const KernelParams& kp, std::vector<SegmentSpec> extra) {
  std::vector<SegmentSpec> segs = {{seg::kernel, 2, 1}, {seg::noise, 1, 1}};
  segs.insert(segs.end(), extra.begin(), extra.end());
  ParamVector p(std::move(segs));
  p.set_segment(seg::kernel, kernel_raw_column(kp));
  p.set_segment(seg::noise, Matrix(1, 1, kp.raw_noise));
  return p;
}

}  // namespace

TrainableModel make_exact_model(const KernelParams& kp0) {
  TrainableModel m;
  m.name = "exact";
  m.init = base_layout(kp0, {});
  m.stochastic = false;
  m.make_loss = [](const Matrix& xb, const Matrix& yb, int) {
    return bounds::exact_loss(xb, yb);
  };
  m.bound = [](const ParamVector& p, const Matrix& x, const Matrix& y) {
    return exact_log_marginal(x, y, kernel_from_params(p));
  };
  m.predict = [](const ParamVector& p, const Matrix& xtr, const Matrix& ytr, const Matrix& xe,
                 Matrix& mean, Matrix& var_y) {
    Predictive pr = exact_posterior_predictive(xe, xtr, ytr, kernel_from_params(p));
    mean = std::move(pr.f.mean);
    var_y = std::move(pr.var_y);
  };
  m.predict_mean = [](const ParamVector& p, const Matrix& xtr, const Matrix& ytr,
                      const Matrix& xe) {
    const KernelParams kp = kernel_from_params(p);
    Matrix a = rbf_matrix(xtr, xtr, kp);
    const double s2n = kp.noise_variance();
    for (int i = 0; i < a.rows; ++i) a(i, i) += s2n;
    return matmul(rbf_matrix(xe, xtr, kp), solve_psd(cholesky(a), ytr));
  };
  return m;
}

TrainableModel make_titsias_model(const KernelParams& kp0, Matrix inducing0) {
  TrainableModel m;
  m.name = "titsias";
  // Only the kernel hyperparameters are trained; the inducing inputs stay at
  // their k-means initialization.
  m.init = base_layout(kp0, {});
  m.stochastic = false;
  m.make_loss = [xm = inducing0](const Matrix& xb, const Matrix& yb, int) {
    return bounds::titsias_loss(xb, yb, xm);
  };
  m.bound = [xm = inducing0](const ParamVector& p, const Matrix& x, const Matrix& y) {
    return titsias_bound(x, y, xm, kernel_from_params(p));
  };
  m.predict = [xm = inducing0](const ParamVector& p, const Matrix& xtr, const Matrix& ytr,
                               const Matrix& xe, Matrix& mean, Matrix& var_y) {
    titsias_predict(xe, xtr, ytr, xm, kernel_from_params(p), mean, var_y);
  };
  m.predict_mean = [xm = std::move(inducing0)](const ParamVector& p, const Matrix& xtr,
                                               const Matrix& ytr, const Matrix& xe) {
    const KernelParams kp = kernel_from_params(p);
    const double s2n = kp.noise_variance();
    Matrix k_mx = rbf_matrix(xm, xtr, kp);
    Matrix b = s2n * rbf_matrix(xm, xm, kp) + matmul(k_mx, transpose(k_mx));
    for (int i = 0; i < b.rows; ++i)
      for (int j = 0; j < i; ++j) {
        const double v = 0.5 * (b(i, j) + b(j, i));
        b(i, j) = v;
        b(j, i) = v;
      }
    return matmul(rbf_matrix(xe, xm, kp), solve_psd(cholesky(b), matmul(k_mx, ytr)));
  };
  return m;
}

TrainableModel make_svgp_model(const KernelParams& kp0, const InducingVariational& iv0) {
  const int m_sz = iv0.inputs.rows;
  const int d = iv0.inputs.cols;
  TrainableModel m;
  m.name = "svgp";
  m.init = base_layout(kp0, {{seg::inducing, m_sz, d},
                             {seg::variational_mean, m_sz, 1},
                             {seg::variational_cov_factor, m_sz * (m_sz + 1) / 2, 1}});
  m.init.set_segment(seg::inducing, iv0.inputs);
  m.init.set_segment(seg::variational_mean, iv0.mean);
  m.init.set_segment(seg::variational_cov_factor, pack_cov_factor_raw(iv0.cov_factor));
  m.stochastic = true;
  m.make_loss = [](const Matrix& xb, const Matrix& yb, int n_total) {
    return bounds::svgp_loss(xb, yb, n_total);
  };
  m.bound = [](const ParamVector& p, const Matrix& x, const Matrix& y) {
    return svgp_bound(x, y, inducing_from_params(p), kernel_from_params(p), x.rows);
  };
  m.predict = [](const ParamVector& p, const Matrix&, const Matrix&, const Matrix& xe,
                 Matrix& mean, Matrix& var_y) {
    svgp_predict(xe, inducing_from_params(p), kernel_from_params(p), mean, var_y);
  };
  m.predict_mean = [](const ParamVector& p, const Matrix&, const Matrix&, const Matrix& xe) {
    const InducingVariational iv = inducing_from_params(p);
    const KernelParams kp = kernel_from_params(p);
    CholFactor f_m = cholesky(rbf_matrix(iv.inputs, iv.inputs, kp));
    return matmul(rbf_matrix(xe, iv.inputs, kp), solve_psd(f_m, iv.mean));
  };
  return m;
}

TrainableModel make_cvtgp_model(const KernelParams& kp0, const Coreset& cs0) {
  const int c = cs0.size();
  const int d = cs0.inputs.cols;
  TrainableModel m;
  m.name = "cvtgp";
  m.init = base_layout(kp0, {{seg::coreset_inputs, c, d},
                             {seg::coreset_outputs, c, 1},
                             {seg::coreset_weights, c, 1}});
  m.init.set_segment(seg::coreset_inputs, cs0.inputs);
  m.init.set_segment(seg::coreset_outputs, cs0.outputs);
  m.init.set_segment(seg::coreset_weights, cs0.raw_weights);
  m.stochastic = true;
  m.make_loss = [](const Matrix& xb, const Matrix& yb, int n_total) {
    return bounds::cvtgp_loss(xb, yb, n_total);
  };
  m.bound = [](const ParamVector& p, const Matrix& x, const Matrix& y) {
    return cvtgp_bound_full(x, y, coreset_from_params(p), kernel_from_params(p));
  };
  m.predict = [](const ParamVector& p, const Matrix&, const Matrix&, const Matrix& xe,
                 Matrix& mean, Matrix& var_y) {
    cvtgp_predictive(xe, coreset_from_params(p), kernel_from_params(p), mean, var_y);
  };
  m.predict_mean = [](const ParamVector& p, const Matrix&, const Matrix&, const Matrix& xe) {
    const Coreset cs = coreset_from_params(p);
    const KernelParams kp = kernel_from_params(p);
    const Matrix beta = cs.beta();
    Matrix a = rbf_matrix(cs.inputs, cs.inputs, kp);
    for (int c = 0; c < cs.size(); ++c) a(c, c) += kp.noise_variance() / beta(c, 0);
    return matmul(rbf_matrix(xe, cs.inputs, kp), solve_psd(cholesky(a), cs.outputs));
  };
  return m;
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<int>& idx) {
  Matrix out(int(idx.size()), m.cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < m.cols; ++j) out(int(i), j) = m(idx[i], j);
  return out;
}

}  // namespace

TrainResult train_model(const TrainableModel& model, const Dataset& data, const Fold& fold,
                        const TrainConfig& cfg) {
  const Matrix x_tr = gather_rows(data.x, fold.train);
  const Matrix y_tr = gather_rows(data.y, fold.train);
  const Matrix x_val = gather_rows(data.x, fold.validation);
  const Matrix y_val = gather_rows(data.y, fold.validation);
  const int n_train = x_tr.rows;

  TrainResult res;
  res.params = model.init;

  auto eval_rmse = [&](const ParamVector& p) {
    return rmse(model.predict_mean(p, x_tr, y_tr, x_val), y_val);
  };

  const auto started = std::chrono::steady_clock::now();
  ParamVector p = model.init;
  AdamState adam = make_adam_state(p.total(), cfg.lr);
  std::mt19937_64 shuffler(cfg.seed);
  std::vector<int> order(static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i) order[std::size_t(i)] = i;

  res.best_rmse = eval_rmse(p);
  int last_improvement = 0;

  try {
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffler);
      const int batch = model.stochastic ? std::min(cfg.batch_size, n_train) : n_train;
      double step_loss = 0.0;
      for (int start = 0; start < n_train; start += batch) {
        const int stop = std::min(start + batch, n_train);
        std::vector<int> rows(order.begin() + start, order.begin() + stop);
        Matrix xb(int(rows.size()), x_tr.cols), yb(int(rows.size()), 1);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          for (int j = 0; j < x_tr.cols; ++j) xb(int(i), j) = x_tr(rows[i], j);
          yb(int(i), 0) = y_tr(rows[i], 0);
        }
        ad::GradResult g = ad::backward_gradient(model.make_loss(xb, yb, n_train), p);
        step_loss = g.loss;
        AdamStepResult step = adam_step(std::move(adam), std::move(p), g.grad);
        adam = std::move(step.state);
        p = std::move(step.params);
      }

      res.epochs_run = epoch;
      TraceRow row;
      row.epoch = epoch;
      // Full-batch models already evaluated the full-data bound while
      // stepping; minibatched models need a dedicated full evaluation.
      const bool full_batch_step = !model.stochastic || batch >= n_train;
      row.bound = full_batch_step ? step_loss : model.bound(p, x_tr, y_tr);
      if (epoch % cfg.eval_every == 0) {
        const double r = eval_rmse(p);
        if (r < res.best_rmse) {
          res.best_rmse = r;
          res.params = p;
          last_improvement = epoch;
        }
        row.val_rmse = r;
      } else {
        row.val_rmse = res.trace.empty() ? res.best_rmse : res.trace.back().val_rmse;
      }
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      res.trace.push_back(row);

      if (epoch - last_improvement >= cfg.patience_epochs) break;
    }
  } catch (const Error& e) {
    res.error = e.what();
  }
  return res;
}

}  // namespace coregp
