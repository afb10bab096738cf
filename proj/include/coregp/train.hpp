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

#ifndef COREGP_TRAIN_HPP
#define COREGP_TRAIN_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "coregp/autodiff.hpp"
#include "coregp/cvtgp.hpp"
#include "coregp/data.hpp"
#include "coregp/gp_models.hpp"
#include "coregp/params.hpp"

namespace coregp {

struct AdamState {
  int step = 0;
  std::vector<double> m;
  std::vector<double> v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam_state(int n_params, double lr);

struct AdamStepResult {
  AdamState state;
  ParamVector params;
};

/// One bias-corrected Adam ascent step (the objectives are maximized):
/// params += lr * m_hat / (sqrt(v_hat) + eps).
AdamStepResult adam_step(AdamState state, ParamVector params, const ParamVector& grad);

struct TrainConfig {
  int batch_size = 512;
  int max_epochs = 5000;
  int patience_epochs = 500;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int eval_every = 1;
};

struct TraceRow {
  int epoch = 0;
  double bound = 0.0;
  double val_rmse = 0.0;
  double seconds = 0.0;
};
using TrainTrace = std::vector<TraceRow>;

/// sqrt(mean((pred - truth)^2)) over two equal-length columns.
double rmse(const Matrix& pred, const Matrix& truth);

/// A model variant wired for the generic training loop: an initial raw
/// parameter record, a differentiable batch objective, the full-data bound
/// used for traces, and a predictive for validation RMSE and curve dumps.
struct TrainableModel {
  std::string name;
  ParamVector init;
  bool stochastic = false;  // minibatched objective (svgp / cvtgp)

  std::function<ad::LossBuilder(const Matrix& x_b, const Matrix& y_b, int n_total)> make_loss;
  std::function<double(const ParamVector&, const Matrix& x, const Matrix& y)> bound;
  std::function<void(const ParamVector&, const Matrix& x_tr, const Matrix& y_tr,
                     const Matrix& x_eval, Matrix& mean_out, Matrix& var_y_out)>
      predict;
  /// Mean-only predictive; the per-epoch validation RMSE path.
  std::function<Matrix(const ParamVector&, const Matrix& x_tr, const Matrix& y_tr,
                       const Matrix& x_eval)>
      predict_mean;
};

// Conversions between raw parameter segments and the model records.
KernelParams kernel_from_params(const ParamVector& p);
Coreset coreset_from_params(const ParamVector& p);
InducingVariational inducing_from_params(const ParamVector& p);
/// Raw packed column (softplus-inverse applied to the diagonal) for a
/// lower-triangular factor with positive diagonal.
Matrix pack_cov_factor_raw(const Matrix& l_s);

TrainableModel make_exact_model(const KernelParams& kp0);
TrainableModel make_titsias_model(const KernelParams& kp0, Matrix inducing0);
TrainableModel make_svgp_model(const KernelParams& kp0, const InducingVariational& iv0);
TrainableModel make_cvtgp_model(const KernelParams& kp0, const Coreset& cs0);

struct TrainResult {
  ParamVector params;  // parameters at the best validation RMSE checkpoint
  TrainTrace trace;
  double best_rmse = 0.0;
  int epochs_run = 0;
  std::string error;  // nonempty if a numerical failure aborted the run
};

/// Epoch loop: shuffle the train split, Adam-ascend the bound over
/// minibatches (one full batch for non-stochastic models), evaluate
/// validation RMSE every eval_every epochs, stop after patience_epochs
/// without improvement. Numerical failures stop the run and leave the trace
/// in place.
TrainResult train_model(const TrainableModel& model, const Dataset& data, const Fold& fold,
                        const TrainConfig& cfg);

}  // namespace coregp

#endif
