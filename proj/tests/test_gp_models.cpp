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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coregp/errors.hpp"
#include "coregp/gp_models.hpp"
#include "test_util.hpp"

using namespace coregp;

TEST_CASE("exact log-marginal: one zero observation with unit scales") {
  KernelParams kp = KernelParams::from_constrained(1.0, 1.0, 1.0);
  Matrix x(1, 1, 0.3);
  Matrix y(1, 1, 0.0);
  // K + sigma2 = 2, so the value is -0.5 ln(4 pi).
  const double expected = -0.5 * std::log(4.0 * std::numbers::pi);
  CHECK(exact_log_marginal(x, y, kp) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(expected == doctest::Approx(-1.265512).epsilon(1e-6));
}

TEST_CASE("exact log-marginal: zero targets leave only the log-determinant") {
  testutil::Rng rng(31);
  Matrix x = testutil::random_matrix(rng, 6, 2, -2.0, 2.0);
  Matrix y(6, 1, 0.0);
  KernelParams kp = KernelParams::from_constrained(0.9, 1.2, 0.4);

  Matrix a = rbf_matrix(x, x, kp);
  for (int i = 0; i < 6; ++i) a(i, i) += kp.noise_variance();
  const double expected =
      -3.0 * std::log(2.0 * std::numbers::pi) - 0.5 * logdet_psd(cholesky(a));
  CHECK(exact_log_marginal(x, y, kp) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("exact log-marginal matches a naive-inverse density") {
  testutil::Rng rng(32);
  testutil::Instance inst = testutil::random_instance(rng, 3, 1);
  Matrix cov = rbf_matrix(inst.x, inst.x, inst.kp);
  for (int i = 0; i < 3; ++i) cov(i, i) += inst.kp.noise_variance();
  const double expected = testutil::naive_log_gaussian(inst.y, Matrix(3, 1), cov);
  CHECK(exact_log_marginal(inst.x, inst.y, inst.kp) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("posterior predictive interpolates as the noise vanishes") {
  Matrix x = Matrix::from_rows({{-2.0}, {0.5}, {3.0}});
  Matrix y = Matrix::from_rows({{0.7}, {-1.1}, {0.2}});
  KernelParams kp = KernelParams::from_constrained(0.5, 1.0, 1e-12);
  Predictive pr = exact_posterior_predictive(x, x, y, kp);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(pr.f.mean(i, 0) - y(i, 0)) <= 1e-5);
    CHECK(std::abs(pr.f.cov(i, i)) <= 1e-5);
  }
}

TEST_CASE("posterior predictive reverts to the prior far from the data") {
  Matrix x = Matrix::from_rows({{0.0}, {1.0}});
  Matrix y = Matrix::from_rows({{1.0}, {-1.0}});
  KernelParams kp = KernelParams::from_constrained(0.8, 1.7, 0.3);
  Matrix star(1, 1, 60.0);
  Predictive pr = exact_posterior_predictive(star, x, y, kp);
  CHECK(std::abs(pr.f.mean(0, 0)) <= 1e-10);
  CHECK(pr.f.cov(0, 0) == doctest::Approx(kp.outputscale()).epsilon(1e-10));
  CHECK(pr.var_y(0, 0) == doctest::Approx(kp.outputscale() + kp.noise_variance()).epsilon(1e-10));
}

TEST_CASE("posterior predictive matches naive-inverse formulas") {
  testutil::Rng rng(33);
  testutil::Instance inst = testutil::random_instance(rng, 4, 2);
  Matrix star = testutil::random_matrix(rng, 2, 2, -2.0, 2.0);
  Predictive pr = exact_posterior_predictive(star, inst.x, inst.y, inst.kp);

  Matrix cov = rbf_matrix(inst.x, inst.x, inst.kp);
  for (int i = 0; i < 4; ++i) cov(i, i) += inst.kp.noise_variance();
  Matrix inv = testutil::naive_inverse(cov);
  Matrix k_sx = rbf_matrix(star, inst.x, inst.kp);
  Matrix mean = matmul(k_sx, matmul(inv, inst.y));
  Matrix var = rbf_matrix(star, star, inst.kp) - matmul(k_sx, matmul(inv, transpose(k_sx)));
  CHECK(max_abs(pr.f.mean - mean) <= 1e-8);
  CHECK(max_abs(pr.f.cov - var) <= 1e-8);
  for (int i = 0; i < 2; ++i)
    CHECK(pr.var_y(i, 0) ==
          doctest::Approx(var(i, i) + inst.kp.noise_variance()).epsilon(1e-8));
}

TEST_CASE("predictive variance never drops below the noise floor") {
  testutil::Rng rng(34);
  for (int trial = 0; trial < 5; ++trial) {
    testutil::Instance inst = testutil::random_instance(rng, 10, 1);
    Matrix star = testutil::random_matrix(rng, 8, 1, -3.0, 3.0);
    Predictive pr = exact_posterior_predictive(star, inst.x, inst.y, inst.kp);
    for (int i = 0; i < 8; ++i)
      CHECK(pr.var_y(i, 0) >= inst.kp.noise_variance() - 1e-12);
  }
}

TEST_CASE("collapsed bound is exact when the inducing set is the data") {
  testutil::Rng rng(35);
  testutil::Instance inst = testutil::random_instance(rng, 8, 1);
  const double exact = exact_log_marginal(inst.x, inst.y, inst.kp);
  const double collapsed = titsias_bound(inst.x, inst.y, inst.x, inst.kp);
  CHECK(std::abs(collapsed - exact) <= 1e-7 * (1.0 + std::abs(exact)));
}

TEST_CASE("collapsed bound is dominated by the exact log-marginal") {
  testutil::Rng rng(36);
  for (int trial = 0; trial < 10; ++trial) {
    testutil::Instance inst = testutil::random_instance(rng, 12, 2);
    Matrix x_m = testutil::random_matrix(rng, 3, 2, -2.5, 2.5);
    const double exact = exact_log_marginal(inst.x, inst.y, inst.kp);
    const double collapsed = titsias_bound(inst.x, inst.y, x_m, inst.kp);
    CHECK(exact - collapsed >= -1e-9);
  }
}

TEST_CASE("M=1 collapsed bound against a dense rank-one computation") {
  testutil::Rng rng(37);
  testutil::Instance inst = testutil::random_instance(rng, 5, 1);
  Matrix x_m = testutil::random_matrix(rng, 1, 1, -1.0, 1.0);

  Matrix k_x1 = rbf_matrix(inst.x, x_m, inst.kp);
  const double k_11 = rbf_matrix(x_m, x_m, inst.kp)(0, 0);
  Matrix q(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) q(i, j) = k_x1(i, 0) * k_x1(j, 0) / k_11;
  Matrix cov = q;
  for (int i = 0; i < 5; ++i) cov(i, i) += inst.kp.noise_variance();
  Matrix k_xx = rbf_matrix(inst.x, inst.x, inst.kp);
  const double expected = testutil::naive_log_gaussian(inst.y, Matrix(5, 1), cov) -
                          (trace(k_xx) - trace(q)) / (2.0 * inst.kp.noise_variance());
  CHECK(titsias_bound(inst.x, inst.y, x_m, inst.kp) ==
        doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("svgp KL term vanishes when q is the prior") {
  testutil::Rng rng(38);
  testutil::Instance inst = testutil::random_instance(rng, 9, 1);
  Matrix x_m = testutil::random_matrix(rng, 3, 1, -2.0, 2.0);
  Matrix k_mm = rbf_matrix(x_m, x_m, inst.kp);
  CholFactor f = cholesky(k_mm);

  const double kl = gaussian_kl_full(Matrix(3, 1), f.lower, f);
  CHECK(std::abs(kl) <= 1e-10);
}

TEST_CASE("full-batch svgp at the optimal q equals the collapsed bound") {
  testutil::Rng rng(39);
  testutil::Instance inst = testutil::random_instance(rng, 14, 1);
  Matrix x_m = testutil::random_matrix(rng, 4, 1, -2.5, 2.5);
  InducingVariational opt = testutil::svgp_optimal_variational(inst.x, inst.y, x_m, inst.kp);
  const double stochastic = svgp_bound(inst.x, inst.y, opt, inst.kp, inst.x.rows);
  const double collapsed = titsias_bound(inst.x, inst.y, x_m, inst.kp);
  CHECK(stochastic == doctest::Approx(collapsed).epsilon(1e-4));
}

TEST_CASE("half-batch svgp terms average to the full-batch data term") {
  testutil::Rng rng(40);
  testutil::Instance inst = testutil::random_instance(rng, 10, 1);
  Matrix x_m = testutil::random_matrix(rng, 3, 1, -2.0, 2.0);
  InducingVariational iv = testutil::random_variational(rng, x_m);

  Matrix x1(5, 1), y1(5, 1), x2(5, 1), y2(5, 1);
  for (int i = 0; i < 5; ++i) {
    x1(i, 0) = inst.x(i, 0);
    y1(i, 0) = inst.y(i, 0);
    x2(i, 0) = inst.x(i + 5, 0);
    y2(i, 0) = inst.y(i + 5, 0);
  }
  Matrix k_mm = rbf_matrix(x_m, x_m, inst.kp);
  const double kl = gaussian_kl_full(iv.mean, iv.cov_factor, cholesky(k_mm));
  const double full = svgp_bound(inst.x, inst.y, iv, inst.kp, 10) + kl;
  const double b1 = svgp_bound(x1, y1, iv, inst.kp, 10) + kl;
  const double b2 = svgp_bound(x2, y2, iv, inst.kp, 10) + kl;
  CHECK(0.5 * (b1 + b2) == doctest::Approx(full).epsilon(1e-12));
}

TEST_CASE("gaussian KL closed forms") {
  // KL(N(1, 1) || N(0, 1)) = 1/2.
  CholFactor unit = cholesky(Matrix::identity(1));
  CHECK(gaussian_kl_full(Matrix(1, 1, 1.0), Matrix::identity(1), unit) ==
        doctest::Approx(0.5).epsilon(1e-12));
  // Identical Gaussians.
  CHECK(gaussian_kl_full(Matrix(1, 1, 0.0), Matrix::identity(1), unit) ==
        doctest::Approx(0.0));
}

TEST_CASE("gaussian KL against a Monte-Carlo estimate") {
  testutil::Rng rng(41);
  Matrix k = testutil::random_spd(rng, 3, 1.0);
  CholFactor f_k = cholesky(k);
  InducingVariational iv = testutil::random_variational(rng, Matrix(3, 1));
  const double kl = gaussian_kl_full(iv.mean, iv.cov_factor, f_k);

  const int samples = 1000000;
  CholFactor f_s = cholesky(iv.cov());
  double mean_est = 0.0, m2 = 0.0;
  for (int s = 0; s < samples; ++s) {
    Matrix xi(3, 1);
    for (int i = 0; i < 3; ++i) xi(i, 0) = rng.normal();
    Matrix z = matmul(iv.cov_factor, xi) + iv.mean;
    const double val = log_gaussian(z, iv.mean, f_s) - log_gaussian(z, Matrix(3, 1), f_k);
    const double delta = val - mean_est;
    mean_est += delta / (s + 1);
    m2 += delta * (val - mean_est);
  }
  const double se = std::sqrt(m2 / (double(samples) - 1.0) / samples);
  CHECK(std::abs(kl - mean_est) <= 3.0 * se);
}

TEST_CASE("KL is nonnegative on random instances") {
  testutil::Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix k = testutil::random_spd(rng, 4, 0.8);
    InducingVariational iv = testutil::random_variational(rng, Matrix(4, 1));
    CHECK(gaussian_kl_full(iv.mean, iv.cov_factor, cholesky(k)) >= -1e-10);
  }
}

TEST_CASE("bound ordering: svgp <= collapsed <= exact") {
  testutil::Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    testutil::Instance inst = testutil::random_instance(rng, 12, 1);
    Matrix x_m = testutil::random_matrix(rng, 4, 1, -2.5, 2.5);
    InducingVariational iv = testutil::random_variational(rng, x_m);
    const double exact = exact_log_marginal(inst.x, inst.y, inst.kp);
    const double collapsed = titsias_bound(inst.x, inst.y, x_m, inst.kp);
    const double stochastic = svgp_bound(inst.x, inst.y, iv, inst.kp, inst.x.rows);
    CHECK(collapsed - stochastic >= -1e-9);
    CHECK(exact - collapsed >= -1e-9);
  }
}

TEST_CASE("bounds are invariant to row permutations") {
  testutil::Rng rng(44);
  testutil::Instance inst = testutil::random_instance(rng, 9, 2);
  Matrix x_m = testutil::random_matrix(rng, 3, 2, -2.0, 2.0);
  InducingVariational iv = testutil::random_variational(rng, x_m);

  std::vector<int> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng.gen);
  Matrix xp(9, 2), yp(9, 1);
  for (int i = 0; i < 9; ++i) {
    xp(i, 0) = inst.x(perm[std::size_t(i)], 0);
    xp(i, 1) = inst.x(perm[std::size_t(i)], 1);
    yp(i, 0) = inst.y(perm[std::size_t(i)], 0);
  }

  const double scale = 1.0 + std::abs(exact_log_marginal(inst.x, inst.y, inst.kp));
  CHECK(std::abs(exact_log_marginal(inst.x, inst.y, inst.kp) -
                 exact_log_marginal(xp, yp, inst.kp)) <= 1e-10 * scale);
  CHECK(std::abs(titsias_bound(inst.x, inst.y, x_m, inst.kp) -
                 titsias_bound(xp, yp, x_m, inst.kp)) <= 1e-10 * scale);
  CHECK(std::abs(svgp_bound(inst.x, inst.y, iv, inst.kp, 9) -
                 svgp_bound(xp, yp, iv, inst.kp, 9)) <= 1e-10 * scale);
}
