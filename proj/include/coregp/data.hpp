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

#ifndef COREGP_DATA_HPP
#define COREGP_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "coregp/linalg.hpp"

namespace coregp {

/// Per-column standardization applied to X (never to y).
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;
  bool active = false;
};

struct Dataset {
  std::string name;
  Matrix x;  // N x D
  Matrix y;  // N x 1
  Normalization norm;
};

struct Fold {
  std::vector<int> train;
  std::vector<int> validation;
};

struct FoldPlan {
  std::uint64_t seed = 0;
  int k = 0;
  std::vector<Fold> folds;
};

/// Noise-free regression function of synthetic dataset `id` at one input row.
double synthetic_mean(int id, const double* x);

/// Observation for synthetic dataset `id` given a standard-normal draw;
/// applies that dataset's noise law (all Gaussian parameters read as
/// variances).
double synthetic_observe(int id, const double* x, double std_normal_draw);

/// Synthetic datasets 1-5. Ids 1-3 are 1-dimensional, 4-5 are 2-dimensional.
Dataset gen_synthetic(int id, int n = 1000, std::uint64_t seed = 0);

/// Isotropic Gaussian blobs around centers drawn uniformly in [-10, 10]^2,
/// balanced assignment up to the remainder.
Matrix make_blobs(int n, int centers, double stddev, std::uint64_t seed);

/// Two interleaving half-circles, upper (cos t, sin t) and lower
/// (1 - cos t, 0.5 - sin t) for t in [0, pi], plus isotropic noise.
Matrix make_moons(int n, double noise, std::uint64_t seed);

/// Numeric CSV with a header row. X columns are standardized to zero mean
/// and unit sample standard deviation (divisor N - 1); y stays raw.
Dataset load_csv_normalize(const std::string& path, const std::string& target_column,
                           char delimiter = ',');

/// Invert the stored standardization.
Matrix denormalize(const Matrix& x, const Normalization& norm);

/// k repeated shuffled train/validation splits with |train| = floor(frac * n),
/// deterministic in the seed. Each fold partitions all indices.
FoldPlan kfold_split(int n, int k, double train_frac, std::uint64_t seed);

struct KMeansResult {
  Matrix centers;               // k x D
  std::vector<int> assignment;  // N
};

/// Lloyd's algorithm with k-means++ seeding; stops when assignments are
/// stable or max_iter is reached.
KMeansResult kmeans_init(const Matrix& x, int k, std::uint64_t seed, int max_iter = 100);

}  // namespace coregp

#endif
