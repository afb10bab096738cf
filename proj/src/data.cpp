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

#include "coregp/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "coregp/errors.hpp"

namespace coregp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen); }
  int below(int n) { return int(std::uniform_int_distribution<int>(0, n - 1)(gen)); }
};

}  // namespace

double synthetic_mean(int id, const double* x) {
  switch (id) {
    case 1: {
      const double v = x[0];
      return 0.4 * (std::sin(3.0 * v) * std::cos(2.0 * v) + std::sin(0.5 * v) +
                    std::cos(2.0 * v) + std::exp(-v * v) + std::abs(v));
    }
    case 2: {
      const double v = x[0];
      return std::sin(v * v) + std::cos(v * v) + std::sin(3.0 * v) + std::cos(5.0 * v) +
             0.5 * std::sqrt(std::abs(v));
    }
    case 3:
      return std::cos(kTwoPi * x[0]);
    case 4: {
      const double f1 = 4.0 * std::sin(x[0]) + 2.0 * std::sin(2.0 * x[0]);
      const double f2 = 3.0 * std::cos(3.0 * x[1]) + 4.0 * std::sin(5.0 * x[1]);
      const double f12 = std::exp(-(x[0] + x[1]) * (x[0] + x[1]));
      return f1 + f2 + f12;
    }
    case 5: {
      const double f1 = 0.5 * x[0] + std::sin(2.0 * x[0]);
      const double f2 = 0.5 * x[1] + std::cos(5.0 * x[1]);
      const double f12 = 0.5 * std::exp(-(x[0] + x[1]) * (x[0] + x[1]));
      return f1 + f2 + f12;
    }
    default:
      throw InvalidId("synthetic dataset id must be in 1..5");
  }
}

double synthetic_observe(int id, const double* x, double std_normal_draw) {
  const double f = synthetic_mean(id, x);
  switch (id) {
    case 1:
    case 2:
      // eps ~ N(0, 0.3), modulated by sin(2 pi f).
      return f + std::sqrt(0.3) * std_normal_draw * std::sin(kTwoPi * f);
    case 3:
      // eps ~ N(0, 1), modulated by x^3.
      return f + std_normal_draw * x[0] * x[0] * x[0];
    case 4:
    case 5:
      // eps ~ N(0, 0.2).
      return f + std::sqrt(0.2) * std_normal_draw;
    default:
      throw InvalidId("synthetic dataset id must be in 1..5");
  }
}

Dataset gen_synthetic(int id, int n, std::uint64_t seed) {
  if (id < 1 || id > 5) throw InvalidId("synthetic dataset id must be in 1..5");
  if (n < 1) throw TooFewRows("gen_synthetic requires n >= 1");

  Dataset ds;
  ds.name = "synthetic-" + std::to_string(id);
  ds.y = Matrix(n, 1);

  if (id <= 3) {
    Rng rng(seed);
    const double lo = (id == 3) ? 0.0 : -4.0;
    const double hi = (id == 3) ? 2.0 : 4.0;
    ds.x = Matrix(n, 1);
    for (int i = 0; i < n; ++i) {
      ds.x(i, 0) = rng.uniform(lo, hi);
      ds.y(i, 0) = synthetic_observe(id, &ds.x(i, 0), rng.normal());
    }
  } else {
    ds.x = (id == 4) ? make_blobs(n, 3, 0.4, seed) : make_moons(n, 0.05, seed);
    Rng noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < n; ++i) ds.y(i, 0) = synthetic_observe(id, &ds.x(i, 0), noise_rng.normal());
  }
  return ds;
}

Matrix make_blobs(int n, int centers, double stddev, std::uint64_t seed) {
  if (n < centers) throw TooFewRows("make_blobs requires n >= centers");
  Rng rng(seed);
  std::vector<std::array<double, 2>> mu(static_cast<std::size_t>(centers));
  for (auto& c : mu) {
    c[0] = rng.uniform(-10.0, 10.0);
    c[1] = rng.uniform(-10.0, 10.0);
  }
  Matrix x(n, 2);
  int row = 0;
  for (int c = 0; c < centers; ++c) {
    const int count = n / centers + (c < n % centers ? 1 : 0);
    for (int i = 0; i < count; ++i, ++row) {
      x(row, 0) = mu[std::size_t(c)][0] + stddev * rng.normal();
      x(row, 1) = mu[std::size_t(c)][1] + stddev * rng.normal();
    }
  }
  return x;
}

Matrix make_moons(int n, double noise, std::uint64_t seed) {
  if (n < 2) throw TooFewRows("make_moons requires n >= 2");
  const int n_upper = n - n / 2;
  const int n_lower = n / 2;
  Matrix x(n, 2);
  auto param = [](int j, int count) {
    return count > 1 ? std::numbers::pi * j / (count - 1) : 0.0;
  };
  for (int j = 0; j < n_upper; ++j) {
    const double t = param(j, n_upper);
    x(j, 0) = std::cos(t);
    x(j, 1) = std::sin(t);
  }
  for (int j = 0; j < n_lower; ++j) {
    const double t = param(j, n_lower);
    x(n_upper + j, 0) = 1.0 - std::cos(t);
    x(n_upper + j, 1) = 0.5 - std::sin(t);
  }
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    x(i, 0) += noise * rng.normal();
    x(i, 1) += noise * rng.normal();
  }
  return x;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delimiter)) cells.push_back(cell);
  if (!line.empty() && line.back() == delimiter) cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& raw, int row, int col) {
  // from_chars rejects leading whitespace; trim it first.
  std::size_t begin = raw.find_first_not_of(" \t\r");
  std::size_t end = raw.find_last_not_of(" \t\r");
  if (begin == std::string::npos)
    throw NonNumericCell("empty cell at row " + std::to_string(row) + ", column " +
                         std::to_string(col));
  double value = 0.0;
  const char* first = raw.data() + begin;
  const char* last = raw.data() + end + 1;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw NonNumericCell("non-numeric cell '" + raw + "' at row " + std::to_string(row) +
                         ", column " + std::to_string(col));
  return value;
}

}  // namespace

Dataset load_csv_normalize(const std::string& path, const std::string& target_column,
                           char delimiter) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line, delimiter);

  int target = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == target_column) target = int(j);
  if (target < 0) throw MissingColumn("target column '" + target_column + "' not found");

  std::vector<std::vector<double>> rows;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line, delimiter);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(header.size()));
    std::vector<double> parsed(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j)
      parsed[j] = parse_cell(cells[j], row_no, int(j) + 1);
    rows.push_back(std::move(parsed));
  }
  const int n = int(rows.size());
  if (n < 2) throw TooFewRows("need at least 2 data rows to standardize");

  const int d = int(header.size()) - 1;
  Dataset ds;
  ds.name = path;
  ds.x = Matrix(n, d);
  ds.y = Matrix(n, 1);
  for (int i = 0; i < n; ++i) {
    int jx = 0;
    for (int j = 0; j < int(header.size()); ++j) {
      if (j == target)
        ds.y(i, 0) = rows[std::size_t(i)][std::size_t(j)];
      else
        ds.x(i, jx++) = rows[std::size_t(i)][std::size_t(j)];
    }
  }

  ds.norm.active = true;
  ds.norm.mean.resize(std::size_t(d));
  ds.norm.stddev.resize(std::size_t(d));
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += ds.x(i, j);
    mean /= n;
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = ds.x(i, j) - mean;
      ss += r * r;
    }
    const double sd = std::sqrt(ss / (n - 1));
    if (sd == 0.0) throw ConstantColumn("column " + std::to_string(j) + " is constant");
    ds.norm.mean[std::size_t(j)] = mean;
    ds.norm.stddev[std::size_t(j)] = sd;
    for (int i = 0; i < n; ++i) ds.x(i, j) = (ds.x(i, j) - mean) / sd;
  }
  return ds;
}

Matrix denormalize(const Matrix& x, const Normalization& norm) {
  if (!norm.active) return x;
  if (std::size_t(x.cols) != norm.mean.size())
    throw DimensionMismatch("denormalize: column count mismatch");
  Matrix out = x;
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j)
      out(i, j) = x(i, j) * norm.stddev[std::size_t(j)] + norm.mean[std::size_t(j)];
  return out;
}

FoldPlan kfold_split(int n, int k, double train_frac, std::uint64_t seed) {
  const int n_train = int(std::floor(train_frac * n));
  if (n < k || n_train < 1 || n - n_train < 1)
    throw TooFewRows("kfold_split: not enough rows for the requested split");

  FoldPlan plan;
  plan.seed = seed;
  plan.k = k;
  std::mt19937_64 gen(seed);
  for (int f = 0; f < k; ++f) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[std::size_t(i)] = i;
    std::shuffle(idx.begin(), idx.end(), gen);
    Fold fold;
    fold.train.assign(idx.begin(), idx.begin() + n_train);
    fold.validation.assign(idx.begin() + n_train, idx.end());
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.validation.begin(), fold.validation.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

KMeansResult kmeans_init(const Matrix& x, int k, std::uint64_t seed, int max_iter) {
  const int n = x.rows;
  const int d = x.cols;
  if (k > n) throw KTooLarge("kmeans_init: k exceeds the number of points");

  Rng rng(seed);
  auto sqdist = [&](int i, const double* c) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      const double r = x(i, j) - c[j];
      s += r * r;
    }
    return s;
  };

  // k-means++ seeding.
  Matrix centers(k, d);
  std::vector<double> dist2(std::size_t(n), std::numeric_limits<double>::infinity());
  int first = rng.below(n);
  for (int j = 0; j < d; ++j) centers(0, j) = x(first, j);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      dist2[std::size_t(i)] = std::min(dist2[std::size_t(i)], sqdist(i, &centers(c - 1, 0)));
      total += dist2[std::size_t(i)];
    }
    int pick;
    if (total > 0.0) {
      const double target = rng.uniform(0.0, total);
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += dist2[std::size_t(i)];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    for (int j = 0; j < d; ++j) centers(c, j) = x(pick, j);
  }

  // Lloyd iterations.
  KMeansResult res;
  res.assignment.assign(std::size_t(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sqdist(i, &centers(0, 0));
      for (int c = 1; c < k; ++c) {
        const double dd = sqdist(i, &centers(c, 0));
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (res.assignment[std::size_t(i)] != best) {
        res.assignment[std::size_t(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;

    Matrix sums(k, d);
    std::vector<int> counts(std::size_t(k), 0);
    for (int i = 0; i < n; ++i) {
      const int c = res.assignment[std::size_t(i)];
      ++counts[std::size_t(c)];
      for (int j = 0; j < d; ++j) sums(c, j) += x(i, j);
    }
    for (int c = 0; c < k; ++c) {
      if (counts[std::size_t(c)] == 0) continue;  // empty cluster keeps its center
      for (int j = 0; j < d; ++j) centers(c, j) = sums(c, j) / counts[std::size_t(c)];
    }
  }
  res.centers = std::move(centers);
  return res;
}

}  // namespace coregp
