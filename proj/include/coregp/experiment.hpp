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

#ifndef COREGP_EXPERIMENT_HPP
#define COREGP_EXPERIMENT_HPP

#include <string>
#include <vector>

#include "coregp/data.hpp"
#include "coregp/train.hpp"

namespace coregp {

/// One (dataset x model x size) grid over k folds.
struct ExperimentSpec {
  std::string dataset;  // "synthetic-<id>" or "manifest:<key>"
  std::string manifest_path = "datasets.json";
  std::vector<std::string> models;  // subset of exact, titsias, svgp, cvtgp
  std::vector<int> sizes;           // coreset / inducing sizes (ignored by exact)
  TrainConfig train;
  int synthetic_n = 1000;
  int folds = 5;
  double train_frac = 0.70;
  std::string out_dir = "out";
  int jobs = 0;  // 0 -> hardware concurrency
};

struct ResultRow {
  std::string dataset;
  std::string model;
  int size = -1;  // -1 for models without a sparsity size (exact)
  int fold = 0;
  double bound = 0.0;
  double rmse = 0.0;
  int epochs = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";

  std::string size_label() const { return size < 0 ? "-" : std::to_string(size); }
};

struct RunRecord {
  ResultRow row;
  TrainTrace trace;
};

/// Resolve a dataset selector: synthetic-<id> generates, manifest:<key>
/// looks up {name, path, target_column} in the JSON manifest and loads the
/// CSV with standardization.
Dataset resolve_dataset(const std::string& selector, const std::string& manifest_path,
                        int synthetic_n, std::uint64_t seed);

/// Run the full grid. Writes coreset / inducing artifacts and 1-D predictive
/// curves under out_dir as it goes, then emits results and traces. Per-cell
/// failures are recorded in the status column and do not stop the grid.
std::vector<RunRecord> run_experiment(const ExperimentSpec& spec);

/// Write results.csv, results.json (including a spec echo) and per-run trace
/// CSVs under out_dir/traces/.
void emit_results(const std::vector<RunRecord>& runs, const ExperimentSpec& spec,
                  const std::string& out_dir);

/// Re-read an emitted results.json and verify the bound ordering across the
/// grid plus the full-coreset identity on the resolved dataset. Returns the
/// number of violations (0 means pass) and prints one line per check.
int check_results(const std::string& out_dir, const std::string& manifest_path);

/// Shortest round-trip decimal rendering, used for all emitted numbers.
std::string format_double(double v);

}  // namespace coregp

#endif
