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

#include "coregp/experiment.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "json.hpp"

#include "coregp/errors.hpp"

namespace coregp {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Dataset resolve_dataset(const std::string& selector, const std::string& manifest_path,
                        int synthetic_n, std::uint64_t seed) {
  if (selector.rfind("synthetic-", 0) == 0) {
    const int id = std::stoi(selector.substr(10));
    return gen_synthetic(id, synthetic_n, seed);
  }
  if (selector.rfind("manifest:", 0) == 0) {
    const std::string key = selector.substr(9);
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open dataset manifest: " + manifest_path);
    json manifest = json::parse(in);
    if (!manifest.is_array()) manifest = json::array({manifest});
    for (const auto& entry : manifest) {
      if (entry.at("name").get<std::string>() != key) continue;
      Dataset ds = load_csv_normalize(entry.at("path").get<std::string>(),
                                      entry.at("target_column").get<std::string>());
      ds.name = key;
      return ds;
    }
    throw MissingColumn("dataset '" + key + "' not found in manifest " + manifest_path);
  }
  throw InvalidId("unknown dataset selector: " + selector);
}

namespace {

struct CellTask {
  std::string model;
  int size = -1;  // -1 for exact
  int fold = 0;
};

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << header << "\n";
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) out << ",";
      out << format_double(r[j]);
    }
    out << "\n";
  }
}

TrainableModel build_model(const std::string& name, int size, const Dataset& ds,
                           const Fold& fold, const ExperimentSpec& spec) {
  const KernelParams kp0 = KernelParams::from_constrained(1.0, 1.0, 1.0);
  if (name == "exact") return make_exact_model(kp0);

  Matrix x_tr(int(fold.train.size()), ds.x.cols);
  Matrix y_tr(int(fold.train.size()), 1);
  for (std::size_t i = 0; i < fold.train.size(); ++i) {
    for (int j = 0; j < ds.x.cols; ++j) x_tr(int(i), j) = ds.x(fold.train[i], j);
    y_tr(int(i), 0) = ds.y(fold.train[i], 0);
  }
  const KMeansResult km = kmeans_init(x_tr, size, spec.train.seed);

  if (name == "titsias") return make_titsias_model(kp0, km.centers);

  if (name == "svgp") {
    InducingVariational iv;
    iv.inputs = km.centers;
    iv.mean = Matrix(size, 1);
    // S starts at the prior covariance so the KL term starts at zero.
    iv.cov_factor = cholesky(rbf_matrix(km.centers, km.centers, kp0)).lower;
    return make_svgp_model(kp0, iv);
  }

  if (name == "cvtgp") {
    // Pseudo-observations start at the per-cluster mean of the observed y;
    // weights start untempered (beta = 1).
    Matrix y_c(size, 1);
    std::vector<int> counts(std::size_t(size), 0);
    double y_mean = 0.0;
    for (int i = 0; i < y_tr.rows; ++i) {
      y_c(km.assignment[std::size_t(i)], 0) += y_tr(i, 0);
      ++counts[std::size_t(km.assignment[std::size_t(i)])];
      y_mean += y_tr(i, 0);
    }
    y_mean /= y_tr.rows;
    for (int c = 0; c < size; ++c)
      y_c(c, 0) = counts[std::size_t(c)] ? y_c(c, 0) / counts[std::size_t(c)] : y_mean;
    return make_cvtgp_model(kp0, Coreset::from_weights(km.centers, y_c, Matrix(size, 1, 1.0)));
  }

  throw InvalidId("unknown model: " + name);
}

std::string cell_stem(const CellTask& task) {
  std::string stem = task.model;
  if (task.size >= 0) stem += "_" + std::to_string(task.size);
  return stem + "_fold" + std::to_string(task.fold);
}

void write_artifacts(const CellTask& task, const ParamVector& params, const Dataset& ds,
                     const Fold& fold, const ExperimentSpec& spec, const fs::path& out) {
  const fs::path art = out / "artifacts";
  if (task.model == "cvtgp") {
    const Coreset cs = coreset_from_params(params);
    const Matrix beta = cs.beta();
    std::string header;
    for (int j = 0; j < cs.inputs.cols; ++j) header += "x" + std::to_string(j) + ",";
    header += "y_c,beta";
    std::vector<std::vector<double>> rows;
    for (int c = 0; c < cs.size(); ++c) {
      std::vector<double> r;
      for (int j = 0; j < cs.inputs.cols; ++j) r.push_back(cs.inputs(c, j));
      r.push_back(cs.outputs(c, 0));
      r.push_back(beta(c, 0));
      rows.push_back(std::move(r));
    }
    write_csv(art / (cell_stem(task) + "_coreset.csv"), header, rows);
  } else if (task.model == "svgp") {
    const InducingVariational iv = inducing_from_params(params);
    std::string header;
    for (int j = 0; j < iv.inputs.cols; ++j) header += "x" + std::to_string(j) + ",";
    header += "m";
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < iv.inputs.rows; ++i) {
      std::vector<double> r;
      for (int j = 0; j < iv.inputs.cols; ++j) r.push_back(iv.inputs(i, j));
      r.push_back(iv.mean(i, 0));
      rows.push_back(std::move(r));
    }
    write_csv(art / (cell_stem(task) + "_inducing.csv"), header, rows);
  } else if (task.model == "titsias") {
    // Inducing inputs are fixed at their k-means initialization; re-derive
    // them the same way they were built.
    Matrix x_tr(int(fold.train.size()), ds.x.cols);
    for (std::size_t i = 0; i < fold.train.size(); ++i)
      for (int j = 0; j < ds.x.cols; ++j) x_tr(int(i), j) = ds.x(fold.train[i], j);
    const KMeansResult km = kmeans_init(x_tr, task.size, spec.train.seed);
    std::string header;
    for (int j = 0; j < km.centers.cols; ++j) {
      if (j) header += ",";
      header += "x" + std::to_string(j);
    }
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < km.centers.rows; ++i) {
      std::vector<double> r;
      for (int j = 0; j < km.centers.cols; ++j) r.push_back(km.centers(i, j));
      rows.push_back(std::move(r));
    }
    write_csv(art / (cell_stem(task) + "_inducing.csv"), header, rows);
  }
}

void write_curve(const CellTask& task, const TrainableModel& model, const ParamVector& params,
                 const Dataset& ds, const Fold& fold, const fs::path& out) {
  if (ds.x.cols != 1) return;
  double lo = ds.x(0, 0), hi = ds.x(0, 0);
  for (int i = 0; i < ds.x.rows; ++i) {
    lo = std::min(lo, ds.x(i, 0));
    hi = std::max(hi, ds.x(i, 0));
  }
  const int grid_n = 200;
  Matrix grid(grid_n, 1);
  for (int i = 0; i < grid_n; ++i) grid(i, 0) = lo + (hi - lo) * i / (grid_n - 1);

  Matrix x_tr(int(fold.train.size()), 1), y_tr(int(fold.train.size()), 1);
  for (std::size_t i = 0; i < fold.train.size(); ++i) {
    x_tr(int(i), 0) = ds.x(fold.train[i], 0);
    y_tr(int(i), 0) = ds.y(fold.train[i], 0);
  }
  Matrix mean, var_y;
  model.predict(params, x_tr, y_tr, grid, mean, var_y);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < grid_n; ++i)
    rows.push_back({grid(i, 0), mean(i, 0), var_y(i, 0)});
  write_csv(out / "curves" / (cell_stem(task) + "_curve.csv"), "x,mean,var", rows);
}

std::string sanitize_status(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

RunRecord run_cell(const CellTask& task, const Dataset& ds, const FoldPlan& plan,
                   const ExperimentSpec& spec, const fs::path& out) {
  RunRecord rec;
  rec.row.dataset = ds.name;
  rec.row.model = task.model;
  rec.row.size = task.size;
  rec.row.fold = task.fold;
  rec.row.seed = spec.train.seed;
  const Fold& fold = plan.folds[std::size_t(task.fold)];
  try {
    TrainableModel model = build_model(task.model, task.size, ds, fold, spec);
    TrainResult tr = train_model(model, ds, fold, spec.train);
    rec.trace = std::move(tr.trace);
    rec.row.epochs = tr.epochs_run;
    if (!tr.error.empty()) {
      rec.row.status = sanitize_status(tr.error);
      rec.row.bound = std::nan("");
      rec.row.rmse = std::nan("");
      return rec;
    }
    // The reported bound is the one training finished at; RMSE, artifacts
    // and curves come from the best-RMSE checkpoint parameters.
    if (rec.trace.empty()) {
      Matrix x_tr(int(fold.train.size()), ds.x.cols), y_tr(int(fold.train.size()), 1);
      for (std::size_t i = 0; i < fold.train.size(); ++i) {
        for (int j = 0; j < ds.x.cols; ++j) x_tr(int(i), j) = ds.x(fold.train[i], j);
        y_tr(int(i), 0) = ds.y(fold.train[i], 0);
      }
      rec.row.bound = model.bound(tr.params, x_tr, y_tr);
    } else {
      rec.row.bound = rec.trace.back().bound;
    }
    rec.row.rmse = tr.best_rmse;
    write_artifacts(task, tr.params, ds, fold, spec, out);
    write_curve(task, model, tr.params, ds, fold, out);
  } catch (const std::exception& e) {
    rec.row.status = sanitize_status(e.what());
    rec.row.bound = std::nan("");
    rec.row.rmse = std::nan("");
  }
  return rec;
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentSpec& spec) {
  if (spec.models.empty() || spec.sizes.empty())
    throw InvalidId("experiment spec needs nonempty model and size lists");
  const Dataset ds =
      resolve_dataset(spec.dataset, spec.manifest_path, spec.synthetic_n, spec.train.seed);
  const FoldPlan plan = kfold_split(ds.x.rows, spec.folds, spec.train_frac, spec.train.seed);

  const fs::path out(spec.out_dir);
  fs::create_directories(out / "traces");
  fs::create_directories(out / "artifacts");
  fs::create_directories(out / "curves");

  std::vector<CellTask> tasks;
  for (const auto& model : spec.models) {
    if (model == "exact") {
      for (int f = 0; f < spec.folds; ++f) tasks.push_back({model, -1, f});
      continue;
    }
    for (int size : spec.sizes)
      for (int f = 0; f < spec.folds; ++f) tasks.push_back({model, size, f});
  }

  std::vector<RunRecord> records(tasks.size());
  int jobs = spec.jobs > 0 ? spec.jobs : int(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min<int>(jobs, int(tasks.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      records[i] = run_cell(tasks[i], ds, plan, spec, out);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
          records[i] = run_cell(tasks[i], ds, plan, spec, out);
      });
    for (auto& th : pool) th.join();
  }

  emit_results(records, spec, spec.out_dir);
  return records;
}

void emit_results(const std::vector<RunRecord>& runs, const ExperimentSpec& spec,
                  const std::string& out_dir) {
  if (runs.empty()) throw IoError("emit_results: no rows to write");
  const fs::path out(out_dir);
  fs::create_directories(out / "traces");

  std::ofstream csv(out / "results.csv");
  if (!csv) throw IoError("cannot write results.csv under " + out_dir);
  csv << "dataset,model,size,fold,bound,rmse,epochs,seed,status\n";
  for (const auto& r : runs) {
    const ResultRow& row = r.row;
    csv << row.dataset << "," << row.model << "," << row.size_label() << "," << row.fold << ","
        << format_double(row.bound) << "," << format_double(row.rmse) << "," << row.epochs << ","
        << row.seed << "," << row.status << "\n";
  }

  json j;
  j["spec"] = {{"dataset", spec.dataset},      {"manifest", spec.manifest_path},
               {"models", spec.models},        {"sizes", spec.sizes},
               {"synthetic_n", spec.synthetic_n}, {"folds", spec.folds},
               {"train_frac", spec.train_frac},   {"seed", spec.train.seed},
               {"batch_size", spec.train.batch_size}, {"max_epochs", spec.train.max_epochs},
               {"patience", spec.train.patience_epochs}, {"lr", spec.train.lr},
               {"eval_every", spec.train.eval_every}};
  j["rows"] = json::array();
  for (const auto& r : runs) {
    const ResultRow& row = r.row;
    j["rows"].push_back({{"dataset", row.dataset},
                         {"model", row.model},
                         {"size", row.size_label()},
                         {"fold", row.fold},
                         {"bound", row.bound},
                         {"rmse", row.rmse},
                         {"epochs", row.epochs},
                         {"seed", row.seed},
                         {"status", row.status}});
  }
  std::ofstream js(out / "results.json");
  if (!js) throw IoError("cannot write results.json under " + out_dir);
  js << j.dump(2) << "\n";

  for (const auto& r : runs) {
    CellTask task{r.row.model, r.row.size, r.row.fold};
    std::ofstream tr(out / "traces" / (cell_stem(task) + ".csv"));
    if (!tr) throw IoError("cannot write trace CSV under " + out_dir);
    tr << "epoch,bound,val_rmse,seconds\n";
    for (const auto& row : r.trace)
      tr << row.epoch << "," << format_double(row.bound) << "," << format_double(row.val_rmse)
         << "," << format_double(row.seconds) << "\n";
  }
}

int check_results(const std::string& out_dir, const std::string& manifest_path) {
  const fs::path path = fs::path(out_dir) / "results.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const json j = json::parse(in);

  int violations = 0;
  auto report = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << what << "\n";
    if (!ok) ++violations;
  };

  // Bound ordering: on each fold, no variational bound may exceed the exact
  // log-marginal row.
  std::map<int, double> exact_bound;
  for (const auto& row : j.at("rows"))
    if (row.at("model") == "exact" && row.at("status") == "ok")
      exact_bound[row.at("fold").get<int>()] = row.at("bound").get<double>();
  int compared = 0;
  bool ordering_ok = true;
  for (const auto& row : j.at("rows")) {
    const std::string model = row.at("model");
    if (model == "exact" || row.at("status") != "ok") continue;
    auto it = exact_bound.find(row.at("fold").get<int>());
    if (it == exact_bound.end()) continue;
    ++compared;
    const double slack = 1e-6 * (1.0 + std::abs(it->second));
    if (!(row.at("bound").get<double>() <= it->second + slack)) ordering_ok = false;
  }
  report(ordering_ok, "bound ordering across the grid (" + std::to_string(compared) +
                          " comparisons against exact rows)");

  // Full-coreset identity on a desk-scale subsample of the same dataset.
  const auto& spec = j.at("spec");
  Dataset ds = resolve_dataset(spec.at("dataset").get<std::string>(),
                               manifest_path.empty() ? spec.at("manifest").get<std::string>()
                                                     : manifest_path,
                               spec.at("synthetic_n").get<int>(),
                               spec.at("seed").get<std::uint64_t>());
  const int n = std::min(32, ds.x.rows);
  Matrix x(n, ds.x.cols), y(n, 1);
  for (int i = 0; i < n; ++i) {
    for (int jcol = 0; jcol < ds.x.cols; ++jcol) x(i, jcol) = ds.x(i, jcol);
    y(i, 0) = ds.y(i, 0);
  }
  const KernelParams kp = KernelParams::from_constrained(1.0, 1.0, 0.5);
  const Coreset cs = Coreset::from_weights(x, y, Matrix(n, 1, 1.0));
  const double exact = exact_log_marginal(x, y, kp);
  const double full = cvtgp_bound_full(x, y, cs, kp);
  report(std::abs(full - exact) <= 1e-7 * (1.0 + std::abs(exact)),
         "full-coreset identity on " + ds.name + " subsample (|bound - exact| = " +
             format_double(std::abs(full - exact)) + ")");

  return violations;
}

}  // namespace coregp
