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

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"

#include "coregp/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Gaussian process regression with coreset-based tempered variational inference"};
  app.require_subcommand(1);

  coregp::ExperimentSpec spec;
  spec.models = {"exact", "titsias", "svgp", "cvtgp"};
  spec.sizes = {25};

  CLI::App* run = app.add_subcommand("run", "train a (dataset x model x size) grid over k folds");
  run->add_option("--dataset", spec.dataset, "synthetic-<1..5> or manifest:<key>")->required();
  run->add_option("--manifest", spec.manifest_path, "JSON manifest for CSV datasets")
      ->capture_default_str();
  run->add_option("--models", spec.models, "models to train (exact,titsias,svgp,cvtgp)")
      ->delimiter(',')
      ->capture_default_str();
  run->add_option("--sizes", spec.sizes, "coreset / inducing sizes")
      ->delimiter(',')
      ->capture_default_str();
  run->add_option("--epochs", spec.train.max_epochs, "maximum training epochs")
      ->capture_default_str();
  run->add_option("--patience", spec.train.patience_epochs,
                  "stop after this many epochs without validation RMSE improvement")
      ->capture_default_str();
  run->add_option("--batch", spec.train.batch_size, "minibatch size for svgp / cvtgp")
      ->capture_default_str();
  run->add_option("--lr", spec.train.lr, "Adam learning rate")->capture_default_str();
  run->add_option("--seed", spec.train.seed, "seed for folds, k-means and shuffling")
      ->capture_default_str();
  run->add_option("--eval-every", spec.train.eval_every, "validation RMSE cadence in epochs")
      ->capture_default_str();
  run->add_option("--n", spec.synthetic_n, "rows for synthetic datasets")->capture_default_str();
  run->add_option("--folds", spec.folds, "number of cross-validation folds")
      ->capture_default_str();
  run->add_option("--train-frac", spec.train_frac, "train fraction per fold")
      ->capture_default_str();
  run->add_option("--out", spec.out_dir, "output directory")->capture_default_str();
  run->add_option("--jobs", spec.jobs, "worker threads (0 = all cores)")->capture_default_str();

  std::string check_dir = "out";
  std::string check_manifest;
  CLI::App* check = app.add_subcommand("check", "re-read results and assert grid properties");
  check->add_option("--out", check_dir, "directory holding results.json")->capture_default_str();
  check->add_option("--manifest", check_manifest, "manifest override for CSV datasets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (const char* env_out = std::getenv("COREGP_OUT")) spec.out_dir = env_out;
      const auto records = coregp::run_experiment(spec);
      int failures = 0;
      for (const auto& r : records) {
        std::cout << r.row.dataset << " " << r.row.model << " size=" << r.row.size_label()
                  << " fold=" << r.row.fold;
        if (r.row.status == "ok") {
          std::cout << " bound=" << coregp::format_double(r.row.bound)
                    << " rmse=" << coregp::format_double(r.row.rmse)
                    << " epochs=" << r.row.epochs << "\n";
        } else {
          std::cout << " FAILED: " << r.row.status << "\n";
          ++failures;
        }
      }
      std::cout << "results written to " << spec.out_dir << "\n";
      return failures == 0 ? 0 : 1;
    }
    if (const char* env_out = std::getenv("COREGP_OUT")) check_dir = env_out;
    return coregp::check_results(check_dir, check_manifest) == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
