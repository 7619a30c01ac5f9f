// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridlmp/models.hpp"
#include "gridlmp/pipeline.hpp"

namespace gridlmp {

// Everything a pipeline invocation needs; the CLI populates this from the
// run-config file and flag overrides.  All randomness derives from seed.
struct RunConfig {
  std::string case_path;
  std::string out_dir = ".";
  std::string dataset_csv;  // empty = <out_dir>/dataset.csv
  ScenarioMode mode = ScenarioMode::kPredict;
  ModelSpec model;
  InputKind input_kind = InputKind::kVoltage;
  std::uint64_t seed = 1;
  Index n_scenarios = 2000;
  int epochs = 2000;
  Index batch = 0;  // 0 = full batch
  double lr = 1e-3;
  int threads = 0;  // labeling fan-out; 0 = hardware concurrency
  SolveOptions solve;
  ScenarioOptions scenario;
  double test_fraction = 0.2;

  std::string dataset_path() const {
    return dataset_csv.empty() ? out_dir + "/dataset.csv" : dataset_csv;
  }
  std::string checkpoint_path(ModelKind kind) const {
    return out_dir + "/" + to_string(kind) + "_" + to_string(mode) + ".ckpt";
  }
  std::string train_log_path(ModelKind kind) const {
    return out_dir + "/" + to_string(kind) + "_" + to_string(mode) + "_train.csv";
  }
  std::string series_path(ModelKind kind) const {
    return out_dir + "/" + to_string(kind) + "_" + to_string(mode) + "_series.csv";
  }
  std::string metrics_path() const { return out_dir + "/mse_report.csv"; }
  std::string bench_path() const { return out_dir + "/bench_table.csv"; }
};

// JSON run-config mirroring RunConfig; unknown keys are rejected.
RunConfig load_run_config(const std::string& path);

struct GenResult {
  Index requested = 0;
  Index labeled = 0;
  std::string csv_path;
};

struct TrainResult {
  double train_mse = 0.0;  // normalized, final epoch
  double test_mse = 0.0;
  std::string checkpoint_path;
  std::string log_path;
};

struct EvalResult {
  std::string model;
  std::string mode;
  double test_mse_normalized = 0.0;
  double test_mse = 0.0;  // denormalized, $/MWh squared
  std::string series_path;
};

struct BenchRow {
  std::string model;
  std::string mode;
  double test_mse = 0.0;  // denormalized
  double test_mse_normalized = 0.0;
  Index parameters = 0;
};

// gen: scenarios -> labeled dataset CSV (+stats); prints the solve success
// rate.  train: normalized-MSE training with the adaptive-moment optimizer,
// per-epoch train/test log, checkpoint at the end.  eval: denormalized test
// MSE plus per-bus truth/prediction series.  bench: all three models under
// identical seed and budget, sorted by MSE; asserts nothing.
GenResult cmd_gen(const RunConfig& config);
TrainResult cmd_train(const RunConfig& config);
EvalResult cmd_eval(const RunConfig& config, const std::string& checkpoint);
std::vector<BenchRow> cmd_bench(const RunConfig& config);
// plot: renders the emitted CSVs as simple static SVG charts.
std::vector<std::string> cmd_plot(const RunConfig& config);

}  // namespace gridlmp
