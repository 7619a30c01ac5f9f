// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors
//
// gridlmp: ground-truth locational marginal prices from AC OPF plus spectral
// graph network benchmarks.
//
//   gridlmp gen   --case data/ieee118.case --mode predict --seed 1 --out run/
//   gridlmp train --case ... --model cheb --epochs 2000 --out run/
//   gridlmp eval  --case ... --model cheb --out run/
//   gridlmp bench --case ... --out run/
//   gridlmp plot  --out run/
//
// Exit codes: 0 success, 2 validation error, 3 solver failure.

#include <CLI11.hpp>
#include <iostream>

#include "gridlmp/commands.hpp"

namespace {

using namespace gridlmp;

struct CliArgs {
  std::string config_path;
  std::string case_path;
  std::string mode;
  std::string model;
  std::string inputs;
  std::string out;
  std::string dataset;
  std::string checkpoint;
  std::uint64_t seed = 0;
  bool have_seed = false;
  Index scenarios = -1;
  int epochs = -1;
  Index batch = -1;
  double lr = -1.0;
  int threads = -1;
  int order = -1;
};

RunConfig assemble(const CliArgs& args) {
  RunConfig config;
  bool have_seed = args.have_seed;
  if (!args.config_path.empty()) {
    config = load_run_config(args.config_path);
    have_seed = true;
  }
  if (!args.case_path.empty()) config.case_path = args.case_path;
  if (!args.mode.empty()) config.mode = scenario_mode_from_string(args.mode);
  if (!args.model.empty()) config.model.kind = model_kind_from_string(args.model);
  if (!args.inputs.empty()) config.input_kind = input_kind_from_string(args.inputs);
  if (!args.out.empty()) config.out_dir = args.out;
  if (!args.dataset.empty()) config.dataset_csv = args.dataset;
  if (args.have_seed) config.seed = args.seed;
  if (args.scenarios >= 0) config.n_scenarios = args.scenarios;
  if (args.epochs >= 0) config.epochs = args.epochs;
  if (args.batch >= 0) config.batch = args.batch;
  if (args.lr >= 0.0) config.lr = args.lr;
  if (args.threads >= 0) config.threads = args.threads;
  if (args.order >= 0) config.model.order = args.order;
  if (!have_seed) throw Error("a seed is required (--seed or config file)");
  if (config.case_path.empty()) throw Error("a case file is required (--case)");
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AC OPF locational marginal prices and spectral GNN benchmarks"};
  app.require_subcommand(1);

  CliArgs args;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "JSON run-config file");
    cmd->add_option("--case", args.case_path, "grid case file");
    cmd->add_option("--mode", args.mode, "predict|forecast");
    cmd->add_option("--model", args.model, "cheb|gcn1|fcnn");
    cmd->add_option("--inputs", args.inputs, "voltage|demand input channels");
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--dataset", args.dataset, "dataset CSV path override");
    cmd->add_option("--seed", args.seed, "run seed (mandatory)")
        ->each([&](const std::string&) { args.have_seed = true; });
    cmd->add_option("--scenarios", args.scenarios, "number of scenarios");
    cmd->add_option("--epochs", args.epochs, "training epochs");
    cmd->add_option("--batch", args.batch, "mini-batch size (0 = full batch)");
    cmd->add_option("--lr", args.lr, "optimizer learning rate");
    cmd->add_option("--threads", args.threads, "labeling threads (0 = auto)");
    cmd->add_option("--order", args.order, "Chebyshev filter order K");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate and label load scenarios");
  CLI::App* train = app.add_subcommand("train", "train one model on a dataset");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  CLI::App* bench = app.add_subcommand("bench", "train and compare all models");
  CLI::App* plot = app.add_subcommand("plot", "render emitted CSVs as SVG charts");
  for (CLI::App* cmd : {gen, train, eval, bench, plot}) add_common(cmd);
  eval->add_option("--checkpoint", args.checkpoint, "checkpoint file override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (plot->parsed()) {
      // plot needs no case file; tolerate a missing one
      RunConfig config;
      if (!args.config_path.empty()) config = load_run_config(args.config_path);
      if (!args.out.empty()) config.out_dir = args.out;
      if (!args.mode.empty()) config.mode = scenario_mode_from_string(args.mode);
      cmd_plot(config);
      return 0;
    }
    RunConfig config = assemble(args);
    if (gen->parsed()) {
      cmd_gen(config);
    } else if (train->parsed()) {
      cmd_train(config);
    } else if (eval->parsed()) {
      cmd_eval(config, args.checkpoint);
    } else if (bench->parsed()) {
      cmd_bench(config);
    }
    return 0;
  } catch (const TooManyFailures& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const SingularKktSystem& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const ResolveFailed& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const InfeasibleBounds& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const PowerIterationDiverged& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
