// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#include "gridlmp/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gridlmp/checkpoint.hpp"
#include "gridlmp/optim.hpp"

namespace gridlmp {

namespace {

std::string num17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t model_seed(std::uint64_t seed, ModelKind kind) {
  return mix_seed(seed, 100 + static_cast<std::uint64_t>(kind));
}

struct Stacked {
  Matrix in, tg;
  Index count = 0;
};

Stacked stack_split(const Dataset& ds, const Model& model,
                    const std::vector<Index>& pairs) {
  std::vector<Matrix> ins;
  std::vector<Vector> tgs;
  ins.reserve(pairs.size());
  tgs.reserve(pairs.size());
  for (Index p : pairs) {
    ins.push_back(normalize_input(ds.input(p), ds.stats));
    tgs.push_back(normalize_target(ds.target(p), ds.stats));
  }
  Stacked s;
  s.in = model.stack_inputs(ins);
  s.tg = model.stack_targets(tgs);
  s.count = static_cast<Index>(pairs.size());
  return s;
}

double forward_mse(Model& model, const Stacked& s) {
  nn::Tape tape;
  nn::Var out = model.forward(tape, tape.constant(s.in), s.count);
  return tape.mse(out, tape.constant(s.tg)).value()(0, 0);
}

Gso gso_for(const GridCase& grid) { return build_gso(build_admittance(grid)); }

Model make_model(const RunConfig& config, ModelKind kind, const GridCase& grid,
                 const Gso& gso) {
  ModelSpec spec = config.model;
  spec.kind = kind;
  return build_model(spec, kind == ModelKind::kFcnn ? nullptr : &gso,
                     grid.n_buses(), model_seed(config.seed, kind));
}

TrainResult train_model(const RunConfig& config, const Dataset& ds,
                        Model& model) {
  if (ds.n_bus() != model.n_nodes()) {
    throw DatasetModelMismatch("dataset has " + std::to_string(ds.n_bus()) +
                               " buses, model expects " +
                               std::to_string(model.n_nodes()));
  }
  const ModelKind kind = model.kind();
  Stacked train = stack_split(ds, model, ds.train);
  Stacked test = stack_split(ds, model, ds.test);

  nn::AdamState adam;
  adam.lr = config.lr;
  std::vector<nn::Tensor*> params = model.parameters();

  std::filesystem::create_directories(config.out_dir);
  std::ofstream log(config.train_log_path(kind));
  if (!log) throw Error("cannot write training log for " + to_string(kind));
  log << "epoch,train_mse,test_mse\n";

  std::mt19937_64 shuffle_rng(mix_seed(config.seed, 7));
  double train_mse = forward_mse(model, train);
  double test_mse = test.count > 0 ? forward_mse(model, test) : 0.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.batch <= 0 || config.batch >= train.count) {
      nn::Tape tape;
      nn::Var out = model.forward(tape, tape.constant(train.in), train.count);
      nn::Var loss = tape.mse(out, tape.constant(train.tg));
      train_mse = loss.value()(0, 0);
      tape.backward(loss);
      adam_step(params, adam);
    } else {
      std::vector<Index> order = ds.train;
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (size_t start = 0; start < order.size();
           start += static_cast<size_t>(config.batch)) {
        const size_t stop =
            std::min(order.size(), start + static_cast<size_t>(config.batch));
        std::vector<Index> chunk(order.begin() + static_cast<long>(start),
                                 order.begin() + static_cast<long>(stop));
        Stacked mini = stack_split(ds, model, chunk);
        nn::Tape tape;
        nn::Var out = model.forward(tape, tape.constant(mini.in), mini.count);
        nn::Var loss = tape.mse(out, tape.constant(mini.tg));
        tape.backward(loss);
        adam_step(params, adam);
      }
      train_mse = forward_mse(model, train);
    }
    if (test.count > 0) test_mse = forward_mse(model, test);
    log << epoch << ',' << num17(train_mse) << ',' << num17(test_mse) << '\n';
  }

  TrainResult result;
  result.train_mse = train_mse;
  result.test_mse = test_mse;
  result.checkpoint_path = config.checkpoint_path(kind);
  result.log_path = config.train_log_path(kind);
  nn::save_checkpoint(result.checkpoint_path, model.state());
  return result;
}

EvalResult eval_model(const RunConfig& config, const Dataset& ds, Model& model) {
  if (ds.n_bus() != model.n_nodes()) {
    throw DatasetModelMismatch("dataset has " + std::to_string(ds.n_bus()) +
                               " buses, model expects " +
                               std::to_string(model.n_nodes()));
  }
  const ModelKind kind = model.kind();
  const Index nb = ds.n_bus();
  std::filesystem::create_directories(config.out_dir);
  std::ofstream series(config.series_path(kind));
  if (!series) throw Error("cannot write series file for " + to_string(kind));
  series << "sample,bus,truth,predicted\n";

  double acc_norm = 0.0, acc_denorm = 0.0;
  double count = 0.0;
  for (Index p : ds.test) {
    Matrix in = normalize_input(ds.input(p), ds.stats);
    Vector pred_norm = model.predict(in);
    Vector truth_norm = normalize_target(ds.target(p), ds.stats);
    Vector pred = denormalize_target(pred_norm, ds.stats);
    const Vector& truth = ds.target(p);
    const Index sample =
        ds.records[static_cast<size_t>(ds.pairs[static_cast<size_t>(p)].second)].scenario;
    for (Index i = 0; i < nb; ++i) {
      series << sample << ',' << ds.bus_ids[static_cast<size_t>(i)] << ','
             << num17(truth[i]) << ',' << num17(pred[i]) << '\n';
      acc_norm += (pred_norm[i] - truth_norm[i]) * (pred_norm[i] - truth_norm[i]);
      acc_denorm += (pred[i] - truth[i]) * (pred[i] - truth[i]);
      count += 1.0;
    }
  }
  EvalResult result;
  result.model = to_string(kind);
  result.mode = to_string(ds.mode);
  result.test_mse_normalized = count > 0 ? acc_norm / count : 0.0;
  result.test_mse = count > 0 ? acc_denorm / count : 0.0;
  result.series_path = config.series_path(kind);

  const std::string metrics = config.metrics_path();
  const bool fresh = !std::filesystem::exists(metrics);
  std::ofstream mout(metrics, std::ios::app);
  if (fresh) mout << "model,mode,test_mse,test_mse_normalized\n";
  mout << result.model << ',' << result.mode << ',' << num17(result.test_mse)
       << ',' << num17(result.test_mse_normalized) << '\n';
  return result;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

// Minimal static SVG helpers for the plot subcommand.
std::string svg_header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) + "\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string svg_polyline(const std::vector<double>& xs,
                         const std::vector<double>& ys, const char* color,
                         const char* dash) {
  std::string s = "<polyline fill=\"none\" stroke=\"";
  s += color;
  s += "\" stroke-width=\"1.5\"";
  if (dash[0] != '\0') s += std::string(" stroke-dasharray=\"") + dash + "\"";
  s += " points=\"";
  for (size_t i = 0; i < xs.size(); ++i) {
    s += std::to_string(xs[i]) + "," + std::to_string(ys[i]) + " ";
  }
  s += "\"/>\n";
  return s;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, true, true);
  RunConfig c;
  bool have_seed = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "case") c.case_path = value.get<std::string>();
    else if (key == "out") c.out_dir = value.get<std::string>();
    else if (key == "dataset") c.dataset_csv = value.get<std::string>();
    else if (key == "mode") c.mode = scenario_mode_from_string(value.get<std::string>());
    else if (key == "model") c.model.kind = model_kind_from_string(value.get<std::string>());
    else if (key == "hidden") c.model.hidden = value.get<std::vector<Index>>();
    else if (key == "order") c.model.order = value.get<int>();
    else if (key == "inputs") c.input_kind = input_kind_from_string(value.get<std::string>());
    else if (key == "seed") { c.seed = value.get<std::uint64_t>(); have_seed = true; }
    else if (key == "scenarios") c.n_scenarios = value.get<Index>();
    else if (key == "epochs") c.epochs = value.get<int>();
    else if (key == "batch") c.batch = value.get<Index>();
    else if (key == "lr") c.lr = value.get<double>();
    else if (key == "threads") c.threads = value.get<int>();
    else if (key == "solve_tol") c.solve.tol = value.get<double>();
    else if (key == "solve_max_iter") c.solve.max_iter = value.get<int>();
    else if (key == "test_fraction") c.test_fraction = value.get<double>();
    else throw Error("unknown config key: " + key);
  }
  if (!have_seed) throw Error("config must set a seed");
  if (c.case_path.empty()) throw Error("config must set a case path");
  return c;
}

GenResult cmd_gen(const RunConfig& config) {
  GridCase grid = load_case(config.case_path);
  auto scenarios = gen_scenarios(grid, config.n_scenarios, config.mode,
                                 config.seed, config.scenario);
  LabelOptions opts;
  opts.solve = config.solve;
  opts.test_fraction = config.test_fraction;
  opts.input_kind = config.input_kind;
  opts.split_seed = mix_seed(config.seed, 3);
  opts.threads = config.threads;
  Dataset ds = label_dataset(grid, scenarios, config.mode, opts);
  std::filesystem::create_directories(config.out_dir);
  save_dataset(config.dataset_path(), ds);

  GenResult result;
  result.requested = config.n_scenarios;
  result.labeled = static_cast<Index>(ds.records.size());
  result.csv_path = config.dataset_path();
  std::cout << "labeled " << result.labeled << "/" << result.requested
            << " scenarios (success rate "
            << 100.0 * static_cast<double>(result.labeled) /
                   static_cast<double>(std::max<Index>(1, result.requested))
            << "%) -> " << result.csv_path << "\n";
  return result;
}

TrainResult cmd_train(const RunConfig& config) {
  GridCase grid = load_case(config.case_path);
  Dataset ds = load_dataset(config.dataset_path());
  Gso gso = gso_for(grid);
  Model model = make_model(config, config.model.kind, grid, gso);
  TrainResult result = train_model(config, ds, model);
  std::cout << to_string(config.model.kind) << " " << to_string(config.mode)
            << ": train mse " << result.train_mse << ", test mse "
            << result.test_mse << " (normalized) -> "
            << result.checkpoint_path << "\n";
  return result;
}

EvalResult cmd_eval(const RunConfig& config, const std::string& checkpoint) {
  GridCase grid = load_case(config.case_path);
  Dataset ds = load_dataset(config.dataset_path());
  Gso gso = gso_for(grid);
  Model model = make_model(config, config.model.kind, grid, gso);
  model.load_state(nn::load_checkpoint(
      checkpoint.empty() ? config.checkpoint_path(config.model.kind) : checkpoint));
  EvalResult result = eval_model(config, ds, model);
  std::cout << result.model << " " << result.mode << ": test mse "
            << result.test_mse << " $/MWh^2 (" << result.test_mse_normalized
            << " normalized) -> " << result.series_path << "\n";
  return result;
}

std::vector<BenchRow> cmd_bench(const RunConfig& config) {
  GridCase grid = load_case(config.case_path);
  Dataset ds = load_dataset(config.dataset_path());
  Gso gso = gso_for(grid);

  const ModelKind kinds[] = {ModelKind::kCheb, ModelKind::kGcn1,
                             ModelKind::kFcnn};
  std::vector<BenchRow> rows(3);
  std::vector<std::exception_ptr> errors(3);
  auto run_one = [&](int i) {
    try {
      Model model = make_model(config, kinds[i], grid, gso);
      train_model(config, ds, model);
      EvalResult ev = eval_model(config, ds, model);
      rows[static_cast<size_t>(i)] =
          BenchRow{ev.model, ev.mode, ev.test_mse, ev.test_mse_normalized,
                   model.parameter_count()};
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
    }
  };
  // independent single-threaded trainings; results land by index
  std::vector<std::thread> pool;
  for (int i = 0; i < 3; ++i) pool.emplace_back(run_one, i);
  for (std::thread& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::sort(rows.begin(), rows.end(),
            [](const BenchRow& a, const BenchRow& b) { return a.test_mse < b.test_mse; });
  std::ofstream out(config.bench_path());
  out << "model,mode,test_mse,test_mse_normalized,parameters\n";
  for (const BenchRow& r : rows) {
    out << r.model << ',' << r.mode << ',' << num17(r.test_mse) << ','
        << num17(r.test_mse_normalized) << ',' << r.parameters << '\n';
  }
  std::cout << "model    mode      test mse ($/MWh)^2   normalized      params\n";
  for (const BenchRow& r : rows) {
    std::printf("%-8s %-9s %-20.6e %-15.6e %lld\n", r.model.c_str(),
                r.mode.c_str(), r.test_mse, r.test_mse_normalized,
                static_cast<long long>(r.parameters));
  }
  return rows;
}

std::vector<std::string> cmd_plot(const RunConfig& config) {
  std::vector<std::string> written;
  const int w = 640, h = 400, margin = 50;

  // MSE bars from the bench table (or single-model metrics) if present
  const std::string tables[] = {config.bench_path(), config.metrics_path()};
  for (const std::string& table : tables) {
    std::ifstream in(table);
    if (!in) continue;
    std::string line;
    std::getline(in, line);
    std::vector<std::pair<std::string, double>> bars;
    while (std::getline(in, line)) {
      auto f = split_csv_line(line);
      if (f.size() >= 3) bars.emplace_back(f[0] + "/" + f[1], std::stod(f[2]));
    }
    if (bars.empty()) continue;
    double top = 0.0;
    for (auto& [name, v] : bars) top = std::max(top, v);
    std::string svg = svg_header(w, h);
    const double bw = static_cast<double>(w - 2 * margin) / static_cast<double>(bars.size());
    for (size_t i = 0; i < bars.size(); ++i) {
      const double bh = top > 0 ? (h - 2 * margin) * bars[i].second / top : 0.0;
      const double x = margin + static_cast<double>(i) * bw;
      svg += "<rect x=\"" + std::to_string(x + 8) + "\" y=\"" +
             std::to_string(h - margin - bh) + "\" width=\"" +
             std::to_string(bw - 16) + "\" height=\"" + std::to_string(bh) +
             "\" fill=\"steelblue\"/>\n";
      svg += "<text x=\"" + std::to_string(x + bw / 2) + "\" y=\"" +
             std::to_string(h - margin + 16) +
             "\" text-anchor=\"middle\" font-size=\"12\">" + bars[i].first +
             "</text>\n";
      char val[64];
      std::snprintf(val, sizeof val, "%.3e", bars[i].second);
      svg += "<text x=\"" + std::to_string(x + bw / 2) + "\" y=\"" +
             std::to_string(h - margin - bh - 6) +
             "\" text-anchor=\"middle\" font-size=\"11\">" + val + "</text>\n";
    }
    svg += "</svg>\n";
    const std::string path = config.out_dir + "/mse_bars.svg";
    std::ofstream out(path);
    out << svg;
    written.push_back(path);
    break;
  }

  // first-sample truth vs prediction per available series
  for (ModelKind kind : {ModelKind::kCheb, ModelKind::kGcn1, ModelKind::kFcnn}) {
    std::ifstream in(config.series_path(kind));
    if (!in) continue;
    std::string line;
    std::getline(in, line);
    std::vector<double> truth, pred;
    std::string first_sample;
    while (std::getline(in, line)) {
      auto f = split_csv_line(line);
      if (f.size() != 4) continue;
      if (first_sample.empty()) first_sample = f[0];
      if (f[0] != first_sample) break;
      truth.push_back(std::stod(f[2]));
      pred.push_back(std::stod(f[3]));
    }
    if (truth.empty()) continue;
    double lo = truth[0], hi = truth[0];
    for (double v : truth) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (double v : pred) { lo = std::min(lo, v); hi = std::max(hi, v); }
    if (hi - lo < 1e-9) hi = lo + 1.0;
    auto ymap = [&](double v) {
      return h - margin - (h - 2 * margin) * (v - lo) / (hi - lo);
    };
    std::vector<double> xs(truth.size()), yt(truth.size()), yp(truth.size());
    for (size_t i = 0; i < truth.size(); ++i) {
      xs[i] = margin + (w - 2.0 * margin) * static_cast<double>(i) /
                           static_cast<double>(std::max<size_t>(1, truth.size() - 1));
      yt[i] = ymap(truth[i]);
      yp[i] = ymap(pred[i]);
    }
    std::string svg = svg_header(w, h);
    svg += svg_polyline(xs, yt, "black", "");
    svg += svg_polyline(xs, yp, "crimson", "5,3");
    svg += "<text x=\"" + std::to_string(margin) + "\" y=\"20\" font-size=\"13\">" +
           to_string(kind) + " " + to_string(config.mode) +
           ": truth (solid) vs prediction (dashed), one test sample</text>\n";
    svg += "</svg>\n";
    const std::string path = config.out_dir + "/" + to_string(kind) + "_" +
                             to_string(config.mode) + "_series.svg";
    std::ofstream out(path);
    out << svg;
    written.push_back(path);
  }
  for (const std::string& p : written) std::cout << "wrote " << p << "\n";
  return written;
}

}  // namespace gridlmp
