// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#include "gridlmp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace gridlmp {

namespace {

constexpr double kDegenerateStd = 1e-12;
constexpr double kPi = 3.14159265358979323846;

std::string num17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(ScenarioMode mode) {
  return mode == ScenarioMode::kPredict ? "predict" : "forecast";
}

ScenarioMode scenario_mode_from_string(const std::string& name) {
  if (name == "predict") return ScenarioMode::kPredict;
  if (name == "forecast") return ScenarioMode::kForecast;
  throw Error("unknown mode: " + name + " (expected predict|forecast)");
}

std::string to_string(InputKind kind) {
  return kind == InputKind::kVoltage ? "voltage" : "demand";
}

InputKind input_kind_from_string(const std::string& name) {
  if (name == "voltage") return InputKind::kVoltage;
  if (name == "demand") return InputKind::kDemand;
  throw Error("unknown input kind: " + name + " (expected voltage|demand)");
}

std::vector<Scenario> gen_scenarios(const GridCase& grid, Index n,
                                    ScenarioMode mode, std::uint64_t seed,
                                    const ScenarioOptions& opts) {
  const Index nb = grid.n_buses();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(opts.uniform_lo, opts.uniform_hi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Scenario> out;
  out.reserve(static_cast<size_t>(n));
  for (Index t = 0; t < n; ++t) {
    Scenario sc;
    sc.scale.resize(nb);
    if (mode == ScenarioMode::kPredict) {
      for (Index i = 0; i < nb; ++i) sc.scale[i] = uniform(rng);
    } else {
      sc.timestamp = t;
      const double shared =
          1.0 + opts.amplitude *
                    std::sin(2.0 * kPi * static_cast<double>(t) /
                             static_cast<double>(opts.steps_per_day));
      for (Index i = 0; i < nb; ++i) {
        sc.scale[i] = shared + opts.noise_std * gauss(rng);
      }
    }
    sc.scale = sc.scale.cwiseMax(opts.clamp_lo).cwiseMin(opts.clamp_hi);
    sc.p_load.resize(nb);
    sc.q_load.resize(nb);
    for (Index i = 0; i < nb; ++i) {
      const Bus& b = grid.buses[static_cast<size_t>(i)];
      sc.p_load[i] = std::max(b.p_load * sc.scale[i], 0.0);
      sc.q_load[i] = b.q_load * sc.scale[i];
    }
    out.push_back(std::move(sc));
  }
  return out;
}

Matrix normalize_input(const MatrixRef& signal, const NormStats& stats) {
  Matrix out = signal;
  for (Index c = 0; c < 2; ++c) {
    if (stats.input_degenerate[c]) continue;
    out.col(c) = (out.col(c).array() - stats.input_mean[c]) / stats.input_std[c];
  }
  return out;
}

Matrix denormalize_input(const MatrixRef& signal, const NormStats& stats) {
  Matrix out = signal;
  for (Index c = 0; c < 2; ++c) {
    if (stats.input_degenerate[c]) continue;
    out.col(c) = out.col(c).array() * stats.input_std[c] + stats.input_mean[c];
  }
  return out;
}

Vector normalize_target(const VectorRef& lambda, const NormStats& stats) {
  if (stats.target_degenerate) return lambda;
  return (lambda.array() - stats.target_mean) / stats.target_std;
}

Vector denormalize_target(const VectorRef& lambda, const NormStats& stats) {
  if (stats.target_degenerate) return lambda;
  return lambda.array() * stats.target_std + stats.target_mean;
}

Index Dataset::n_bus() const {
  return records.empty() ? 0 : records.front().lambda.size();
}

Index Dataset::n_pairs() const { return static_cast<Index>(pairs.size()); }

Matrix Dataset::input(Index pair) const {
  const LabeledScenario& rec = records[static_cast<size_t>(pairs[static_cast<size_t>(pair)].first)];
  if (input_kind == InputKind::kVoltage) return rec.voltage;
  Matrix m(rec.p_load.size(), 2);
  m.col(0) = rec.p_load;
  m.col(1) = rec.q_load;
  return m;
}

const Vector& Dataset::target(Index pair) const {
  return records[static_cast<size_t>(pairs[static_cast<size_t>(pair)].second)].lambda;
}

NormStats compute_stats(const Dataset& dataset) {
  NormStats stats;
  const Index nb = dataset.n_bus();
  const double count =
      static_cast<double>(dataset.train.size()) * static_cast<double>(nb);
  if (count == 0) return stats;

  Vector in_sum = Vector::Zero(2);
  double tg_sum = 0.0;
  for (Index p : dataset.train) {
    Matrix in = dataset.input(p);
    in_sum += in.colwise().sum().transpose();
    tg_sum += dataset.target(p).sum();
  }
  Vector in_mean = in_sum / count;
  double tg_mean = tg_sum / count;

  Vector in_sq = Vector::Zero(2);
  double tg_sq = 0.0;
  for (Index p : dataset.train) {
    Matrix in = dataset.input(p);
    in_sq += (in.rowwise() - in_mean.transpose()).array().square().colwise().sum().matrix().transpose();
    tg_sq += (dataset.target(p).array() - tg_mean).square().sum();
  }
  stats.input_mean = in_mean;
  stats.target_mean = tg_mean;
  for (Index c = 0; c < 2; ++c) {
    const double sd = std::sqrt(in_sq[c] / count);
    stats.input_degenerate[c] = sd < kDegenerateStd;
    stats.input_std[c] = stats.input_degenerate[c] ? 1.0 : sd;
  }
  const double tsd = std::sqrt(tg_sq / count);
  stats.target_degenerate = tsd < kDegenerateStd;
  stats.target_std = stats.target_degenerate ? 1.0 : tsd;
  return stats;
}

namespace {

void build_pairs(Dataset& ds) {
  ds.pairs.clear();
  const Index nr = static_cast<Index>(ds.records.size());
  if (ds.mode == ScenarioMode::kPredict) {
    for (Index r = 0; r < nr; ++r) ds.pairs.emplace_back(r, r);
  } else {
    // one-step-ahead pairs over consecutive timestamps only; a dropped
    // scenario breaks the chain rather than silently skipping a step
    for (Index r = 0; r + 1 < nr; ++r) {
      if (ds.records[static_cast<size_t>(r + 1)].scenario ==
          ds.records[static_cast<size_t>(r)].scenario + 1) {
        ds.pairs.emplace_back(r, r + 1);
      }
    }
  }
}

void split_pairs(Dataset& ds, double test_fraction, std::uint64_t seed) {
  const Index np = ds.n_pairs();
  std::vector<Index> idx(static_cast<size_t>(np));
  std::iota(idx.begin(), idx.end(), Index{0});
  const Index n_test = static_cast<Index>(std::llround(test_fraction * static_cast<double>(np)));
  const Index n_train = np - n_test;
  if (ds.mode == ScenarioMode::kPredict) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
  }
  ds.train.assign(idx.begin(), idx.begin() + n_train);
  ds.test.assign(idx.begin() + n_train, idx.end());
  if (ds.mode == ScenarioMode::kPredict) {
    std::sort(ds.train.begin(), ds.train.end());
    std::sort(ds.test.begin(), ds.test.end());
  }
}

}  // namespace

Dataset label_dataset(const GridCase& grid,
                      const std::vector<Scenario>& scenarios,
                      ScenarioMode mode, const LabelOptions& opts) {
  const OpfProblem base = build_problem(grid);
  const Index n = static_cast<Index>(scenarios.size());
  const Index nb = grid.n_buses();

  std::vector<std::optional<LabeledScenario>> results(static_cast<size_t>(n));
  std::atomic<Index> next{0};
  auto worker = [&]() {
    for (;;) {
      const Index idx = next.fetch_add(1);
      if (idx >= n) return;
      const Scenario& sc = scenarios[static_cast<size_t>(idx)];
      OpfProblem pb = base;
      for (Index i = 0; i < nb; ++i) {
        pb.grid.buses[static_cast<size_t>(i)].p_load = sc.p_load[i];
        pb.grid.buses[static_cast<size_t>(i)].q_load = sc.q_load[i];
      }
      OpfSolution sol;
      try {
        sol = solve_opf(pb, opts.solve);
      } catch (const Error&) {
        continue;  // counted as a drop below
      }
      if (sol.diagnostics.status != SolveStatus::kConverged) continue;
      LabeledScenario rec;
      rec.scenario = sc.timestamp >= 0 ? sc.timestamp : idx;
      rec.voltage.resize(nb, 2);
      rec.voltage.col(0) = sol.v_mag;
      rec.voltage.col(1) = sol.v_ang;
      rec.p_load = sc.p_load;
      rec.q_load = sc.q_load;
      rec.lambda = sol.lambda;
      results[static_cast<size_t>(idx)] = std::move(rec);
    }
  };
  int n_threads = opts.threads > 0
                      ? opts.threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(n)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  Dataset ds;
  ds.mode = mode;
  ds.input_kind = opts.input_kind;
  for (Index i = 0; i < nb; ++i) {
    ds.bus_ids.push_back(grid.buses[static_cast<size_t>(i)].id);
  }
  for (auto& r : results) {
    if (r.has_value()) {
      ds.records.push_back(std::move(*r));
    } else {
      ++ds.dropped;
    }
  }
  if (static_cast<double>(ds.dropped) >
      opts.max_failure_fraction * static_cast<double>(n)) {
    throw TooManyFailures(std::to_string(ds.dropped) + " of " +
                          std::to_string(n) + " scenario solves failed");
  }
  build_pairs(ds);
  split_pairs(ds, opts.test_fraction, opts.split_seed);
  ds.stats = compute_stats(ds);
  return ds;
}

void save_dataset(const std::string& csv_path, const Dataset& dataset) {
  std::ofstream out(csv_path);
  if (!out) throw Error("cannot write dataset: " + csv_path);
  // record r feeds pair p as input: carry that pair's split on r's rows
  std::vector<std::string> record_split(dataset.records.size(), "test");
  std::vector<bool> is_train(dataset.pairs.size(), false);
  for (Index p : dataset.train) is_train[static_cast<size_t>(p)] = true;
  for (size_t p = 0; p < dataset.pairs.size(); ++p) {
    record_split[static_cast<size_t>(dataset.pairs[p].first)] =
        is_train[p] ? "train" : "test";
  }
  out << "scenario,bus,v_mag,v_ang,p_load,q_load,lambda,split\n";
  const Index nb = dataset.n_bus();
  for (size_t r = 0; r < dataset.records.size(); ++r) {
    const LabeledScenario& rec = dataset.records[r];
    for (Index i = 0; i < nb; ++i) {
      out << rec.scenario << ',' << dataset.bus_ids[static_cast<size_t>(i)]
          << ',' << num17(rec.voltage(i, 0)) << ',' << num17(rec.voltage(i, 1))
          << ',' << num17(rec.p_load[i]) << ',' << num17(rec.q_load[i]) << ','
          << num17(rec.lambda[i]) << ',' << record_split[r] << '\n';
    }
  }
  nlohmann::json side;
  side["mode"] = to_string(dataset.mode);
  side["input_kind"] = to_string(dataset.input_kind);
  side["dropped"] = dataset.dropped;
  side["input_mean"] = {dataset.stats.input_mean[0], dataset.stats.input_mean[1]};
  side["input_std"] = {dataset.stats.input_std[0], dataset.stats.input_std[1]};
  side["input_degenerate"] = {dataset.stats.input_degenerate[0],
                              dataset.stats.input_degenerate[1]};
  side["target_mean"] = dataset.stats.target_mean;
  side["target_std"] = dataset.stats.target_std;
  side["target_degenerate"] = dataset.stats.target_degenerate;
  std::ofstream sout(csv_path + ".stats");
  if (!sout) throw Error("cannot write stats sidecar for " + csv_path);
  sout << side.dump(2) << "\n";
}

Dataset load_dataset(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw Error("cannot open dataset: " + csv_path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "scenario,bus,v_mag,v_ang,p_load,q_load,lambda,split") {
    throw Error("unexpected dataset header in " + csv_path);
  }
  Dataset ds;
  struct Row {
    Index scenario;
    int bus;
    double v, th, p, q, lam;
    std::string split;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    Row row;
    char comma = 0;
    std::string split;
    ss >> row.scenario >> comma >> row.bus >> comma >> row.v >> comma >>
        row.th >> comma >> row.p >> comma >> row.q >> comma >> row.lam >> comma;
    std::getline(ss, row.split);
    if (!ss && row.split.empty()) throw Error("malformed dataset row: " + line);
    rows.push_back(row);
  }
  if (rows.empty()) throw Error("empty dataset: " + csv_path);
  // bus count = rows per scenario block
  Index nb = 0;
  while (nb < static_cast<Index>(rows.size()) &&
         rows[static_cast<size_t>(nb)].scenario == rows[0].scenario) {
    ++nb;
  }
  if (rows.size() % static_cast<size_t>(nb) != 0) {
    throw Error("dataset rows are not a whole number of scenarios");
  }
  for (Index i = 0; i < nb; ++i) ds.bus_ids.push_back(rows[static_cast<size_t>(i)].bus);
  std::vector<std::string> record_split;
  for (size_t r = 0; r < rows.size(); r += static_cast<size_t>(nb)) {
    LabeledScenario rec;
    rec.scenario = rows[r].scenario;
    rec.voltage.resize(nb, 2);
    rec.p_load.resize(nb);
    rec.q_load.resize(nb);
    rec.lambda.resize(nb);
    for (Index i = 0; i < nb; ++i) {
      const Row& row = rows[r + static_cast<size_t>(i)];
      rec.voltage(i, 0) = row.v;
      rec.voltage(i, 1) = row.th;
      rec.p_load[i] = row.p;
      rec.q_load[i] = row.q;
      rec.lambda[i] = row.lam;
    }
    record_split.push_back(rows[r].split);
    ds.records.push_back(std::move(rec));
  }

  std::ifstream sin(csv_path + ".stats");
  if (!sin) throw Error("missing stats sidecar for " + csv_path);
  nlohmann::json side = nlohmann::json::parse(sin);
  ds.mode = scenario_mode_from_string(side.at("mode").get<std::string>());
  ds.input_kind = input_kind_from_string(side.at("input_kind").get<std::string>());
  ds.dropped = side.at("dropped").get<Index>();
  ds.stats.input_mean[0] = side.at("input_mean")[0].get<double>();
  ds.stats.input_mean[1] = side.at("input_mean")[1].get<double>();
  ds.stats.input_std[0] = side.at("input_std")[0].get<double>();
  ds.stats.input_std[1] = side.at("input_std")[1].get<double>();
  ds.stats.input_degenerate[0] = side.at("input_degenerate")[0].get<bool>();
  ds.stats.input_degenerate[1] = side.at("input_degenerate")[1].get<bool>();
  ds.stats.target_mean = side.at("target_mean").get<double>();
  ds.stats.target_std = side.at("target_std").get<double>();
  ds.stats.target_degenerate = side.at("target_degenerate").get<bool>();

  build_pairs(ds);
  for (size_t p = 0; p < ds.pairs.size(); ++p) {
    const std::string& s = record_split[static_cast<size_t>(ds.pairs[p].first)];
    (s == "train" ? ds.train : ds.test).push_back(static_cast<Index>(p));
  }
  return ds;
}

}  // namespace gridlmp
