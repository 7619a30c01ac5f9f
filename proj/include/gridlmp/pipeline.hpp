// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridlmp/opf.hpp"

namespace gridlmp {

enum class ScenarioMode { kPredict, kForecast };

std::string to_string(ScenarioMode mode);
ScenarioMode scenario_mode_from_string(const std::string& name);

// One load scenario: per-bus multipliers on (p_load, q_load) and the loads
// they produce.  timestamp is the series index in forecast mode, -1 otherwise.
struct Scenario {
  Vector scale;
  Vector p_load;  // MW
  Vector q_load;  // MVAr
  Index timestamp = -1;
};

struct ScenarioOptions {
  double uniform_lo = 0.8;   // predict: iid multiplier range
  double uniform_hi = 1.2;
  double amplitude = 0.15;   // forecast: daily sine amplitude
  double noise_std = 0.02;   // forecast: per-bus gaussian jitter
  int steps_per_day = 24;
  double clamp_lo = 0.5;     // multipliers are kept inside this range
  double clamp_hi = 1.5;
};

// predict: iid uniform multipliers per bus and scenario.
// forecast: multiplier_i(t) = 1 + A sin(2 pi t / T) + N(0, sigma) with the
// sine phase shared across buses and the jitter drawn per bus.
// Deterministic under seed.
std::vector<Scenario> gen_scenarios(const GridCase& grid, Index n,
                                    ScenarioMode mode, std::uint64_t seed,
                                    const ScenarioOptions& opts = {});

// Which channels form the model input signal: the solved voltage phasor
// (|V|, theta) or the demand vector (P_load, Q_load).
enum class InputKind { kVoltage, kDemand };

std::string to_string(InputKind kind);
InputKind input_kind_from_string(const std::string& name);

// Per-channel z-score statistics, computed on the training split only.
// A channel whose spread is below 1e-12 is flagged degenerate and passed
// through unscaled.
struct NormStats {
  Vector input_mean{Vector::Zero(2)};
  Vector input_std{Vector::Ones(2)};
  bool input_degenerate[2] = {false, false};
  double target_mean = 0.0;
  double target_std = 1.0;
  bool target_degenerate = false;
};

Matrix normalize_input(const MatrixRef& signal, const NormStats& stats);
Matrix denormalize_input(const MatrixRef& signal, const NormStats& stats);
Vector normalize_target(const VectorRef& lambda, const NormStats& stats);
Vector denormalize_target(const VectorRef& lambda, const NormStats& stats);

// One OPF-labeled scenario.
struct LabeledScenario {
  Index scenario = 0;  // index within the generated sequence
  Matrix voltage;      // N x 2: |V| p.u., theta rad
  Vector p_load;       // MW
  Vector q_load;       // MVAr
  Vector lambda;       // $/MWh
};

// Ordered labeled records plus the (input, target) pair view the trainers
// consume.  In predict mode pair i maps record i onto its own prices; in
// forecast mode pair t maps record t onto the prices of record t+1, so there
// is one pair fewer than records.
struct Dataset {
  ScenarioMode mode = ScenarioMode::kPredict;
  InputKind input_kind = InputKind::kVoltage;
  std::vector<LabeledScenario> records;
  std::vector<int> bus_ids;
  // (input record, target record); forecast pairs span consecutive
  // timestamps only, so a dropped scenario breaks the chain there
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<Index> train;  // pair indices
  std::vector<Index> test;
  NormStats stats;
  Index dropped = 0;  // scenarios whose solve failed and were skipped

  Index n_bus() const;
  Index n_pairs() const;
  Matrix input(Index pair) const;  // N x 2 per input_kind
  const Vector& target(Index pair) const;
};

struct LabelOptions {
  SolveOptions solve;
  double test_fraction = 0.2;
  InputKind input_kind = InputKind::kVoltage;
  std::uint64_t split_seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  double max_failure_fraction = 0.05;
};

// Solves every scenario (fanned out over threads, gathered in input order),
// drops failed solves, splits train/test (shuffled in predict mode,
// contiguous blocks in forecast mode) and fits normalization statistics on
// the training pairs.  Throws TooManyFailures past the configured fraction.
Dataset label_dataset(const GridCase& grid,
                      const std::vector<Scenario>& scenarios,
                      ScenarioMode mode, const LabelOptions& opts = {});

// Recomputes z-score statistics from the training pairs; label_dataset calls
// this and tests use it to prove there is no test-set leakage.
NormStats compute_stats(const Dataset& dataset);

// CSV with header scenario,bus,v_mag,v_ang,p_load,q_load,lambda,split and one
// row per (record, bus), 17 significant digits; normalization statistics and
// mode metadata go to the <path>.stats sidecar.  save/load round-trips
// byte-exactly.
void save_dataset(const std::string& csv_path, const Dataset& dataset);
Dataset load_dataset(const std::string& csv_path);

}  // namespace gridlmp
