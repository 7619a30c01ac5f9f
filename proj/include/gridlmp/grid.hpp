// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#pragma once

#include <map>
#include <string>
#include <vector>

#include "gridlmp/errors.hpp"
#include "gridlmp/types.hpp"

namespace gridlmp {

enum class BusType { kSlack, kPv, kPq };

struct Bus {
  int id = 0;
  BusType type = BusType::kPq;
  double p_load = 0.0;  // MW
  double q_load = 0.0;  // MVAr
  double v_min = 0.94;  // p.u.
  double v_max = 1.06;  // p.u.
  double g_shunt = 0.0;  // p.u.
  double b_shunt = 0.0;  // p.u.
};

struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;           // p.u.
  double x = 0.0;           // p.u.
  double b_charging = 0.0;  // p.u., total line charging
  double tap = 1.0;         // off-nominal ratio at the from side, 1.0 = none
};

struct GenCost {
  double a = 0.0;  // $/MW^2 h
  double b = 0.0;  // $/MWh
  double c = 0.0;  // $/h
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;  // MW
  double p_max = 0.0;
  double q_min = 0.0;  // MVAr
  double q_max = 0.0;
  GenCost cost;
};

// Static network description.  Immutable after construction; validate() is
// called by parse_case and may be re-run on programmatically built cases.
struct GridCase {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  double base_mva = 100.0;

  Index n_buses() const { return static_cast<Index>(buses.size()); }
  Index n_generators() const { return static_cast<Index>(generators.size()); }

  // Row index of a bus id, or -1 when unknown.
  Index bus_index(int id) const;
  Index slack_index() const;
};

// Checks the GridCase invariants: exactly one slack, unique bus ids, branch
// and generator endpoints exist, bounds ordered, nonzero series impedances.
void validate(const GridCase& grid);

struct AdmittanceMatrix {
  ComplexMatrix y;                // N x N, p.u.
  std::map<int, Index> bus_order;  // bus id -> row index
};

// Graph shift operator derived from the admittance matrix: l = |y| elementwise,
// lambda_max its estimated top eigenvalue, l_tilde = 2 l / lambda_max - I.
struct Gso {
  Matrix l;
  double lambda_max = 0.0;
  Matrix l_tilde;
};

// Parses the line-oriented case format described in docs/case-format.md.
// Throws MalformedField, DanglingBranch, NoSlackBus, DuplicateBusId.
GridCase parse_case(const std::string& text);

// Canonical text form; parse_case(serialize_case(g)) reproduces g exactly.
std::string serialize_case(const GridCase& grid);

GridCase load_case(const std::string& path);

// Standard pi-model stamp: series admittance 1/(r+jx), off-diagonals -ys/tap,
// diagonals accumulate series (with 1/tap^2 on the from side), bus shunt and
// half the line charging.  Throws ZeroImpedanceBranch.
AdmittanceMatrix build_admittance(const GridCase& grid);

// lambda_max is estimated by power iteration (cap 10000 iterations) and
// inflated by 1 + 1e-6 so the l_tilde spectrum stays strictly inside [-1, 1].
Gso build_gso(const AdmittanceMatrix& adm, double power_iter_tol = 1e-9);

// Top-eigenvalue estimate for a symmetric matrix.  Exposed for reuse and
// testing; build_gso is the main caller.
double power_iteration_sym(const Matrix& a, double tol, int max_iter = 10000);

}  // namespace gridlmp
