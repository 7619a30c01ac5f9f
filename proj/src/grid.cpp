// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#include "gridlmp/grid.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace gridlmp {

namespace {

// One comma-separated field with its 1-based starting column.
struct Field {
  std::string text;
  int column = 1;
};

std::vector<Field> split_fields(const std::string& line) {
  std::vector<Field> out;
  size_t pos = 0;
  while (pos <= line.size()) {
    size_t comma = line.find(',', pos);
    size_t end = (comma == std::string::npos) ? line.size() : comma;
    size_t b = pos, e = end;
    while (b < e && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
    out.push_back({line.substr(b, e - b), static_cast<int>(b) + 1});
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

double parse_double(const Field& f, int line) {
  const char* b = f.text.data();
  const char* e = b + f.text.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(b, e, value);
  if (ec != std::errc() || ptr != e || f.text.empty()) {
    throw MalformedField(line, f.column, "expected a number, got '" + f.text + "'");
  }
  return value;
}

int parse_int(const Field& f, int line) {
  const char* b = f.text.data();
  const char* e = b + f.text.size();
  int value = 0;
  auto [ptr, ec] = std::from_chars(b, e, value);
  if (ec != std::errc() || ptr != e || f.text.empty()) {
    throw MalformedField(line, f.column, "expected an integer, got '" + f.text + "'");
  }
  return value;
}

BusType parse_bus_type(const Field& f, int line) {
  if (f.text == "slack") return BusType::kSlack;
  if (f.text == "pv") return BusType::kPv;
  if (f.text == "pq") return BusType::kPq;
  throw MalformedField(line, f.column,
                       "bus type must be slack|pv|pq, got '" + f.text + "'");
}

void expect_fields(const std::vector<Field>& fields, size_t n, int line) {
  if (fields.size() != n) {
    throw MalformedField(line, fields.empty() ? 1 : fields.back().column,
                         "expected " + std::to_string(n) + " fields, got " +
                             std::to_string(fields.size()));
  }
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Index GridCase::bus_index(int id) const {
  for (Index i = 0; i < n_buses(); ++i) {
    if (buses[static_cast<size_t>(i)].id == id) return i;
  }
  return -1;
}

Index GridCase::slack_index() const {
  for (Index i = 0; i < n_buses(); ++i) {
    if (buses[static_cast<size_t>(i)].type == BusType::kSlack) return i;
  }
  return -1;
}

void validate(const GridCase& grid) {
  std::set<int> ids;
  int slack_count = 0;
  for (const Bus& b : grid.buses) {
    if (!ids.insert(b.id).second) {
      throw DuplicateBusId("duplicate bus id " + std::to_string(b.id));
    }
    if (b.type == BusType::kSlack) ++slack_count;
    if (b.v_min > b.v_max) {
      throw InfeasibleBounds("bus " + std::to_string(b.id) + ": v_min > v_max");
    }
  }
  if (slack_count != 1) {
    throw NoSlackBus("expected exactly one slack bus, found " +
                     std::to_string(slack_count));
  }
  for (const Branch& br : grid.branches) {
    if (!ids.count(br.from) || !ids.count(br.to)) {
      throw DanglingBranch("branch " + std::to_string(br.from) + "-" +
                           std::to_string(br.to) + " references an unknown bus");
    }
    if (br.r * br.r + br.x * br.x <= 0.0) {
      throw ZeroImpedanceBranch("branch " + std::to_string(br.from) + "-" +
                                std::to_string(br.to) +
                                " has zero series impedance");
    }
  }
  for (const Generator& g : grid.generators) {
    if (!ids.count(g.bus)) {
      throw DanglingBranch("generator references unknown bus " +
                           std::to_string(g.bus));
    }
    if (g.p_min > g.p_max || g.q_min > g.q_max) {
      throw InfeasibleBounds("generator at bus " + std::to_string(g.bus) +
                             " has inverted bounds");
    }
  }
}

GridCase parse_case(const std::string& text) {
  GridCase grid;
  enum class Section { kNone, kBase, kBus, kBranch, kGen } section = Section::kNone;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  bool have_base = false;
  while (std::getline(in, raw)) {
    ++line_no;
    if (size_t hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    size_t b = raw.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    size_t e = raw.find_last_not_of(" \t\r");
    std::string line = raw.substr(b, e - b + 1);
    if (line == "BASE") { section = Section::kBase; continue; }
    if (line == "BUS") { section = Section::kBus; continue; }
    if (line == "BRANCH") { section = Section::kBranch; continue; }
    if (line == "GEN") { section = Section::kGen; continue; }

    auto fields = split_fields(raw.substr(0, e + 1));
    switch (section) {
      case Section::kNone:
        throw MalformedField(line_no, static_cast<int>(b) + 1,
                             "record before any section header");
      case Section::kBase: {
        expect_fields(fields, 1, line_no);
        grid.base_mva = parse_double(fields[0], line_no);
        if (grid.base_mva <= 0.0) {
          throw MalformedField(line_no, fields[0].column, "base_mva must be > 0");
        }
        have_base = true;
        break;
      }
      case Section::kBus: {
        expect_fields(fields, 8, line_no);
        Bus bus;
        bus.id = parse_int(fields[0], line_no);
        bus.type = parse_bus_type(fields[1], line_no);
        bus.p_load = parse_double(fields[2], line_no);
        bus.q_load = parse_double(fields[3], line_no);
        bus.v_min = parse_double(fields[4], line_no);
        bus.v_max = parse_double(fields[5], line_no);
        bus.g_shunt = parse_double(fields[6], line_no);
        bus.b_shunt = parse_double(fields[7], line_no);
        if (bus.v_min > bus.v_max) {
          throw MalformedField(line_no, fields[4].column, "v_min > v_max");
        }
        grid.buses.push_back(bus);
        break;
      }
      case Section::kBranch: {
        expect_fields(fields, 6, line_no);
        Branch br;
        br.from = parse_int(fields[0], line_no);
        br.to = parse_int(fields[1], line_no);
        br.r = parse_double(fields[2], line_no);
        br.x = parse_double(fields[3], line_no);
        br.b_charging = parse_double(fields[4], line_no);
        br.tap = parse_double(fields[5], line_no);
        if (br.r * br.r + br.x * br.x <= 0.0) {
          throw MalformedField(line_no, fields[2].column,
                               "branch has zero series impedance");
        }
        if (br.tap <= 0.0) {
          throw MalformedField(line_no, fields[5].column, "tap must be > 0");
        }
        grid.branches.push_back(br);
        break;
      }
      case Section::kGen: {
        expect_fields(fields, 8, line_no);
        Generator g;
        g.bus = parse_int(fields[0], line_no);
        g.p_min = parse_double(fields[1], line_no);
        g.p_max = parse_double(fields[2], line_no);
        g.q_min = parse_double(fields[3], line_no);
        g.q_max = parse_double(fields[4], line_no);
        g.cost.a = parse_double(fields[5], line_no);
        g.cost.b = parse_double(fields[6], line_no);
        g.cost.c = parse_double(fields[7], line_no);
        if (g.p_min > g.p_max) {
          throw MalformedField(line_no, fields[1].column, "p_min > p_max");
        }
        if (g.q_min > g.q_max) {
          throw MalformedField(line_no, fields[3].column, "q_min > q_max");
        }
        grid.generators.push_back(g);
        break;
      }
    }
  }
  if (!have_base) grid.base_mva = 100.0;
  validate(grid);
  return grid;
}

std::string serialize_case(const GridCase& grid) {
  std::string out;
  out += "BASE\n" + num(grid.base_mva) + "\n";
  out += "BUS\n";
  for (const Bus& b : grid.buses) {
    const char* type = b.type == BusType::kSlack ? "slack"
                       : b.type == BusType::kPv  ? "pv"
                                                 : "pq";
    out += std::to_string(b.id) + ", " + type + ", " + num(b.p_load) + ", " +
           num(b.q_load) + ", " + num(b.v_min) + ", " + num(b.v_max) + ", " +
           num(b.g_shunt) + ", " + num(b.b_shunt) + "\n";
  }
  out += "BRANCH\n";
  for (const Branch& br : grid.branches) {
    out += std::to_string(br.from) + ", " + std::to_string(br.to) + ", " +
           num(br.r) + ", " + num(br.x) + ", " + num(br.b_charging) + ", " +
           num(br.tap) + "\n";
  }
  out += "GEN\n";
  for (const Generator& g : grid.generators) {
    out += std::to_string(g.bus) + ", " + num(g.p_min) + ", " + num(g.p_max) +
           ", " + num(g.q_min) + ", " + num(g.q_max) + ", " + num(g.cost.a) +
           ", " + num(g.cost.b) + ", " + num(g.cost.c) + "\n";
  }
  return out;
}

GridCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open case file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

AdmittanceMatrix build_admittance(const GridCase& grid) {
  const Index n = grid.n_buses();
  AdmittanceMatrix adm;
  adm.y = ComplexMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    adm.bus_order[grid.buses[static_cast<size_t>(i)].id] = i;
  }
  for (const Bus& b : grid.buses) {
    adm.y(adm.bus_order.at(b.id), adm.bus_order.at(b.id)) +=
        Complex(b.g_shunt, b.b_shunt);
  }
  for (const Branch& br : grid.branches) {
    if (br.r * br.r + br.x * br.x <= 0.0) {
      throw ZeroImpedanceBranch("branch " + std::to_string(br.from) + "-" +
                                std::to_string(br.to) +
                                " has zero series impedance");
    }
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex ysh(0.0, br.b_charging / 2.0);
    const double t = br.tap;
    const Index i = adm.bus_order.at(br.from);
    const Index j = adm.bus_order.at(br.to);
    adm.y(i, i) += (ys + ysh) / (t * t);
    adm.y(j, j) += ys + ysh;
    adm.y(i, j) += -ys / t;
    adm.y(j, i) += -ys / t;
  }
  return adm;
}

double power_iteration_sym(const Matrix& a, double tol, int max_iter) {
  const Index n = a.rows();
  if (n == 0 || a.cols() != n) {
    throw DimensionMismatch("power iteration needs a square matrix");
  }
  // Shift by the infinity norm so the top eigenvalue of (a + shift I) is the
  // strictly dominant one in magnitude even when a is indefinite.
  const double shift = a.cwiseAbs().rowwise().sum().maxCoeff();
  if (shift == 0.0) {
    throw PowerIterationDiverged("operator is identically zero");
  }
  Vector x = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double rayleigh = 0.0;
  bool have_prev = false;
  for (int it = 0; it < max_iter; ++it) {
    Vector ax = a * x;
    const double r = x.dot(ax);
    if (have_prev && std::abs(r - rayleigh) <= tol * std::max(1.0, std::abs(r))) {
      return r;
    }
    rayleigh = r;
    have_prev = true;
    Vector y = ax + shift * x;
    const double norm = y.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw PowerIterationDiverged("power iteration produced a zero vector");
    }
    x = y / norm;
  }
  throw PowerIterationDiverged("no convergence within iteration cap");
}

Gso build_gso(const AdmittanceMatrix& adm, double power_iter_tol) {
  Gso gso;
  gso.l = adm.y.cwiseAbs();
  gso.lambda_max = power_iteration_sym(gso.l, power_iter_tol) * (1.0 + 1e-6);
  if (!(gso.lambda_max > 0.0)) {
    throw PowerIterationDiverged("nonpositive top eigenvalue estimate");
  }
  const Index n = gso.l.rows();
  gso.l_tilde = 2.0 / gso.lambda_max * gso.l - Matrix::Identity(n, n);
  return gso;
}

}  // namespace gridlmp
