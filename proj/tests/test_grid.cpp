// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#include "gridlmp/grid.hpp"

#include <doctest.h>

#include <random>

using namespace gridlmp;

namespace {

const char* kOneBusCase = R"(# smallest valid case
BASE
100.0
BUS
1, slack, 100.0, 20.0, 0.94, 1.06, 0.0, 0.5
GEN
1, 0.0, 300.0, -100.0, 100.0, 0.01, 20.0, 0.0
)";

GridCase two_bus_line(double x_pu) {
  GridCase g;
  g.buses = {{1, BusType::kSlack, 0, 0, 0.9, 1.1, 0, 0},
             {2, BusType::kPq, 0, 0, 0.9, 1.1, 0, 0}};
  g.branches = {{1, 2, 0.0, x_pu, 0.0, 1.0}};
  g.generators = {{1, 0, 100, -50, 50, {0, 10, 0}}};
  return g;
}

// Reference stamp: accumulate each branch as its own 2x2 block plus shunts.
ComplexMatrix stamp_oracle(const GridCase& g) {
  const Index n = g.n_buses();
  ComplexMatrix y = ComplexMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const Bus& b = g.buses[static_cast<size_t>(i)];
    y(i, i) += Complex(b.g_shunt, b.b_shunt);
  }
  for (const Branch& br : g.branches) {
    Index i = g.bus_index(br.from), j = g.bus_index(br.to);
    Complex ys = 1.0 / Complex(br.r, br.x);
    Complex half(0.0, br.b_charging / 2.0);
    y(i, i) += (ys + half) / (br.tap * br.tap);
    y(j, j) += ys + half;
    y(i, j) -= ys / br.tap;
    y(j, i) -= ys / br.tap;
  }
  return y;
}

}  // namespace

TEST_CASE("parse_case accepts the minimal one-bus case") {
  GridCase g = parse_case(kOneBusCase);
  CHECK(g.n_buses() == 1);
  CHECK(g.n_generators() == 1);
  CHECK(g.buses[0].type == BusType::kSlack);
  CHECK(g.buses[0].p_load == doctest::Approx(100.0));
  CHECK(g.base_mva == doctest::Approx(100.0));
}

TEST_CASE("parse_case rejects a branch to an unknown bus") {
  std::string text = kOneBusCase;
  text += "BRANCH\n1, 99, 0.01, 0.1, 0.0, 1.0\n";
  CHECK_THROWS_AS(parse_case(text), DanglingBranch);
}

TEST_CASE("parse_case reads the bundled 118-bus system") {
  GridCase g = load_case(std::string(GRIDLMP_DATA_DIR) + "/ieee118.case");
  CHECK(g.n_buses() == 118);
  CHECK(g.n_generators() == 54);
  CHECK(g.branches.size() == 186);
  CHECK(g.buses[g.slack_index()].id == 69);
}

TEST_CASE("parse_case reports malformed fields with line and column") {
  std::string text = "BASE\n100.0\nBUS\n1, slack, oops, 0, 0.9, 1.1, 0, 0\n";
  try {
    parse_case(text);
    FAIL("expected MalformedField");
  } catch (const MalformedField& e) {
    CHECK(e.line() == 4);
    CHECK(e.column() == 11);
  }
}

TEST_CASE("parse_case validation errors") {
  CHECK_THROWS_AS(parse_case("BASE\n100\nBUS\n1, pq, 0,0,0.9,1.1,0,0\n"), NoSlackBus);
  CHECK_THROWS_AS(parse_case("BUS\n1, slack, 0,0,0.9,1.1,0,0\n"
                             "1, pq, 0,0,0.9,1.1,0,0\n"),
                  DuplicateBusId);
  CHECK_THROWS_AS(parse_case("BUS\n1, slack, 0,0,0.9,1.1,0,0\n"
                             "2, pq, 0,0,0.9,1.1,0,0\n"
                             "BRANCH\n1, 2, 0.0, 0.0, 0.0, 1.0\n"),
                  MalformedField);
}

TEST_CASE("build_admittance stamps a single line") {
  AdmittanceMatrix adm = build_admittance(two_bus_line(0.1));
  CHECK(adm.y(0, 0).imag() == doctest::Approx(-10.0));
  CHECK(adm.y(0, 1).imag() == doctest::Approx(10.0));
  CHECK(adm.y(1, 0).imag() == doctest::Approx(10.0));
  CHECK(adm.y(1, 1).imag() == doctest::Approx(-10.0));
  CHECK(adm.y.real().cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(adm.bus_order.at(1) == 0);
  CHECK(adm.bus_order.at(2) == 1);
}

TEST_CASE("build_admittance stamps a lone shunt") {
  GridCase g;
  g.buses = {{1, BusType::kSlack, 0, 0, 0.9, 1.1, 0.0, 0.5}};
  g.generators = {{1, 0, 10, -10, 10, {0, 1, 0}}};
  AdmittanceMatrix adm = build_admittance(g);
  CHECK(adm.y(0, 0) == Complex(0.0, 0.5));
}

TEST_CASE("build_admittance matches the per-branch stamp oracle on a ring") {
  GridCase g;
  for (int i = 1; i <= 3; ++i) {
    g.buses.push_back({i, i == 1 ? BusType::kSlack : BusType::kPq, 10, 2, 0.9,
                       1.1, 0.0, 0.0});
  }
  for (int i = 0; i < 3; ++i) {
    g.branches.push_back({i + 1, (i + 1) % 3 + 1, 0.01, 0.08, 0.0, 1.0});
  }
  g.generators = {{1, 0, 100, -50, 50, {0.01, 20, 0}}};
  AdmittanceMatrix adm = build_admittance(g);
  CHECK((adm.y - stamp_oracle(g)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((adm.y - adm.y.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  // no shunts or charging: rows sum to zero (Kirchhoff stamp identity)
  CHECK(adm.y.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("build_admittance rejects zero series impedance") {
  GridCase g = two_bus_line(0.1);
  g.branches[0].x = 0.0;
  CHECK_THROWS_AS(build_admittance(g), ZeroImpedanceBranch);
}

TEST_CASE("stamp additivity over branch-disjoint cases") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> imp(0.01, 0.2);
  GridCase base;
  for (int i = 1; i <= 5; ++i) {
    base.buses.push_back({i, i == 1 ? BusType::kSlack : BusType::kPq, 0, 0,
                          0.9, 1.1, 0.0, 0.0});
  }
  base.generators = {{1, 0, 100, -50, 50, {0.01, 20, 0}}};
  GridCase a = base, b = base, both = base;
  for (int f = 1; f <= 5; ++f) {
    for (int t = f + 1; t <= 5; ++t) {
      Branch br{f, t, imp(rng), imp(rng), 0.0, 1.0};
      ((f + t) % 2 == 0 ? a : b).branches.push_back(br);
      both.branches.push_back(br);
    }
  }
  ComplexMatrix sum = build_admittance(a).y + build_admittance(b).y;
  CHECK((build_admittance(both).y - sum).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("build_gso on the two-bus line") {
  Gso gso = build_gso(build_admittance(two_bus_line(0.1)));
  CHECK(gso.l(0, 0) == doctest::Approx(10.0));
  CHECK(gso.l(0, 1) == doctest::Approx(10.0));
  CHECK(gso.lambda_max == doctest::Approx(20.0).epsilon(1e-5));
  CHECK(gso.l_tilde(0, 0) == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(gso.l_tilde(0, 1) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("build_gso on the identity operator") {
  GridCase g;
  for (int i = 1; i <= 3; ++i) {
    g.buses.push_back({i, i == 1 ? BusType::kSlack : BusType::kPq, 0, 0, 0.9,
                       1.1, 1.0, 0.0});
  }
  g.generators = {{1, 0, 10, -10, 10, {0, 1, 0}}};
  Gso gso = build_gso(build_admittance(g));
  CHECK(gso.lambda_max == doctest::Approx(1.0).epsilon(1e-5));
  CHECK((gso.l_tilde - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("118-bus scaled operator spectrum lies in [-1, 1]") {
  GridCase g = load_case(std::string(GRIDLMP_DATA_DIR) + "/ieee118.case");
  Gso gso = build_gso(build_admittance(g));
  Eigen::SelfAdjointEigenSolver<Matrix> es(gso.l_tilde);
  CHECK(es.eigenvalues().minCoeff() >= -1.0 - 1e-9);
  CHECK(es.eigenvalues().maxCoeff() <= 1.0 + 1e-9);
  // l_tilde identity from the definition
  Matrix rebuilt = 2.0 / gso.lambda_max * gso.l -
                   Matrix::Identity(gso.l.rows(), gso.l.cols());
  CHECK((gso.l_tilde - rebuilt).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("power iteration agrees with the dense eigensolver") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + static_cast<Index>(rng() % 15);
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i; j < n; ++j) {
        m(i, j) = m(j, i) = (u(rng) < 0.4) ? u(rng) : 0.0;
      }
      m(i, i) += 0.2 + u(rng);
    }
    const double est = power_iteration_sym(m, 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    const double top = es.eigenvalues().maxCoeff();
    CHECK(est == doctest::Approx(top).epsilon(1e-6));
    CHECK(est >= m.diagonal().maxCoeff() - 1e-9 * std::abs(top));
  }
}

TEST_CASE("serialize / parse round trip") {
  for (const char* name : {"/ieee14.case", "/ieee118.case"}) {
    GridCase g = load_case(std::string(GRIDLMP_DATA_DIR) + name);
    GridCase h = parse_case(serialize_case(g));
    REQUIRE(h.n_buses() == g.n_buses());
    REQUIRE(h.branches.size() == g.branches.size());
    REQUIRE(h.n_generators() == g.n_generators());
    CHECK(serialize_case(h) == serialize_case(g));
    for (size_t i = 0; i < g.buses.size(); ++i) {
      CHECK(h.buses[i].p_load == g.buses[i].p_load);
      CHECK(h.buses[i].b_shunt == g.buses[i].b_shunt);
    }
  }
}
