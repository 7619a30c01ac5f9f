// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#include "gridlmp/opf.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gridlmp;

namespace {

GridCase one_bus_quadratic(double load_mw = 100.0) {
  GridCase g;
  g.buses = {{1, BusType::kSlack, load_mw, 20.0, 0.94, 1.06, 0.0, 0.5}};
  g.generators = {{1, 0.0, 300.0, -100.0, 100.0, {0.01, 20.0, 0.0}}};
  return g;
}

GridCase two_bus_lossless() {
  GridCase g;
  g.buses = {{1, BusType::kSlack, 0, 0, 0.9, 1.1, 0, 0},
             {2, BusType::kPq, 80.0, 10.0, 0.9, 1.1, 0, 0}};
  g.branches = {{1, 2, 0.0, 0.1, 0.0, 1.0}};
  g.generators = {{1, 0.0, 300.0, -100.0, 100.0, {0.02, 15.0, 0.0}}};
  return g;
}

GridCase three_bus_ring() {
  GridCase g;
  g.buses = {{1, BusType::kSlack, 0, 0, 0.94, 1.06, 0, 0},
             {2, BusType::kPq, 60.0, 15.0, 0.94, 1.06, 0, 0},
             {3, BusType::kPv, 40.0, 10.0, 0.94, 1.06, 0, 0}};
  g.branches = {{1, 2, 0.02, 0.08, 0.02, 1.0},
                {2, 3, 0.025, 0.1, 0.02, 1.0},
                {3, 1, 0.015, 0.06, 0.02, 1.0}};
  g.generators = {{1, 0.0, 200.0, -100.0, 100.0, {0.02, 18.0, 0.0}},
                  {3, 0.0, 80.0, -60.0, 60.0, {0.03, 24.0, 0.0}}};
  return g;
}

// Branch-wise flow summation: the net injection at each bus accumulated from
// individual pi-model branch flows and the bus shunt.
Vector flow_oracle(const GridCase& g, const Vector& v, const Vector& th,
                   const Vector& pg, const Vector& qg) {
  const Index n = g.n_buses();
  const double base = g.base_mva;
  ComplexVector V(n);
  for (Index i = 0; i < n; ++i) V[i] = std::polar(v[i], th[i]);
  Vector res(2 * n);
  for (Index i = 0; i < n; ++i) {
    const Bus& b = g.buses[static_cast<size_t>(i)];
    Complex shunt = V[i] * std::conj(Complex(b.g_shunt, b.b_shunt) * V[i]);
    res[i] = -b.p_load - base * shunt.real();
    res[n + i] = -b.q_load - base * shunt.imag();
  }
  for (const Branch& br : g.branches) {
    Index i = g.bus_index(br.from), j = g.bus_index(br.to);
    Complex ys = 1.0 / Complex(br.r, br.x);
    Complex half(0.0, br.b_charging / 2.0);
    Complex iij = (ys + half) / (br.tap * br.tap) * V[i] - ys / br.tap * V[j];
    Complex iji = (ys + half) * V[j] - ys / br.tap * V[i];
    Complex sij = V[i] * std::conj(iij);
    Complex sji = V[j] * std::conj(iji);
    res[i] -= base * sij.real();
    res[g.n_buses() + i] -= base * sij.imag();
    res[j] -= base * sji.real();
    res[g.n_buses() + j] -= base * sji.imag();
  }
  for (Index k = 0; k < g.n_generators(); ++k) {
    Index i = g.bus_index(g.generators[static_cast<size_t>(k)].bus);
    res[i] += pg[k];
    res[n + i] += qg[k];
  }
  return res;
}

}  // namespace

TEST_CASE("eval_balance on an isolated balanced bus") {
  GridCase g = one_bus_quadratic();
  g.buses[0].b_shunt = 0.0;
  g.buses[0].q_load = 0.0;
  OpfProblem pb = build_problem(g);
  Vector v = Vector::Ones(1), th = Vector::Zero(1);
  Vector pg = Vector::Constant(1, 100.0), qg = Vector::Zero(1);
  Vector r = eval_balance(v, th, pg, qg, pb);
  CHECK(r.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("eval_balance with zero angle difference sees no line flow") {
  OpfProblem pb = build_problem(two_bus_lossless());
  Vector v = Vector::Ones(2), th = Vector::Zero(2);
  Vector pg = Vector::Constant(1, 30.0), qg = Vector::Constant(1, 5.0);
  Vector r = eval_balance(v, th, pg, qg, pb);
  CHECK(r[0] == doctest::Approx(30.0));
  CHECK(r[1] == doctest::Approx(-80.0));
  CHECK(r[2] == doctest::Approx(5.0));
  CHECK(r[3] == doctest::Approx(-10.0));
}

TEST_CASE("eval_balance matches the branch-flow oracle") {
  GridCase g = three_bus_ring();
  g.branches[1].tap = 0.97;  // exercise the off-nominal stamp too
  g.buses[1].b_shunt = 0.1;
  OpfProblem pb = build_problem(g);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uv(0.95, 1.05), uth(-0.3, 0.3),
      up(0.0, 80.0);
  for (int trial = 0; trial < 25; ++trial) {
    Vector v(3), th(3), pg(2), qg(2);
    for (int i = 0; i < 3; ++i) {
      v[i] = uv(rng);
      th[i] = uth(rng);
    }
    for (int k = 0; k < 2; ++k) {
      pg[k] = up(rng);
      qg[k] = up(rng) - 40.0;
    }
    Vector r = eval_balance(v, th, pg, qg, pb);
    Vector o = flow_oracle(g, v, th, pg, qg);
    CHECK((r - o).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("eval_balance rejects mismatched dimensions") {
  OpfProblem pb = build_problem(two_bus_lossless());
  Vector v = Vector::Ones(3), th = Vector::Zero(2);
  Vector pg = Vector::Zero(1), qg = Vector::Zero(1);
  CHECK_THROWS_AS(eval_balance(v, th, pg, qg, pb), DimensionMismatch);
}

TEST_CASE("balance_jacobian matches central finite differences") {
  GridCase g = three_bus_ring();
  OpfProblem pb = build_problem(g);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uv(0.96, 1.04), uth(-0.2, 0.2);
  Vector v(3), th(3);
  for (int i = 0; i < 3; ++i) {
    v[i] = uv(rng);
    th[i] = uth(rng);
  }
  Vector pg = Vector::Zero(2), qg = Vector::Zero(2);
  BalanceJacobian jac = balance_jacobian(v, th, pb);
  const double h = 1e-6;
  for (Index c = 0; c < 3; ++c) {
    Vector vp = v, vm_ = v;
    vp[c] += h;
    vm_[c] -= h;
    Vector fd = (eval_balance(vp, th, pg, qg, pb) -
                 eval_balance(vm_, th, pg, qg, pb)) /
                (2 * h);
    Vector tp = th, tm = th;
    tp[c] += h;
    tm[c] -= h;
    Vector fdth = (eval_balance(v, tp, pg, qg, pb) -
                   eval_balance(v, tm, pg, qg, pb)) /
                  (2 * h);
    for (Index r = 0; r < 3; ++r) {
      CHECK(jac.dp_dv(r, c) ==
            doctest::Approx(fd[r]).epsilon(1e-5).scale(std::max(1.0, std::abs(fd[r]))));
      CHECK(jac.dq_dv(r, c) == doctest::Approx(fd[3 + r]).epsilon(1e-5).scale(
                                   std::max(1.0, std::abs(fd[3 + r]))));
      CHECK(jac.dp_dth(r, c) == doctest::Approx(fdth[r]).epsilon(1e-5).scale(
                                    std::max(1.0, std::abs(fdth[r]))));
      CHECK(jac.dq_dth(r, c) == doctest::Approx(fdth[3 + r]).epsilon(1e-5).scale(
                                    std::max(1.0, std::abs(fdth[3 + r]))));
    }
  }
}

TEST_CASE("one-bus quadratic dispatch prices at marginal cost") {
  OpfProblem pb = build_problem(one_bus_quadratic());
  OpfSolution sol = solve_opf(pb);
  REQUIRE(sol.diagnostics.status == SolveStatus::kConverged);
  CHECK(sol.diagnostics.kkt_residual <= 1e-6);
  CHECK(sol.p_gen[0] == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(sol.lambda[0] == doctest::Approx(22.0).epsilon(1e-6));
  CHECK(sol.objective == doctest::Approx(0.01 * 100 * 100 + 20.0 * 100).epsilon(1e-6));
  CHECK(stationarity_residual(pb, sol) <= 1e-5);
}

TEST_CASE("binding cheap unit sets the price from the expensive one") {
  GridCase g;
  g.buses = {{1, BusType::kSlack, 100.0, 0.0, 0.94, 1.06, 0.0, 0.5}};
  g.generators = {{1, 0.0, 50.0, -50.0, 50.0, {0.0, 10.0, 0.0}},
                  {1, 0.0, 300.0, -50.0, 50.0, {0.0, 30.0, 0.0}}};
  OpfProblem pb = build_problem(g);
  OpfSolution sol = solve_opf(pb);
  REQUIRE(sol.diagnostics.status == SolveStatus::kConverged);
  CHECK(sol.p_gen[0] == doctest::Approx(50.0).epsilon(1e-5));
  CHECK(sol.p_gen[1] == doctest::Approx(50.0).epsilon(1e-5));
  CHECK(sol.lambda[0] == doctest::Approx(30.0).epsilon(1e-5));
  // hand KKT: stationarity of the capped unit gives mu_upper = lambda - b1
  CHECK(sol.mu[0] == doctest::Approx(20.0).epsilon(1e-4));
}

TEST_CASE("lossless two-bus case has a flat price") {
  OpfProblem pb = build_problem(two_bus_lossless());
  OpfSolution sol = solve_opf(pb, {1e-8, 200, 1.0});
  REQUIRE(sol.diagnostics.status == SolveStatus::kConverged);
  CHECK(std::abs(sol.lambda[0] - sol.lambda[1]) < 1e-6);
  const double fd = verify_lmp_by_perturbation(pb, sol, 2, 0.1, {1e-8, 200, 1.0});
  CHECK(fd == doctest::Approx(sol.lambda[1]).epsilon(1e-4));
}

TEST_CASE("perturbation oracle on the one-bus quadratic case") {
  OpfProblem pb = build_problem(one_bus_quadratic());
  OpfSolution sol = solve_opf(pb);
  const double fd = verify_lmp_by_perturbation(pb, sol, 1, 0.1);
  CHECK(fd == doctest::Approx(22.0).epsilon(1e-5));
  CHECK(std::abs(fd - sol.lambda[0]) < 1e-4);
}

TEST_CASE("perturbation oracle on the lossy ring agrees within 1%") {
  OpfProblem pb = build_problem(three_bus_ring());
  OpfSolution sol = solve_opf(pb);
  REQUIRE(sol.diagnostics.status == SolveStatus::kConverged);
  for (int bus : {1, 2, 3}) {
    const double fd = verify_lmp_by_perturbation(pb, sol, bus, 0.1);
    const Index i = pb.grid.bus_index(bus);
    CHECK(std::abs(fd - sol.lambda[i]) <=
          std::max(1e-3, 0.01 * std::abs(sol.lambda[i])));
  }
}

TEST_CASE("a perturbation that flips a generator bound is detected") {
  GridCase g;
  g.buses = {{1, BusType::kSlack, 50.05, 0.0, 0.94, 1.06, 0.0, 0.5}};
  g.generators = {{1, 0.0, 50.0, -50.0, 50.0, {0.01, 10.0, 0.0}},
                  {1, 0.0, 300.0, -50.0, 50.0, {0.01, 30.0, 0.0}}};
  OpfProblem pb = build_problem(g);
  OpfSolution sol = solve_opf(pb);
  REQUIRE(sol.diagnostics.status == SolveStatus::kConverged);
  CHECK_THROWS_AS(verify_lmp_by_perturbation(pb, sol, 1, 0.1), ActiveSetChanged);
}

TEST_CASE("price is nondecreasing in load on the one-bus case") {
  double prev = -1e9;
  for (double load : {50.0, 100.0, 150.0, 200.0, 250.0}) {
    OpfProblem pb = build_problem(one_bus_quadratic(load));
    OpfSolution sol = solve_opf(pb);
    REQUIRE(sol.diagnostics.status == SolveStatus::kConverged);
    CHECK(sol.lambda[0] >= prev - 1e-9);
    prev = sol.lambda[0];
  }
}

TEST_CASE("scaling all costs scales every dual") {
  GridCase g = three_bus_ring();
  OpfProblem pb = build_problem(g);
  const SolveOptions tight{1e-9, 200, 1.0};
  OpfSolution a = solve_opf(pb, tight);
  GridCase g10 = g;
  for (Generator& gen : g10.generators) {
    gen.cost.a *= 10.0;
    gen.cost.b *= 10.0;
    gen.cost.c *= 10.0;
  }
  OpfSolution b = solve_opf(build_problem(g10), tight);
  REQUIRE(a.diagnostics.status == SolveStatus::kConverged);
  REQUIRE(b.diagnostics.status == SolveStatus::kConverged);
  CHECK((a.v_mag - b.v_mag).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((a.v_ang - b.v_ang).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((a.p_gen - b.p_gen).cwiseAbs().maxCoeff() / pb.grid.base_mva < 1e-5);
  for (Index i = 0; i < a.lambda.size(); ++i) {
    CHECK(std::abs(b.lambda[i] - 10 * a.lambda[i]) <=
          1e-6 * std::max(1.0, std::abs(10 * a.lambda[i])));
    CHECK(std::abs(b.nu[i] - 10 * a.nu[i]) <=
          1e-6 * std::max(1.0, std::abs(10 * a.nu[i])));
  }
  for (Index m = 0; m < a.mu.size(); ++m) {
    CHECK(std::abs(b.mu[m] - 10 * a.mu[m]) <=
          1e-6 * std::max(1.0, std::abs(10 * a.mu[m])));
  }
}

TEST_CASE("complementary slackness holds at convergence") {
  OpfProblem pb = build_problem(three_bus_ring());
  OpfSolution sol = solve_opf(pb);
  REQUIRE(sol.diagnostics.status == SolveStatus::kConverged);
  CHECK(sol.diagnostics.complementarity <= 1e-6);
  CHECK(sol.mu.minCoeff() >= 0.0);
  CHECK(stationarity_residual(pb, sol) <= 1e-5);
}

TEST_CASE("IEEE 14-bus solves from a flat start") {
  GridCase g = load_case(std::string(GRIDLMP_DATA_DIR) + "/ieee14.case");
  OpfProblem pb = build_problem(g);
  OpfSolution sol = solve_opf(pb);
  REQUIRE(sol.diagnostics.status == SolveStatus::kConverged);
  CHECK(sol.diagnostics.kkt_residual <= 1e-6);
  CHECK(stationarity_residual(pb, sol) <= 1e-5);
  // all prices in a sane band and not identical across buses (losses)
  CHECK(sol.lambda.minCoeff() > 10.0);
  CHECK(sol.lambda.maxCoeff() < 80.0);
  CHECK(sol.lambda.maxCoeff() - sol.lambda.minCoeff() > 1e-3);
  // generation covers load plus losses
  CHECK(sol.p_gen.sum() > 259.0);
}

TEST_CASE("infeasible bounds are rejected before solving") {
  GridCase g = one_bus_quadratic();
  OpfProblem pb = build_problem(g);
  pb.grid.generators[0].p_min = 400.0;  // above p_max
  CHECK_THROWS_AS(solve_opf(pb), InfeasibleBounds);
}

TEST_CASE("unserved load reports infeasible") {
  GridCase g = one_bus_quadratic(1000.0);  // above p_max = 300
  OpfProblem pb = build_problem(g);
  OpfSolution sol = solve_opf(pb);
  CHECK(sol.diagnostics.status == SolveStatus::kInfeasible);
}
