// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#pragma once

#include <vector>

#include "gridlmp/grid.hpp"
#include "gridlmp/types.hpp"

namespace gridlmp {

// Economic dispatch over the full AC network equations:
//
//   min  sum_k C_k(P_Gk)
//   s.t. P_Gi - P_Li = Re{ V_i conj(I_i) }     per bus
//        Q_Gi - Q_Li = Im{ V_i conj(I_i) }     per bus
//        generator P/Q and bus voltage-magnitude bounds
//
// Variables are per-bus (|V_i|, theta_i) and per-generator (P_Gk, Q_Gk); the
// slack bus angle is eliminated rather than constrained.  The multiplier of
// the active-power balance at bus i is the locational marginal price there.
struct OpfProblem {
  GridCase grid;
  AdmittanceMatrix adm;
  Index slack = 0;  // row index of the slack bus

  Index n_bus() const { return grid.n_buses(); }
  Index n_gen() const { return grid.n_generators(); }
  // layout: [v (N), theta (N-1, slack dropped), p_gen (ng), q_gen (ng)]
  Index n_vars() const { return 2 * n_bus() - 1 + 2 * n_gen(); }
  Index n_eq() const { return 2 * n_bus(); }
  // upper/lower generator P, upper/lower generator Q, upper/lower |V|
  Index n_ineq() const { return 4 * n_gen() + 2 * n_bus(); }
};

OpfProblem build_problem(const GridCase& grid);

enum class SolveStatus { kConverged, kMaxIter, kInfeasible };

struct SolveOptions {
  double tol = 1e-6;   // infinity-norm KKT residual
  int max_iter = 200;
  double mu0 = 1.0;    // initial inequality multipliers
};

struct Diagnostics {
  int iterations = 0;
  double kkt_residual = 0.0;      // max of stationarity/feasibility/complementarity
  double complementarity = 0.0;   // max |s_m mu_m|
  SolveStatus status = SolveStatus::kMaxIter;
};

struct OpfSolution {
  Vector v_mag;   // p.u. per bus
  Vector v_ang;   // rad per bus
  Vector p_gen;   // MW per generator
  Vector q_gen;   // MVAr per generator
  Vector lambda;  // $/MWh per bus
  Vector nu;      // $/MVArh per bus
  // One multiplier per inequality, ordered [P upper, P lower, Q upper,
  // Q lower] per generator block then [V upper, V lower] per bus block.
  // Power-bound entries are $/MWh ($/MVArh); voltage-bound entries are in
  // the scaled objective unit per p.u. volt.
  Vector mu;
  double objective = 0.0;  // $/h
  Diagnostics diagnostics;
};

// Nodal power mismatch [P (MW); Q (MVAr)]: residual_i = P_Gi - P_Li - Re{V_i conj(I_i)}.
// Zero iff the power flow balances.  p_gen/q_gen are per generator in MW/MVAr.
Vector eval_balance(const VectorRef& v_mag, const VectorRef& v_ang,
                    const VectorRef& p_gen, const VectorRef& q_gen,
                    const OpfProblem& problem);

// Analytic derivatives of eval_balance with respect to |V| and theta (full
// angle vector, slack included), in MW per p.u. and MW per rad.
struct BalanceJacobian {
  Matrix dp_dv, dp_dth, dq_dv, dq_dth;
};
BalanceJacobian balance_jacobian(const VectorRef& v_mag, const VectorRef& v_ang,
                                 const OpfProblem& problem);

// Primal-dual log-barrier path following with monotone centering (sigma 0.2),
// fraction-to-boundary steps and a dense factorization of the reduced KKT
// system.  MaxIter returns the best iterate found; singular KKT assemblies
// throw SingularKktSystem after regularization retries.
OpfSolution solve_opf(const OpfProblem& problem, const SolveOptions& opts = {});

// Central difference of the optimal cost under a +-eps_mw load perturbation at
// one bus, by two re-solves: (f(P_L + eps) - f(P_L - eps)) / (2 eps) in $/MWh.
// Matches solution.lambda at that bus within max(1e-3, 1e-2 |lambda|) for
// eps = 0.1 MW when the binding set is unchanged; throws ActiveSetChanged when
// the two solves disagree on the binding set, ResolveFailed when either solve
// does not converge.
double verify_lmp_by_perturbation(const OpfProblem& problem,
                                  const OpfSolution& solution, int bus_id,
                                  double eps_mw, const SolveOptions& opts = {});

// Infinity norm of the analytic Lagrangian gradient at the returned point;
// solver-independent optimality evidence used by the test suites.
double stationarity_residual(const OpfProblem& problem, const OpfSolution& sol);

}  // namespace gridlmp
