// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#include "gridlmp/opf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridlmp {

namespace {

constexpr double kSigma = 0.2;          // monotone centering factor
constexpr double kFtb = 0.99995;        // fraction-to-boundary
constexpr double kInfeasTol = 1e-4;     // primal residual for kInfeasible

// Per-unit copies of the quantities the solver iterates on.
struct PuData {
  Vector p_load, q_load;              // per bus
  Vector pg_min, pg_max, qg_min, qg_max;  // per generator
  Vector cost_a, cost_b;              // scaled: f_hat = a*base*pg^2 + b*pg
  Matrix gen_incidence;               // N x ng, 1 when generator sits at bus
};

PuData make_pu(const OpfProblem& pb) {
  const double base = pb.grid.base_mva;
  const Index n = pb.n_bus(), ng = pb.n_gen();
  PuData pu;
  pu.p_load.resize(n);
  pu.q_load.resize(n);
  for (Index i = 0; i < n; ++i) {
    pu.p_load[i] = pb.grid.buses[static_cast<size_t>(i)].p_load / base;
    pu.q_load[i] = pb.grid.buses[static_cast<size_t>(i)].q_load / base;
  }
  pu.pg_min.resize(ng);
  pu.pg_max.resize(ng);
  pu.qg_min.resize(ng);
  pu.qg_max.resize(ng);
  pu.cost_a.resize(ng);
  pu.cost_b.resize(ng);
  pu.gen_incidence = Matrix::Zero(n, ng);
  for (Index k = 0; k < ng; ++k) {
    const Generator& g = pb.grid.generators[static_cast<size_t>(k)];
    pu.pg_min[k] = g.p_min / base;
    pu.pg_max[k] = g.p_max / base;
    pu.qg_min[k] = g.q_min / base;
    pu.qg_max[k] = g.q_max / base;
    pu.cost_a[k] = g.cost.a * base;  // d(f/base)/d pg_pu = 2 a base pg + b
    pu.cost_b[k] = g.cost.b;
    pu.gen_incidence(pb.adm.bus_order.at(g.bus), k) = 1.0;
  }
  return pu;
}

// Variable layout within z: [v (n), theta without slack (n-1), pg, qg].
struct VarMap {
  Index n, ng, slack;
  Index v0() const { return 0; }
  Index th0() const { return n; }
  Index pg0() const { return 2 * n - 1; }
  Index qg0() const { return 2 * n - 1 + ng; }
  Index size() const { return 2 * n - 1 + 2 * ng; }
  Index theta_var(Index bus) const {
    if (bus == slack) return -1;
    return th0() + (bus < slack ? bus : bus - 1);
  }
  Index theta_bus(Index k) const { return k < slack ? k : k + 1; }
};

// h_m(z) = sign_m * z[var_m] - bound_m <= 0
struct Ineq {
  Index var;
  double sign;
  double bound;
};

std::vector<Ineq> make_ineqs(const VarMap& vm, const PuData& pu,
                             const OpfProblem& pb) {
  std::vector<Ineq> hs;
  hs.reserve(static_cast<size_t>(pb.n_ineq()));
  for (Index k = 0; k < vm.ng; ++k) hs.push_back({vm.pg0() + k, 1.0, pu.pg_max[k]});
  for (Index k = 0; k < vm.ng; ++k) hs.push_back({vm.pg0() + k, -1.0, -pu.pg_min[k]});
  for (Index k = 0; k < vm.ng; ++k) hs.push_back({vm.qg0() + k, 1.0, pu.qg_max[k]});
  for (Index k = 0; k < vm.ng; ++k) hs.push_back({vm.qg0() + k, -1.0, -pu.qg_min[k]});
  for (Index i = 0; i < vm.n; ++i) {
    hs.push_back({vm.v0() + i, 1.0, pb.grid.buses[static_cast<size_t>(i)].v_max});
  }
  for (Index i = 0; i < vm.n; ++i) {
    hs.push_back({vm.v0() + i, -1.0, -pb.grid.buses[static_cast<size_t>(i)].v_min});
  }
  return hs;
}

struct PfEval {
  ComplexVector V, I;
  Vector p, q;  // net injections Re/Im{V conj(I)}, p.u.
};

PfEval eval_injections(const ComplexMatrix& y, const VectorRef& v,
                       const VectorRef& th) {
  PfEval e;
  const Index n = v.size();
  e.V.resize(n);
  for (Index i = 0; i < n; ++i) e.V[i] = std::polar(v[i], th[i]);
  e.I = y * e.V;
  ComplexVector s = e.V.array() * e.I.array().conjugate();
  e.p = s.real();
  e.q = s.imag();
  return e;
}

struct JacBlocks {
  Matrix dpdv, dpdth, dqdv, dqdth;  // N x N, w.r.t. full theta
};

JacBlocks injection_jacobian(const ComplexMatrix& y, const PfEval& e,
                             const VectorRef& v) {
  ComplexVector unit = e.V.array() / v.array().cast<Complex>();
  ComplexMatrix y_dv = y * e.V.asDiagonal();
  ComplexMatrix ds_dth =
      Complex(0, 1) * e.V.asDiagonal() *
      (ComplexMatrix(e.I.asDiagonal()) - y_dv).conjugate();
  ComplexMatrix ds_dv = ComplexMatrix(unit.asDiagonal()) * e.I.conjugate().asDiagonal() +
                        ComplexMatrix(e.V.asDiagonal()) * (y * unit.asDiagonal()).conjugate();
  JacBlocks j;
  j.dpdth = ds_dth.real();
  j.dqdth = ds_dth.imag();
  j.dpdv = ds_dv.real();
  j.dqdv = ds_dv.imag();
  return j;
}

// Hessian blocks of sum_i (wp_i p_i + wq_i q_i) over (theta, v), full theta.
// Derived from psi = w^T (V o conj(Y V)) with w = wp - j wq; the real part of
// the complex Hessian is the Hessian of Re{psi}.
struct HessBlocks {
  Matrix thth, vth, vv;  // vth(a,b) = d2 / dv_a dtheta_b
};

HessBlocks injection_hessian(const ComplexMatrix& y, const PfEval& e,
                             const VectorRef& v, const VectorRef& wp,
                             const VectorRef& wq) {
  ComplexVector w = wp.cast<Complex>() - Complex(0, 1) * wq.cast<Complex>();
  ComplexVector wV = w.array() * e.V.array();
  ComplexVector m = wV.array() * e.I.array().conjugate();
  ComplexVector c = y.adjoint() * wV;
  ComplexVector nv = e.V.conjugate().array() * c.array();
  ComplexMatrix term2 = wV.asDiagonal() * y.conjugate() * e.V.conjugate().asDiagonal();
  ComplexMatrix sym = term2 + term2.transpose();

  ComplexMatrix hthth = sym;
  hthth.diagonal() -= m + nv;

  Vector inv_v = v.cwiseInverse();
  ComplexMatrix hvv = inv_v.asDiagonal() * sym * inv_v.asDiagonal();

  ComplexMatrix inner = term2.transpose() - term2;
  inner.diagonal() += m - nv;
  ComplexMatrix hvth = Complex(0, 1) * (inv_v.asDiagonal() * inner);

  HessBlocks h;
  h.thth = hthth.real();
  h.vth = hvth.real();
  h.vv = hvv.real();
  return h;
}

struct Iterate {
  Vector z, s, y, mu;  // y = [lambda; nu] multipliers of the 2N balances
};

struct Residuals {
  Vector r_dual;   // stationarity, size nv
  Vector r_eq;     // balance residuals g(z), size 2N
  Vector r_ineq;   // h(z) + s, size m
  double comp = 0.0;
  double kkt = 0.0;
};

// Splits z into named views and evaluates constraint data shared by the
// residual and KKT assembly paths.
struct EvalContext {
  Vector v, th_full, pg, qg;
  PfEval pf;
  JacBlocks jac;
  Vector grad_f;  // per pg coordinate, scaled cost gradient
  Vector h;       // inequality values
};

EvalContext eval_point(const OpfProblem& pb, const VarMap& vm, const PuData& pu,
                       const std::vector<Ineq>& hs, const Vector& z) {
  EvalContext cx;
  cx.v = z.segment(vm.v0(), vm.n);
  cx.th_full = Vector::Zero(vm.n);
  for (Index k = 0; k < vm.n - 1; ++k) cx.th_full[vm.theta_bus(k)] = z[vm.th0() + k];
  cx.pg = z.segment(vm.pg0(), vm.ng);
  cx.qg = z.segment(vm.qg0(), vm.ng);
  cx.pf = eval_injections(pb.adm.y, cx.v, cx.th_full);
  cx.jac = injection_jacobian(pb.adm.y, cx.pf, cx.v);
  cx.grad_f = 2.0 * pu.cost_a.cwiseProduct(cx.pg) + pu.cost_b;
  cx.h.resize(static_cast<Index>(hs.size()));
  for (size_t m = 0; m < hs.size(); ++m) {
    cx.h[static_cast<Index>(m)] = hs[m].sign * z[hs[m].var] - hs[m].bound;
  }
  return cx;
}

// J_g^T y accumulated into the dual residual without forming J_g explicitly.
Vector dual_residual(const VarMap& vm, const PuData& pu,
                     const std::vector<Ineq>& hs, const EvalContext& cx,
                     const Vector& y, const Vector& mu) {
  const Index n = vm.n, ng = vm.ng;
  Vector lam = y.head(n), nu = y.tail(n);
  Vector rd = Vector::Zero(vm.size());
  // balance rows enter as g = A p_gen - load - p(v,th); d/dv is -dpdv etc.
  rd.segment(vm.v0(), n) = cx.jac.dpdv.transpose() * lam + cx.jac.dqdv.transpose() * nu;
  Vector rth = cx.jac.dpdth.transpose() * lam + cx.jac.dqdth.transpose() * nu;
  for (Index k = 0; k < n - 1; ++k) rd[vm.th0() + k] = rth[vm.theta_bus(k)];
  rd.segment(vm.pg0(), ng) =
      cx.grad_f - pu.gen_incidence.transpose() * lam;
  rd.segment(vm.qg0(), ng) = -pu.gen_incidence.transpose() * nu;
  for (size_t m = 0; m < hs.size(); ++m) {
    rd[hs[m].var] += hs[m].sign * mu[static_cast<Index>(m)];
  }
  return rd;
}

Residuals eval_residuals(const VarMap& vm, const PuData& pu,
                         const std::vector<Ineq>& hs, const EvalContext& cx,
                         const Iterate& it) {
  Residuals r;
  r.r_eq.resize(2 * vm.n);
  r.r_eq.head(vm.n) = pu.gen_incidence * cx.pg - pu.p_load - cx.pf.p;
  r.r_eq.tail(vm.n) = pu.gen_incidence * cx.qg - pu.q_load - cx.pf.q;
  r.r_ineq = cx.h + it.s;
  r.r_dual = dual_residual(vm, pu, hs, cx, it.y, it.mu);
  r.comp = (it.s.array() * it.mu.array()).abs().maxCoeff();
  r.kkt = std::max({r.r_dual.cwiseAbs().maxCoeff(), r.r_eq.cwiseAbs().maxCoeff(),
                    r.r_ineq.cwiseAbs().maxCoeff(), r.comp});
  return r;
}

Matrix equality_jacobian(const VarMap& vm, const PuData& pu,
                         const EvalContext& cx) {
  const Index n = vm.n, ng = vm.ng;
  Matrix jg = Matrix::Zero(2 * n, vm.size());
  jg.block(0, vm.v0(), n, n) = -cx.jac.dpdv;
  jg.block(n, vm.v0(), n, n) = -cx.jac.dqdv;
  for (Index k = 0; k < n - 1; ++k) {
    jg.block(0, vm.th0() + k, n, 1) = -cx.jac.dpdth.col(vm.theta_bus(k));
    jg.block(n, vm.th0() + k, n, 1) = -cx.jac.dqdth.col(vm.theta_bus(k));
  }
  jg.block(0, vm.pg0(), n, ng) = pu.gen_incidence;
  jg.block(n, vm.qg0(), n, ng) = pu.gen_incidence;
  return jg;
}

// Lagrangian Hessian w.r.t. z (cost + balance curvature; bounds are linear).
Matrix lagrangian_hessian(const OpfProblem& pb, const VarMap& vm,
                          const PuData& pu, const EvalContext& cx,
                          const Vector& y) {
  const Index n = vm.n, ng = vm.ng;
  HessBlocks hb = injection_hessian(pb.adm.y, cx.pf, cx.v, y.head(n), y.tail(n));
  Matrix w = Matrix::Zero(vm.size(), vm.size());
  w.block(vm.v0(), vm.v0(), n, n) = hb.vv;
  for (Index k = 0; k < n - 1; ++k) {
    const Index b = vm.theta_bus(k);
    w.block(vm.v0(), vm.th0() + k, n, 1) = hb.vth.col(b);
    w.block(vm.th0() + k, vm.v0(), 1, n) = hb.vth.col(b).transpose();
    for (Index k2 = 0; k2 < n - 1; ++k2) {
      w(vm.th0() + k, vm.th0() + k2) = hb.thth(b, vm.theta_bus(k2));
    }
  }
  for (Index k = 0; k < ng; ++k) {
    w(vm.pg0() + k, vm.pg0() + k) = 2.0 * pu.cost_a[k];
  }
  return w;
}

OpfSolution pack_solution(const OpfProblem& pb, const VarMap& vm,
                          const Iterate& it, const Residuals& res,
                          int iterations, SolveStatus status) {
  const double base = pb.grid.base_mva;
  OpfSolution sol;
  sol.v_mag = it.z.segment(vm.v0(), vm.n);
  sol.v_ang = Vector::Zero(vm.n);
  for (Index k = 0; k < vm.n - 1; ++k) {
    sol.v_ang[vm.theta_bus(k)] = it.z[vm.th0() + k];
  }
  sol.p_gen = it.z.segment(vm.pg0(), vm.ng) * base;
  sol.q_gen = it.z.segment(vm.qg0(), vm.ng) * base;
  sol.lambda = it.y.head(vm.n);
  sol.nu = it.y.tail(vm.n);
  sol.mu = it.mu;
  sol.objective = 0.0;
  for (Index k = 0; k < vm.ng; ++k) {
    const GenCost& c = pb.grid.generators[static_cast<size_t>(k)].cost;
    const double p_mw = sol.p_gen[k];
    sol.objective += c.a * p_mw * p_mw + c.b * p_mw + c.c;
  }
  sol.diagnostics.iterations = iterations;
  sol.diagnostics.kkt_residual = res.kkt;
  sol.diagnostics.complementarity = res.comp;
  sol.diagnostics.status = status;
  return sol;
}

double boundary_step(const Vector& x, const Vector& dx, double scale) {
  double alpha = 1.0;
  for (Index i = 0; i < x.size(); ++i) {
    if (dx[i] < 0.0) alpha = std::min(alpha, -scale * x[i] / dx[i]);
  }
  return alpha;
}

}  // namespace

OpfProblem build_problem(const GridCase& grid) {
  validate(grid);
  OpfProblem pb;
  pb.grid = grid;
  pb.adm = build_admittance(grid);
  pb.slack = grid.slack_index();
  return pb;
}

Vector eval_balance(const VectorRef& v_mag, const VectorRef& v_ang,
                    const VectorRef& p_gen, const VectorRef& q_gen,
                    const OpfProblem& problem) {
  const Index n = problem.n_bus(), ng = problem.n_gen();
  if (v_mag.size() != n || v_ang.size() != n || p_gen.size() != ng ||
      q_gen.size() != ng) {
    throw DimensionMismatch("eval_balance: argument sizes do not match problem");
  }
  const double base = problem.grid.base_mva;
  PfEval e = eval_injections(problem.adm.y, v_mag, v_ang);
  Vector res(2 * n);
  res.head(n) = -base * e.p;
  res.tail(n) = -base * e.q;
  for (Index k = 0; k < ng; ++k) {
    const Index i = problem.adm.bus_order.at(
        problem.grid.generators[static_cast<size_t>(k)].bus);
    res[i] += p_gen[k];
    res[n + i] += q_gen[k];
  }
  for (Index i = 0; i < n; ++i) {
    res[i] -= problem.grid.buses[static_cast<size_t>(i)].p_load;
    res[n + i] -= problem.grid.buses[static_cast<size_t>(i)].q_load;
  }
  return res;
}

BalanceJacobian balance_jacobian(const VectorRef& v_mag, const VectorRef& v_ang,
                                 const OpfProblem& problem) {
  if (v_mag.size() != problem.n_bus() || v_ang.size() != problem.n_bus()) {
    throw DimensionMismatch("balance_jacobian: argument sizes do not match");
  }
  PfEval e = eval_injections(problem.adm.y, v_mag, v_ang);
  JacBlocks j = injection_jacobian(problem.adm.y, e, v_mag);
  const double base = problem.grid.base_mva;
  // residual = injections - network flow, so the network part enters negated
  return BalanceJacobian{-base * j.dpdv, -base * j.dpdth, -base * j.dqdv,
                         -base * j.dqdth};
}

OpfSolution solve_opf(const OpfProblem& problem, const SolveOptions& opts) {
  for (const Generator& g : problem.grid.generators) {
    if (g.p_min > g.p_max || g.q_min > g.q_max) {
      throw InfeasibleBounds("generator at bus " + std::to_string(g.bus) +
                             " has p_min > p_max or q_min > q_max");
    }
  }
  for (const Bus& b : problem.grid.buses) {
    if (b.v_min > b.v_max) {
      throw InfeasibleBounds("bus " + std::to_string(b.id) + " has v_min > v_max");
    }
  }

  const VarMap vm{problem.n_bus(), problem.n_gen(), problem.slack};
  const PuData pu = make_pu(problem);
  const std::vector<Ineq> hs = make_ineqs(vm, pu, problem);
  const Index nv = vm.size(), neq = 2 * vm.n;
  const Index m = static_cast<Index>(hs.size());

  Iterate it;
  it.z.resize(nv);
  for (Index i = 0; i < vm.n; ++i) {
    const Bus& b = problem.grid.buses[static_cast<size_t>(i)];
    it.z[vm.v0() + i] = std::clamp(1.0, b.v_min, b.v_max);
  }
  it.z.segment(vm.th0(), vm.n - 1).setZero();
  it.z.segment(vm.pg0(), vm.ng) = 0.5 * (pu.pg_min + pu.pg_max);
  it.z.segment(vm.qg0(), vm.ng) = 0.5 * (pu.qg_min + pu.qg_max);
  it.y = Vector::Zero(neq);
  it.mu = Vector::Constant(m, opts.mu0);
  {
    EvalContext cx0 = eval_point(problem, vm, pu, hs, it.z);
    it.s = (-cx0.h).cwiseMax(0.0).array() + 0.1;
  }

  Iterate best = it;
  Residuals best_res;
  best_res.kkt = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool have_best = false;
  int iter = 0;

  for (;; ++iter) {
    EvalContext cx = eval_point(problem, vm, pu, hs, it.z);
    Residuals res = eval_residuals(vm, pu, hs, cx, it);
    if (!std::isfinite(res.kkt)) break;
    if (res.kkt < best_res.kkt) {
      best = it;
      best_res = res;
      have_best = true;
    }
    if (res.kkt <= opts.tol) {
      converged = true;
      break;
    }
    if (iter >= opts.max_iter) break;

    const double tau = kSigma * it.s.dot(it.mu) / static_cast<double>(m);

    Matrix w = lagrangian_hessian(problem, vm, pu, cx, it.y);
    Vector mu_over_s = it.mu.cwiseQuotient(it.s);
    for (Index q = 0; q < m; ++q) w(hs[static_cast<size_t>(q)].var,
                                    hs[static_cast<size_t>(q)].var) += mu_over_s[q];
    Matrix jg = equality_jacobian(vm, pu, cx);

    // rc = s o mu - tau e;  rhs1 = -r_dual + Jh^T S^-1 (rc - mu o r_ineq)
    Vector rc = it.s.cwiseProduct(it.mu).array() - tau;
    Vector fold = (rc - it.mu.cwiseProduct(res.r_ineq)).cwiseQuotient(it.s);
    Vector rhs1 = -res.r_dual;
    for (Index q = 0; q < m; ++q) {
      rhs1[hs[static_cast<size_t>(q)].var] += hs[static_cast<size_t>(q)].sign * fold[q];
    }

    const Index dim = nv + neq;
    Matrix kkt = Matrix::Zero(dim, dim);
    Vector rhs(dim);
    kkt.topLeftCorner(nv, nv) = w;
    kkt.topRightCorner(nv, neq) = -jg.transpose();
    kkt.bottomLeftCorner(neq, nv) = -jg;
    rhs.head(nv) = rhs1;
    rhs.tail(neq) = res.r_eq;

    // dense LU with escalating regularization on breakdown
    Vector step;
    double delta = 0.0;
    bool solved = false;
    for (int attempt = 0; attempt <= 6; ++attempt) {
      Matrix kreg = kkt;
      if (delta > 0.0) {
        kreg.topLeftCorner(nv, nv).diagonal().array() += delta;
        kreg.bottomRightCorner(neq, neq).diagonal().array() -= delta;
      }
      Eigen::PartialPivLU<Matrix> lu(kreg);
      step = lu.solve(rhs);
      const double lin_res = (kreg * step - rhs).cwiseAbs().maxCoeff();
      if (step.allFinite() && lin_res <= 1e-6 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) {
        solved = true;
        break;
      }
      delta = (delta == 0.0) ? 1e-10 : delta * 100.0;
    }
    if (!solved) {
      // An irrecoverably singular system on well-scaled iterates points at a
      // structural defect; late-stage breakdown on a stalled solve is reported
      // through the max-iteration / infeasible path with the best iterate.
      if (!have_best || iter == 0) {
        throw SingularKktSystem("KKT factorization failed after regularization");
      }
      break;
    }

    Vector dz = step.head(nv);
    Vector dy = step.tail(neq);
    Vector ds = -res.r_ineq - [&] {
      Vector jh_dz = Vector::Zero(m);
      for (Index q = 0; q < m; ++q) {
        jh_dz[q] = hs[static_cast<size_t>(q)].sign * dz[hs[static_cast<size_t>(q)].var];
      }
      return jh_dz;
    }();
    Vector dmu = (tau - (it.s.cwiseProduct(it.mu) + it.mu.cwiseProduct(ds)).array())
                     .matrix()
                     .cwiseQuotient(it.s);

    double alpha_p = boundary_step(it.s, ds, kFtb);
    double alpha_d = boundary_step(it.mu, dmu, kFtb);
    // keep voltage magnitudes away from zero
    for (Index i = 0; i < vm.n; ++i) {
      const double vi = it.z[vm.v0() + i], dvi = dz[vm.v0() + i];
      if (dvi < 0.0 && vi + alpha_p * dvi < 1e-3) {
        alpha_p = std::min(alpha_p, (vi - 1e-3) / -dvi);
      }
    }

    it.z += alpha_p * dz;
    it.s += alpha_p * ds;
    it.y += alpha_d * dy;
    it.mu += alpha_d * dmu;
  }

  SolveStatus status;
  if (converged) {
    status = SolveStatus::kConverged;
  } else {
    const double feas = best_res.r_eq.size() ? best_res.r_eq.cwiseAbs().maxCoeff() : 0.0;
    status = feas > kInfeasTol ? SolveStatus::kInfeasible : SolveStatus::kMaxIter;
  }
  return pack_solution(problem, vm, best, best_res, iter, status);
}

double stationarity_residual(const OpfProblem& problem, const OpfSolution& sol) {
  const VarMap vm{problem.n_bus(), problem.n_gen(), problem.slack};
  const PuData pu = make_pu(problem);
  const std::vector<Ineq> hs = make_ineqs(vm, pu, problem);
  Vector z(vm.size());
  z.segment(vm.v0(), vm.n) = sol.v_mag;
  for (Index k = 0; k < vm.n - 1; ++k) {
    z[vm.th0() + k] = sol.v_ang[vm.theta_bus(k)];
  }
  z.segment(vm.pg0(), vm.ng) = sol.p_gen / problem.grid.base_mva;
  z.segment(vm.qg0(), vm.ng) = sol.q_gen / problem.grid.base_mva;
  Vector y(2 * vm.n);
  y.head(vm.n) = sol.lambda;
  y.tail(vm.n) = sol.nu;
  EvalContext cx = eval_point(problem, vm, pu, hs, z);
  return dual_residual(vm, pu, hs, cx, y, sol.mu).cwiseAbs().maxCoeff();
}

namespace {

// Binding when the multiplier dominates the slack; at tol 1e-6 converged
// points the two differ by several orders of magnitude either way.
std::vector<bool> binding_set(const OpfSolution& sol, const OpfProblem& pb,
                              const VarMap& vm, const std::vector<Ineq>& hs) {
  Vector z(vm.size());
  z.segment(vm.v0(), vm.n) = sol.v_mag;
  for (Index k = 0; k < vm.n - 1; ++k) z[vm.th0() + k] = sol.v_ang[vm.theta_bus(k)];
  z.segment(vm.pg0(), vm.ng) = sol.p_gen / pb.grid.base_mva;
  z.segment(vm.qg0(), vm.ng) = sol.q_gen / pb.grid.base_mva;
  std::vector<bool> bind(hs.size());
  for (size_t q = 0; q < hs.size(); ++q) {
    const double h = hs[q].sign * z[hs[q].var] - hs[q].bound;
    bind[q] = sol.mu[static_cast<Index>(q)] > std::abs(h);
  }
  return bind;
}

}  // namespace

double verify_lmp_by_perturbation(const OpfProblem& problem,
                                  const OpfSolution& solution, int bus_id,
                                  double eps_mw, const SolveOptions& opts) {
  if (solution.diagnostics.status != SolveStatus::kConverged) {
    throw ResolveFailed("base solution did not converge");
  }
  const Index bi = problem.grid.bus_index(bus_id);
  if (bi < 0) throw DimensionMismatch("unknown bus id " + std::to_string(bus_id));

  auto resolve = [&](double delta) {
    OpfProblem perturbed = problem;
    perturbed.grid.buses[static_cast<size_t>(bi)].p_load += delta;
    OpfSolution s = solve_opf(perturbed, opts);
    if (s.diagnostics.status != SolveStatus::kConverged) {
      throw ResolveFailed("perturbed solve did not converge");
    }
    return s;
  };
  OpfSolution plus = resolve(eps_mw);
  OpfSolution minus = resolve(-eps_mw);

  const VarMap vm{problem.n_bus(), problem.n_gen(), problem.slack};
  const PuData pu = make_pu(problem);
  const std::vector<Ineq> hs = make_ineqs(vm, pu, problem);
  if (binding_set(plus, problem, vm, hs) != binding_set(minus, problem, vm, hs)) {
    throw ActiveSetChanged("binding set differs between the +/- solves");
  }
  return (plus.objective - minus.objective) / (2.0 * eps_mw);
}

}  // namespace gridlmp
