#pragma once

// Slow reference QP solver for cross-checking QpSolver. Operator splitting
// (ADMM on  l ≤ C z ≤ u  with over-relaxation and a fixed penalty) after
// Ruiz equilibration, sharing no code path with the active-set solver.

#include <quadctl/qp.hpp>

#include <vector>

namespace quadctl {

inline QpSolution oracle_solve(const QpProblem& problem, double tol = 1e-10, int max_iter = 400000,
                               double rho = 0.1) {
  problem.validate();
  const Eigen::Index n = problem.size();
  const Eigen::Index me = problem.num_eq();
  const Eigen::Index mi = problem.num_ineq();
  const Eigen::Index m = me + mi;

  MatX c(m, n);
  VecX lower(m);
  VecX upper(m);
  if (me > 0) {
    c.topRows(me) = problem.eq_matrix;
    lower.head(me) = problem.eq_vector;
    upper.head(me) = problem.eq_vector;
  }
  if (mi > 0) {
    c.bottomRows(mi) = problem.ineq_matrix;
    lower.tail(mi).setConstant(-kInf);
    upper.tail(mi) = problem.ineq_vector;
  }

  // Ruiz equilibration of [H Cᵀ; C 0]: z = D·z̄, rows of C scaled by E.
  MatX h = problem.hessian;
  VecX q = problem.gradient;
  VecX d = VecX::Ones(n);
  VecX e = VecX::Ones(m);
  for (int pass = 0; pass < 25; ++pass) {
    VecX dv(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double norm = h.col(j).lpNorm<Eigen::Infinity>();
      if (m > 0) norm = std::max(norm, c.col(j).lpNorm<Eigen::Infinity>());
      dv[j] = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
    }
    VecX ev(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double norm = c.row(i).lpNorm<Eigen::Infinity>();
      ev[i] = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
    }
    h = dv.asDiagonal() * h * dv.asDiagonal();
    q = dv.cwiseProduct(q);
    c = ev.asDiagonal() * c * dv.asDiagonal();
    d = d.cwiseProduct(dv);
    e = e.cwiseProduct(ev);
  }
  const VecX lo = lower.cwiseProduct(e);
  const VecX hi = upper.cwiseProduct(e);

  constexpr double sigma = 1e-6;
  constexpr double relax = 1.6;
  VecX rho_v(m);
  for (Eigen::Index i = 0; i < m; ++i) rho_v[i] = i < me ? 1e3 * rho : rho;
  const MatX kkt_matrix = h + sigma * MatX::Identity(n, n) + c.transpose() * rho_v.asDiagonal() * c;
  const Eigen::LDLT<MatX> kkt(kkt_matrix);

  VecX x = VecX::Zero(n);
  VecX w = VecX::Zero(m);
  VecX y = VecX::Zero(m);

  QpSolution sol;
  sol.status = QpStatus::max_iter;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const VecX rhs = sigma * x - q + c.transpose() * (rho_v.cwiseProduct(w) - y);
    const VecX x_tilde = kkt.solve(rhs);
    const VecX w_tilde = c * x_tilde;
    x = relax * x_tilde + (1.0 - relax) * x;
    const VecX w_relaxed = relax * w_tilde + (1.0 - relax) * w;
    VecX w_next = w_relaxed + y.cwiseQuotient(rho_v);
    w_next = w_next.cwiseMax(lo).cwiseMin(hi);
    y += rho_v.cwiseProduct(w_relaxed - w_next);
    w = w_next;

    if (iter % 25 == 0 || iter + 1 == max_iter) {
      // Convergence judged on the original (unscaled) quantities.
      const VecX cx = (c * x).cwiseQuotient(e);
      const VecX wu = w.cwiseQuotient(e);
      const VecX hx = problem.hessian * d.cwiseProduct(x);
      const VecX cty = (c.transpose() * y).cwiseQuotient(d);
      const double r_prim = m > 0 ? (cx - wu).lpNorm<Eigen::Infinity>() : 0.0;
      const double r_dual = (hx + problem.gradient + cty).lpNorm<Eigen::Infinity>();
      const double prim_scale = m > 0 ? std::max(cx.lpNorm<Eigen::Infinity>(), wu.lpNorm<Eigen::Infinity>()) : 0.0;
      const double dual_scale = std::max({hx.lpNorm<Eigen::Infinity>(), cty.lpNorm<Eigen::Infinity>(),
                                          problem.gradient.lpNorm<Eigen::Infinity>()});
      if (r_prim <= tol * (1.0 + prim_scale) && r_dual <= tol * (1.0 + dual_scale)) {
        sol.status = QpStatus::optimal;
        break;
      }
    }
  }

  x = d.cwiseProduct(x);
  y = y.cwiseProduct(e);

  sol.iterations = iter;
  sol.z = x;
  sol.objective = problem.objective(x);
  sol.eq_multipliers = y.head(me);
  sol.ineq_multipliers = y.tail(mi).cwiseMax(0.0);
  sol.residuals = kkt_residuals(problem, x, sol.eq_multipliers, sol.ineq_multipliers);
  return sol;
}

/// Exact reference for small strictly convex problems: tries active sets in
/// order of size (up to `max_active` inequalities), solves each
/// equality-constrained KKT system directly and returns the first point that
/// is primal feasible with nonnegative multipliers. For positive definite H
/// that point is the unique optimum. Status max_iter if none is found.
inline QpSolution enumeration_solve(const QpProblem& problem, int max_active, double tol = 1e-9) {
  problem.validate();
  const Eigen::Index n = problem.size();
  const Eigen::Index me = problem.num_eq();
  const int mi = static_cast<int>(problem.num_ineq());
  const double b_scale = 1.0 + (mi > 0 ? problem.ineq_vector.lpNorm<Eigen::Infinity>() : 0.0);

  QpSolution sol;
  sol.status = QpStatus::max_iter;
  std::vector<int> active;
  int tried = 0;

  auto try_set = [&]() {
    ++tried;
    const Eigen::Index k = static_cast<Eigen::Index>(active.size());
    const Eigen::Index dim = n + me + k;
    MatX kkt = MatX::Zero(dim, dim);
    VecX rhs(dim);
    kkt.topLeftCorner(n, n) = problem.hessian;
    rhs.head(n) = -problem.gradient;
    if (me > 0) {
      kkt.block(n, 0, me, n) = problem.eq_matrix;
      kkt.block(0, n, n, me) = problem.eq_matrix.transpose();
      rhs.segment(n, me) = problem.eq_vector;
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      kkt.block(n + me + j, 0, 1, n) = problem.ineq_matrix.row(active[j]);
      kkt.block(0, n + me + j, n, 1) = problem.ineq_matrix.row(active[j]).transpose();
      rhs[n + me + j] = problem.ineq_vector[active[j]];
    }
    const Eigen::FullPivLU<MatX> lu(kkt);
    if (lu.rank() < dim) return false;
    const VecX sol_vec = lu.solve(rhs);
    const VecX z = sol_vec.head(n);
    const VecX mu_active = sol_vec.tail(k);
    if (k > 0 && mu_active.minCoeff() < -tol) return false;
    if (mi > 0 && (problem.ineq_matrix * z - problem.ineq_vector).maxCoeff() > tol * b_scale) return false;
    sol.z = z;
    sol.eq_multipliers = sol_vec.segment(n, me);
    sol.ineq_multipliers = VecX::Zero(mi);
    for (Eigen::Index j = 0; j < k; ++j) sol.ineq_multipliers[active[j]] = std::max(0.0, mu_active[j]);
    return true;
  };

  // Depth-first over combinations of a fixed size.
  auto search = [&](auto&& self, int start, int remaining) -> bool {
    if (remaining == 0) return try_set();
    for (int i = start; i <= mi - remaining; ++i) {
      active.push_back(i);
      if (self(self, i + 1, remaining - 1)) return true;
      active.pop_back();
    }
    return false;
  };

  for (int size = 0; size <= std::min(max_active, mi); ++size) {
    active.clear();
    if (search(search, 0, size)) {
      sol.status = QpStatus::optimal;
      break;
    }
  }
  sol.iterations = tried;
  if (sol.optimal()) {
    sol.objective = problem.objective(sol.z);
    sol.residuals = kkt_residuals(problem, sol.z, sol.eq_multipliers, sol.ineq_multipliers);
  }
  return sol;
}

}  // namespace quadctl
