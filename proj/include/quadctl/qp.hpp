#pragma once

// Dense convex QP
//
//   minimize    ½ zᵀ H z + gᵀ z
//   subject to  A_eq z = b_eq
//               A_in z ≤ b_in
//
// solved with the Goldfarb–Idnani dual active-set method. A positive
// definite H is factorized once; a merely semi-definite H is handled by
// proximal-point iterations on top of the same solver.

#include <quadctl/common.hpp>

#include <string>
#include <vector>

namespace quadctl {

struct QpProblem {
  MatX hessian;
  VecX gradient;
  MatX eq_matrix;
  VecX eq_vector;
  MatX ineq_matrix;
  VecX ineq_vector;

  QpProblem() = default;
  QpProblem(MatX h, VecX g) : hessian(std::move(h)), gradient(std::move(g)) {
    const auto n = gradient.size();
    eq_matrix.resize(0, n);
    ineq_matrix.resize(0, n);
  }

  Eigen::Index size() const { return gradient.size(); }
  Eigen::Index num_eq() const { return eq_vector.size(); }
  Eigen::Index num_ineq() const { return ineq_vector.size(); }

  double objective(const VecX& z) const { return 0.5 * z.dot(hessian * z) + gradient.dot(z); }

  void validate() const {
    const auto n = size();
    if (hessian.rows() != n || hessian.cols() != n) throw std::invalid_argument("QpProblem: H must be n×n");
    if (eq_matrix.rows() != num_eq() || (num_eq() > 0 && eq_matrix.cols() != n)) {
      throw std::invalid_argument("QpProblem: equality block has inconsistent dimensions");
    }
    if (ineq_matrix.rows() != num_ineq() || (num_ineq() > 0 && ineq_matrix.cols() != n)) {
      throw std::invalid_argument("QpProblem: inequality block has inconsistent dimensions");
    }
  }
};

enum class QpStatus { optimal, max_iter, infeasible };

inline const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::infeasible: return "infeasible";
  }
  return "?";
}

/// KKT residuals, each scaled by (1 + magnitude of the terms involved).
struct QpResiduals {
  double stationarity = 0.0;
  double primal_eq = 0.0;
  double primal_ineq = 0.0;
  double complementarity = 0.0;
  double dual_ineq = 0.0;

  double max() const {
    return std::max({stationarity, primal_eq, primal_ineq, complementarity, dual_ineq});
  }
};

struct QpSolution {
  VecX z;
  double objective = 0.0;
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
  VecX eq_multipliers;    // λ:  H z + g + A_eqᵀ λ + A_inᵀ μ = 0
  VecX ineq_multipliers;  // μ ≥ 0
  QpResiduals residuals;

  bool optimal() const { return status == QpStatus::optimal; }
};

struct QpSettings {
  double tol = 1e-8;
  int max_iter = 200;
};

inline QpResiduals kkt_residuals(const QpProblem& p, const VecX& z, const VecX& lambda, const VecX& mu) {
  QpResiduals res;
  VecX grad = p.hessian * z + p.gradient;
  double scale = 1.0 + (p.hessian * z).lpNorm<Eigen::Infinity>() + p.gradient.lpNorm<Eigen::Infinity>();
  if (p.num_eq() > 0) {
    grad += p.eq_matrix.transpose() * lambda;
    scale += (p.eq_matrix.transpose() * lambda).lpNorm<Eigen::Infinity>();
    const VecX r = p.eq_matrix * z - p.eq_vector;
    res.primal_eq = r.lpNorm<Eigen::Infinity>() / (1.0 + p.eq_vector.lpNorm<Eigen::Infinity>());
  }
  if (p.num_ineq() > 0) {
    grad += p.ineq_matrix.transpose() * mu;
    scale += (p.ineq_matrix.transpose() * mu).lpNorm<Eigen::Infinity>();
    const VecX slack = p.ineq_vector - p.ineq_matrix * z;
    const double bscale = 1.0 + p.ineq_vector.lpNorm<Eigen::Infinity>();
    res.primal_ineq = std::max(0.0, -slack.minCoeff()) / bscale;
    res.complementarity = mu.cwiseProduct(slack).lpNorm<Eigen::Infinity>() / bscale;
    res.dual_ineq = std::max(0.0, -mu.minCoeff());
  }
  res.stationarity = grad.lpNorm<Eigen::Infinity>() / scale;
  return res;
}

/// Holds factorization workspace; reuse one instance per control thread.
class QpSolver {
 public:
  explicit QpSolver(QpSettings settings = {}) : settings_(settings) {}

  const QpSettings& settings() const { return settings_; }

  QpSolution solve(const QpProblem& problem) {
    problem.validate();
    const auto n = problem.size();
    QpSolution sol;
    if (n == 0) {
      sol.status = QpStatus::optimal;
      sol.z.resize(0);
      sol.eq_multipliers = VecX::Zero(problem.num_eq());
      sol.ineq_multipliers = VecX::Zero(problem.num_ineq());
      return sol;
    }

    Eigen::LLT<MatX> llt(problem.hessian);
    const double hscale = std::max(1.0, problem.hessian.diagonal().cwiseAbs().maxCoeff());
    bool definite = llt.info() == Eigen::Success;
    if (definite) {
      const double min_pivot = llt.matrixL().toDenseMatrix().diagonal().cwiseAbs().minCoeff();
      definite = min_pivot * min_pivot > 1e-12 * hscale;
    }

    if (definite) {
      sol = solve_definite(problem, problem.gradient, llt, settings_.max_iter);
    } else {
      sol = solve_proximal(problem, 1e-3 * hscale);
    }
    sol.objective = sol.z.size() ? problem.objective(sol.z) : 0.0;
    sol.residuals = kkt_residuals(problem, sol.z, sol.eq_multipliers, sol.ineq_multipliers);
    return sol;
  }

 private:
  QpSolution solve_proximal(const QpProblem& problem, double rho) {
    const auto n = problem.size();
    const MatX h = problem.hessian + rho * MatX::Identity(n, n);
    Eigen::LLT<MatX> llt(h);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("QpSolver: H is not positive semi-definite");

    QpSolution sol;
    sol.z = VecX::Zero(n);
    int total = 0;
    constexpr int kMaxOuter = 5000;
    for (int outer = 0; outer < kMaxOuter; ++outer) {
      const VecX g = problem.gradient - rho * sol.z;
      QpSolution inner = solve_definite(problem, g, llt, settings_.max_iter);
      total += inner.iterations;
      if (inner.status != QpStatus::optimal) {
        inner.iterations = total;
        return inner;
      }
      const double step = (inner.z - sol.z).lpNorm<Eigen::Infinity>();
      sol = std::move(inner);
      if (step <= 1e-3 * settings_.tol * (1.0 + sol.z.lpNorm<Eigen::Infinity>())) break;
      if (outer + 1 == kMaxOuter) sol.status = QpStatus::max_iter;
    }
    sol.iterations = total;
    return sol;
  }

  // Goldfarb–Idnani on ½zᵀHz + gᵀz, H = L Lᵀ.
  QpSolution solve_definite(const QpProblem& p, const VecX& g, const Eigen::LLT<MatX>& llt,
                            int max_iter) {
    const Eigen::Index n = p.size();
    const Eigen::Index me = p.num_eq();
    const Eigen::Index mi = p.num_ineq();

    // J = L⁻ᵀ
    j_ = llt.matrixU().solve(MatX::Identity(n, n));
    r_ = MatX::Zero(n, n);
    d_ = VecX::Zero(n);
    z_ = VecX::Zero(n);
    active_.clear();
    u_.assign(static_cast<std::size_t>(n + 1), 0.0);
    r_norm_ = 1.0;
    iq_ = 0;

    QpSolution sol;
    VecX x = -llt.solve(g);
    sol.eq_multipliers = VecX::Zero(me);
    sol.ineq_multipliers = VecX::Zero(mi);

    // Constraint i is nᵀx ≥ b (inequalities) or nᵀx = b (equalities).
    auto normal = [&](Eigen::Index id) -> VecX {
      return id < me ? VecX(p.eq_matrix.row(id).transpose()) : VecX(-p.ineq_matrix.row(id - me).transpose());
    };
    auto bound = [&](Eigen::Index id) -> double { return id < me ? p.eq_vector[id] : -p.ineq_vector[id - me]; };

    VecX rvec;
    for (Eigen::Index i = 0; i < me; ++i) {
      const VecX np = normal(i);
      d_ = j_.transpose() * np;
      primal_step(n);
      dual_step(rvec);
      const double znp = z_.dot(np);
      double t2 = 0.0;
      if (std::abs(znp) > 1e-14 * (1.0 + np.norm())) t2 = (bound(i) - np.dot(x)) / znp;
      x += t2 * z_;
      for (int k = 0; k < iq_; ++k) u_[k] -= t2 * rvec[k];
      u_[iq_] = t2;
      if (!add_constraint(n)) {
        sol.status = QpStatus::infeasible;
        sol.z = x;
        return sol;
      }
      active_.push_back(i);
    }

    const double viol_tol = 1e-3 * settings_.tol;
    int iter = 0;
    while (true) {
      if (++iter > max_iter) {
        sol.status = QpStatus::max_iter;
        break;
      }
      // Most violated inactive inequality.
      Eigen::Index pick = -1;
      double worst = 0.0;
      for (Eigen::Index j = 0; j < mi; ++j) {
        const Eigen::Index id = me + j;
        if (is_active(id)) continue;
        const double s = p.ineq_vector[j] - p.ineq_matrix.row(j).dot(x);
        const double scaled = s / (1.0 + std::abs(p.ineq_vector[j]));
        if (scaled < -viol_tol && scaled < worst) {
          worst = scaled;
          pick = id;
        }
      }
      if (pick < 0) {
        sol.status = QpStatus::optimal;
        break;
      }

      const VecX np = normal(pick);
      double u_plus = 0.0;
      bool added = false;
      while (!added && iter <= max_iter) {
        const double slack = np.dot(x) - bound(pick);
        d_ = j_.transpose() * np;
        primal_step(n);
        dual_step(rvec);

        double t1 = kInf;
        int drop = -1;
        for (int k = static_cast<int>(me); k < iq_; ++k) {
          if (rvec[k] > 0.0) {
            const double ratio = u_[k] / rvec[k];
            if (ratio < t1) {
              t1 = ratio;
              drop = k;
            }
          }
        }
        const double znp = z_.dot(np);
        const double t2 = z_.norm() > 1e-14 && znp > 0.0 ? -slack / znp : kInf;
        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) {
          sol.status = QpStatus::infeasible;
          sol.z = x;
          return sol;
        }
        if (!std::isfinite(t2)) {
          for (int k = 0; k < iq_; ++k) u_[k] -= t * rvec[k];
          u_plus += t;
          delete_constraint(n, drop);
          ++iter;
          continue;
        }
        x += t * z_;
        for (int k = 0; k < iq_; ++k) u_[k] -= t * rvec[k];
        u_plus += t;
        if (t2 <= t1) {
          u_[iq_] = u_plus;
          if (!add_constraint(n)) {
            // Numerically dependent on the active set; the full step already
            // satisfied it.
            added = true;
            break;
          }
          active_.push_back(pick);
          added = true;
        } else {
          delete_constraint(n, drop);
          ++iter;
        }
      }
      if (!added) {
        sol.status = QpStatus::max_iter;
        break;
      }
    }

    sol.iterations = iter;
    sol.z = x;
    for (int k = 0; k < iq_; ++k) {
      const Eigen::Index id = active_[static_cast<std::size_t>(k)];
      if (id < me) {
        sol.eq_multipliers[id] = -u_[k];
      } else {
        sol.ineq_multipliers[id - me] = u_[k];
      }
    }
    return sol;
  }

  bool is_active(Eigen::Index id) const {
    for (auto a : active_) {
      if (a == id) return true;
    }
    return false;
  }

  // z = J₂ d₂ : primal direction in the null space of the active normals.
  void primal_step(Eigen::Index n) {
    z_.setZero();
    for (Eigen::Index k = iq_; k < n; ++k) z_ += j_.col(k) * d_[k];
  }

  // r = R⁻¹ d₁ : change of the active multipliers.
  void dual_step(VecX& r) const {
    r.resize(iq_);
    for (int i = iq_ - 1; i >= 0; --i) {
      double sum = d_[i];
      for (int k = i + 1; k < iq_; ++k) sum -= r_(i, k) * r[k];
      r[i] = sum / r_(i, i);
    }
  }

  bool add_constraint(Eigen::Index n) {
    for (Eigen::Index j = n - 1; j >= iq_ + 1; --j) {
      double cc = d_[j - 1];
      double ss = d_[j];
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d_[j] = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d_[j - 1] = -h;
      } else {
        d_[j - 1] = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t1 = j_(k, j - 1);
        const double t2 = j_(k, j);
        j_(k, j - 1) = t1 * cc + t2 * ss;
        j_(k, j) = xny * (t1 + j_(k, j - 1)) - t2;
      }
    }
    ++iq_;
    for (int i = 0; i < iq_; ++i) r_(i, iq_ - 1) = d_[i];
    if (std::abs(d_[iq_ - 1]) <= 1e-14 * r_norm_) {
      // Dependent constraint: roll back.
      --iq_;
      return false;
    }
    r_norm_ = std::max(r_norm_, std::abs(d_[iq_ - 1]));
    return true;
  }

  void delete_constraint(Eigen::Index n, int pos) {
    for (int i = pos; i < iq_ - 1; ++i) {
      active_[static_cast<std::size_t>(i)] = active_[static_cast<std::size_t>(i) + 1];
      u_[i] = u_[i + 1];
      r_.col(i) = r_.col(i + 1);
    }
    active_.pop_back();
    u_[iq_ - 1] = u_[iq_];
    u_[iq_] = 0.0;
    r_.col(iq_ - 1).setZero();
    --iq_;
    for (int j = pos; j < iq_; ++j) {
      double cc = r_(j, j);
      double ss = r_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      r_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        r_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        r_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < iq_; ++k) {
        const double t1 = r_(j, k);
        const double t2 = r_(j + 1, k);
        r_(j, k) = t1 * cc + t2 * ss;
        r_(j + 1, k) = xny * (t1 + r_(j, k)) - t2;
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t1 = j_(k, j);
        const double t2 = j_(k, j + 1);
        j_(k, j) = t1 * cc + t2 * ss;
        j_(k, j + 1) = xny * (j_(k, j) + t1) - t2;
      }
    }
  }

  QpSettings settings_;
  MatX j_;
  MatX r_;
  VecX d_;
  VecX z_;
  std::vector<Eigen::Index> active_;
  std::vector<double> u_;
  double r_norm_ = 1.0;
  int iq_ = 0;
};

inline QpSolution solve(const QpProblem& problem, double tol = 1e-8, int max_iter = 200) {
  QpSolver solver({tol, max_iter});
  return solver.solve(problem);
}

}  // namespace quadctl
