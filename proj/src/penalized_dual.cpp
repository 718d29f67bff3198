#include "penalized_dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "primal_recovery.hpp"

namespace npmix::pd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// All kernels below work on a likelihood matrix and a z vector expressed in
// the same (arbitrary) column scaling; p_j and all derivatives in z are
// invariant to that choice.

Vector constraint_values_z(const Vector& z, const Matrix& F) {
  return F * z.array().exp().matrix();
}

// Sum of p_j^gamma with p_j = 0 contributing 0; +inf on overflow.
double penalty_sum(const Vector& p, double gamma) {
  double s = 0.0;
  for (Index j = 0; j < p.size(); ++j) {
    if (p(j) > 0.0) s += std::exp(gamma * std::log(p(j)));
  }
  return s;
}

double k_value_z(const Vector& z, double gamma, const Matrix& F, const Vector& counts,
                 double n, double* gamma_log_pmax = nullptr) {
  Vector p = constraint_values_z(z, F);
  if (gamma_log_pmax) {
    double pmax = p.maxCoeff();
    *gamma_log_pmax = pmax > 0.0 ? gamma * std::log(pmax) : kNegInf;
  }
  double pen = penalty_sum(p, gamma);
  if (!std::isfinite(pen)) return kNegInf;
  return counts.dot(z) / n - pen / gamma;
}

struct Derivs {
  Vector grad;  // d+1
  Matrix hess;  // (d+1)^2
};

Derivs k_derivs_z(const Vector& z, double gamma, const Matrix& F, const Vector& counts,
                  double n) {
  const Index d = z.size();
  const Index m = F.rows();
  Vector w = z.array().exp();
  Vector p = F * w;

  Vector logp(m), s1(m), sg(m);
  for (Index j = 0; j < m; ++j) {
    if (p(j) > 0.0) {
      logp(j) = std::log(p(j));
      s1(j) = std::exp((gamma - 1.0) * logp(j));
      sg(j) = std::exp(gamma * logp(j));
    } else {
      logp(j) = 0.0;  // never used: zero p contributes nothing
      s1(j) = 0.0;
      sg(j) = 0.0;
    }
  }

  Vector a = w.array() * (F.transpose() * s1).array();  // w .* F' p^(g-1)

  Derivs out;
  out.grad.resize(d + 1);
  out.grad.head(d) = counts / n - a;

  double gg = 0.0;   // dK/dgamma
  double hgg = 0.0;  // d2K/dgamma2
  for (Index j = 0; j < m; ++j) {
    if (p(j) <= 0.0) continue;
    double u = 1.0 / gamma - logp(j);
    gg += sg(j) * u;
    hgg -= sg(j) * (u * u + 1.0 / (gamma * gamma));
  }
  gg /= gamma;
  hgg /= gamma;
  out.grad(d) = gg;

  out.hess = Matrix::Zero(d + 1, d + 1);
  out.hess.topLeftCorner(d, d) = (-a.array()).matrix().asDiagonal();
  if (gamma != 1.0) {
    // -(gamma-1) diag(w) F' diag(p^(g-2)) F diag(w) assembled as -M'M.
    Matrix M(m, d);
    for (Index j = 0; j < m; ++j) {
      double t = p(j) > 0.0 ? std::exp(0.5 * ((gamma - 2.0) * logp(j) + std::log(gamma - 1.0)))
                            : 0.0;
      M.row(j) = t * (F.row(j).array() * w.transpose().array()).matrix();
    }
    out.hess.topLeftCorner(d, d).noalias() -= M.transpose() * M;
  }
  Vector cross = -(w.array() * (F.transpose() * (s1.array() * logp.array()).matrix()).array());
  // zero-p rows already dropped: s1 = 0 there
  out.hess.col(d).head(d) = cross;
  out.hess.row(d).head(d) = cross.transpose();
  out.hess(d, d) = hgg;
  return out;
}

// Ridge-regularized ascent direction: solve (-H + rho I) delta = grad with the
// smallest rho from {0, floor, 10*floor, ...} that is positive definite and
// actually yields an ascent direction (ill-conditioned factorizations can
// produce finite garbage).
bool ascent_direction(const Matrix& hess, const Vector& grad, const SolverOptions& opt,
                      Vector* delta) {
  double rho = 0.0;
  while (true) {
    Matrix A = -hess;
    if (rho > 0.0) A.diagonal().array() += rho;
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() == Eigen::Success) {
      Vector dir = llt.solve(grad);
      if (dir.allFinite() && grad.dot(dir) > 0.0) {
        *delta = dir;
        return true;
      }
    }
    if (rho == 0.0) {
      rho = opt.ridge_floor;
    } else if (rho < opt.ridge_max) {
      rho *= 10.0;
    } else {
      break;
    }
  }
  // Last resort: steepest ascent.
  if (grad.allFinite() && grad.norm() > 0.0) {
    *delta = grad / std::max(1.0, grad.norm());
    return true;
  }
  return false;
}

struct ScaledStep {
  Vector z;
  double gamma = 1.0;
  double k = 0.0;
  double grad_inf = 0.0;
  int halvings = 0;
  bool accepted = false;
  Vector direction;
};

// One monotone Newton step in the scaled coordinate system. In joint mode the
// gamma coordinate is optimized as eta = ln(gamma) with eta clamped >= 0.
ScaledStep newton_step_scaled(const Vector& z, double gamma, const Matrix& F,
                              const Vector& counts, double n, const SolverOptions& opt,
                              StepMode mode) {
  const Index d = z.size();
  ScaledStep out;
  out.z = z;
  out.gamma = gamma;

  double k0 = k_value_z(z, gamma, F, counts, n);
  out.k = k0;
  Derivs der = k_derivs_z(z, gamma, F, counts, n);

  Vector grad;
  Matrix hess;
  if (mode == StepMode::kJoint) {
    // Transform the gamma row/column to eta = ln(gamma).
    grad = der.grad;
    grad(d) *= gamma;
    hess = der.hess;
    hess.col(d).head(d) *= gamma;
    hess.row(d).head(d) *= gamma;
    hess(d, d) = gamma * gamma * der.hess(d, d) + gamma * der.grad(d);
  } else {
    grad = der.grad.head(d);
    hess = der.hess.topLeftCorner(d, d);
  }
  out.grad_inf = grad.cwiseAbs().maxCoeff();

  Vector delta;
  if (!ascent_direction(hess, grad, opt, &delta)) {
    out.direction = Vector::Zero(d + 1);
    return out;  // not accepted
  }
  if (mode == StepMode::kJoint && std::abs(delta(d)) > 1.5) {
    // Trust bound on the log-penalty coordinate: gamma may grow by at most
    // e^1.5 per step, so z never falls hopelessly behind the penalty power.
    delta *= 1.5 / std::abs(delta(d));
  }
  out.direction = Vector::Zero(d + 1);
  out.direction.head(d) = delta.head(d);
  if (mode == StepMode::kJoint) out.direction(d) = delta(d);

  const double eta0 = std::log(gamma);
  // The soft penalty keeps solutions interior; bias the search toward steps
  // with p_max^gamma <= e so a transiently infeasible iterate cannot spoil
  // the joint concavity. If no such step exists, monotonicity alone decides.
  for (int feasibility_pass = 1; feasibility_pass >= 0; --feasibility_pass) {
    double alpha = 1.0;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      Vector z_try = z + alpha * delta.head(d);
      double gamma_try = gamma;
      if (mode == StepMode::kJoint) {
        gamma_try = std::exp(std::max(0.0, eta0 + alpha * delta(d)));
      }
      double glp = 0.0;
      double k_try = k_value_z(z_try, gamma_try, F, counts, n, &glp);
      // Monotone up to one ulp of K: strict comparison stalls the quadratic
      // tail once true ascent drops below the precision of K itself.
      bool monotone =
          std::isfinite(k_try) && k_try >= k0 - 1e-15 * std::max(1.0, std::abs(k0));
      if (monotone && (!feasibility_pass || glp <= 1.0)) {
        out.z = std::move(z_try);
        out.gamma = gamma_try;
        out.k = k_try;
        out.halvings = h;
        out.accepted = true;
        return out;
      }
      alpha *= opt.step_shrink;
    }
  }
  return out;  // stalled; state unchanged
}

std::vector<int> all_indices(Index m) {
  std::vector<int> idx(static_cast<size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

Vector constraint_values(const DualState& state, const LikelihoodMatrix& L) {
  Vector p = constraint_values_z(state.z + L.log_shift, L.scaled);
  if (!p.allFinite()) throw std::runtime_error("constraint values overflowed");
  return p;
}

double k_value(const DualState& state, const LikelihoodMatrix& L, const Vector& counts) {
  return k_value_z(state.z + L.log_shift, state.gamma, L.scaled, counts, counts.sum()) -
         counts.dot(L.log_shift) / counts.sum();
}

KDerivatives k_gradient_hessian(const DualState& state, const LikelihoodMatrix& L,
                                const Vector& counts) {
  Derivs d = k_derivs_z(state.z + L.log_shift, state.gamma, L.scaled, counts, counts.sum());
  return KDerivatives{std::move(d.grad), std::move(d.hess)};
}

DualState initial_dual_state(const LikelihoodMatrix& L, const Vector& counts) {
  const double n = counts.sum();
  Vector colsum = L.scaled.colwise().sum();
  DualState s;
  s.gamma = 1.0;
  s.z.resize(L.d());
  for (Index i = 0; i < L.d(); ++i) {
    if (colsum(i) <= 0.0) throw std::invalid_argument("zero column sum in likelihood matrix");
    // ln w_i = ln(n_i/n) - ln(sum_j f_ji); the shift converts back to true scale.
    s.z(i) = std::log(counts(i) / n) - std::log(colsum(i)) - L.log_shift(i);
  }
  return s;
}

StepOutcome newton_step_monotone(const DualState& state, const LikelihoodMatrix& L,
                                 const Vector& counts, const SolverOptions& options,
                                 StepMode mode) {
  ScaledStep s = newton_step_scaled(state.z + L.log_shift, state.gamma, L.scaled, counts,
                                    counts.sum(), options, mode);
  StepOutcome out;
  out.state.z = s.z - L.log_shift;
  out.state.gamma = s.gamma;
  out.k = s.k - counts.dot(L.log_shift) / counts.sum();
  out.grad_inf = s.grad_inf;
  out.halvings = s.halvings;
  out.accepted = s.accepted;
  out.direction = std::move(s.direction);
  return out;
}

std::vector<int> prune_inactive(const DualState& state, const LikelihoodMatrix& L,
                                const Vector& counts, const SolverOptions& options) {
  Vector p = constraint_values(state, L);
  Vector pi = recover::pd_estimator_from_p(p, state.gamma);
  Vector d = recover::gradient_function(pi, L.scaled, counts);
  std::vector<int> keep;
  int best = 0;
  for (Index j = 0; j < p.size(); ++j) {
    if (p(j) > p(best)) best = static_cast<int>(j);
    double pg = p(j) > 0.0 ? std::exp(state.gamma * std::log(p(j))) : 0.0;
    // A support is inactive when its estimated weight vanishes and its
    // gradient does not call for mass there.
    if (pg >= options.prune_threshold || d(j) > 0.0) keep.push_back(static_cast<int>(j));
  }
  if (keep.empty()) keep.push_back(best);
  return keep;
}

namespace {

struct ActiveSet {
  std::vector<int> idx;   // active support rows
  Matrix F;               // their scaled likelihood rows
};

// p_j^gamma < threshold with a non-positive gradient prunes j; any dropped
// row whose gradient turns positive beyond psi_tol is brought back. Returns
// true when the set changed.
bool update_active_set(ActiveSet* act, const Matrix& F_full, const Vector& z, double gamma,
                       const Vector& D_full, const SolverOptions& opt) {
  const Index m = F_full.rows();
  std::vector<char> is_active(static_cast<size_t>(m), 0);
  for (int j : act->idx) is_active[static_cast<size_t>(j)] = 1;

  Vector p_act = act->F * z.array().exp().matrix();
  std::vector<int> next;
  next.reserve(act->idx.size());
  int best_local = 0;
  for (size_t k = 0; k < act->idx.size(); ++k) {
    if (p_act(static_cast<Index>(k)) > p_act(best_local)) best_local = static_cast<int>(k);
    double pj = p_act(static_cast<Index>(k));
    double pg = pj > 0.0 ? std::exp(gamma * std::log(pj)) : 0.0;
    if (pg >= opt.prune_threshold || D_full(act->idx[k]) > 0.0) next.push_back(act->idx[k]);
  }
  if (next.empty()) next.push_back(act->idx[static_cast<size_t>(best_local)]);

  for (Index j = 0; j < m; ++j) {
    if (!is_active[static_cast<size_t>(j)] && D_full(j) > opt.psi_tol) {
      next.push_back(static_cast<int>(j));
    }
  }
  std::sort(next.begin(), next.end());

  if (next == act->idx) return false;
  act->idx = std::move(next);
  act->F.resize(static_cast<Index>(act->idx.size()), F_full.cols());
  for (size_t k = 0; k < act->idx.size(); ++k) {
    act->F.row(static_cast<Index>(k)) = F_full.row(act->idx[k]);
  }
  return true;
}

}  // namespace

namespace {

void validate(const SolverOptions& o) {
  if (o.joint_tol <= 0 || o.psi_tol <= 0 || o.ridge_floor <= 0 || o.prune_threshold <= 0 ||
      o.stationarity_tol <= 0 || o.active_threshold <= 0) {
    throw std::invalid_argument("solver tolerances must be strictly positive");
  }
  if (o.step_shrink <= 0.0 || o.step_shrink >= 1.0) {
    throw std::invalid_argument("step_shrink must lie in (0, 1)");
  }
}

}  // namespace

PdResult solve_from(const LikelihoodMatrix& L, const Vector& counts,
                    const SolverOptions& options, bool prune, const Vector& z0_true) {
  validate(options);
  const Index m = L.m();
  const Index d = L.d();
  if (counts.size() != d) throw std::invalid_argument("counts/likelihood dimension mismatch");
  const double n = counts.sum();
  const double k_offset = counts.dot(L.log_shift) / n;  // K_true = K_scaled - k_offset

  PdResult res;
  ActiveSet act{all_indices(m), L.scaled};

  Vector z = z0_true + L.log_shift;  // scaled coordinates
  double gamma = 1.0;

  Vector pi_full = Vector::Zero(m);
  double loglik = kNegInf;
  double psi = std::numeric_limits<double>::infinity();
  Vector D_full(m);

  long iteration = 0;
  auto record = [&](int phase, double k_scaled, double grad_inf, int halvings, bool stalled) {
    // Recover the estimator and certificate at the current iterate.
    Vector p_act = act.F * z.array().exp().matrix();
    Vector pi_act = recover::pd_estimator_from_p(p_act, gamma);
    pi_full.setZero();
    for (size_t k = 0; k < act.idx.size(); ++k) pi_full(act.idx[k]) = pi_act(static_cast<Index>(k));
    loglik = recover::mixture_loglik(pi_full, L, counts);
    D_full = recover::gradient_function(pi_full, L.scaled, counts);
    psi = D_full.maxCoeff();

    TraceRow row;
    row.iteration = iteration;
    row.phase = phase;
    row.k = k_scaled - k_offset;
    row.grad_inf = grad_inf;
    row.gamma = gamma;
    row.active = static_cast<long>(act.idx.size());
    row.loglik = loglik;
    row.psi = psi;
    row.zero_p = (p_act.array() == 0.0).count();
    row.halvings = halvings;
    row.stalled = stalled;
    if (options.record_states) row.z_scaled = z;
    res.trace.rows.push_back(std::move(row));
  };

  double k_prev = k_value_z(z, gamma, act.F, counts, n);
  record(0, k_prev, 0.0, 0, false);

  // The joint phase hands off once K flattens; if the certificate then fails
  // at the frozen gamma, the penalty was not yet "sufficiently large" and the
  // joint phase resumes under a tighter flatness tolerance.
  double joint_tol = options.joint_tol;
  for (int attempt = 0; attempt <= options.joint_retries; ++attempt) {
    // Phase A: joint maximization (starting from the explicit gamma = 1
    // solution on the first attempt).
    while (res.iter_joint < options.max_iter_joint) {
      ScaledStep s = newton_step_scaled(z, gamma, act.F, counts, n, options, StepMode::kJoint);
      ++iteration;
      ++res.iter_joint;
      z = s.z;
      gamma = s.gamma;
      record(0, s.accepted ? s.k : k_prev, s.grad_inf, s.halvings, !s.accepted);
      double dk = s.accepted ? s.k - k_prev : 0.0;
      k_prev = s.accepted ? s.k : k_prev;
      if (prune && update_active_set(&act, L.scaled, z, gamma, D_full, options)) {
        k_prev = k_value_z(z, gamma, act.F, counts, n);
      }
      if (!s.accepted || std::abs(dk) < joint_tol || gamma > options.gamma_cap) break;
    }

    // Phase B: gamma frozen at the handoff value; polish z to stationarity
    // and stop once the gradient certificate is met.
    int stall_streak = 0;
    bool gamma_exhausted = false;
    while (res.iter_fixed < options.max_iter_fixed) {
      ScaledStep s =
          newton_step_scaled(z, gamma, act.F, counts, n, options, StepMode::kFixedGamma);
      ++iteration;
      ++res.iter_fixed;
      z = s.z;
      record(1, s.accepted ? s.k : k_prev, s.grad_inf, s.halvings, !s.accepted);
      k_prev = s.accepted ? s.k : k_prev;
      if (prune && update_active_set(&act, L.scaled, z, gamma, D_full, options)) {
        k_prev = k_value_z(z, gamma, act.F, counts, n);
      }
      bool stationary = s.grad_inf <= options.stationarity_tol || !s.accepted;
      if (psi <= options.psi_tol && stationary) {
        res.converged = true;
        break;
      }
      stall_streak = s.accepted ? 0 : stall_streak + 1;
      if ((stationary && psi > options.psi_tol) || stall_streak >= 2) {
        gamma_exhausted = true;  // z is optimal for this gamma, certificate unmet
        break;
      }
    }
    if (res.converged || !gamma_exhausted || gamma >= options.gamma_cap) break;
    if (res.iter_joint >= options.max_iter_joint || res.iter_fixed >= options.max_iter_fixed) break;
    joint_tol *= 1e-2;
  }
  if (!res.converged && psi <= options.psi_tol) res.converged = true;

  res.state.z = z - L.log_shift;
  res.state.gamma = gamma;
  res.pi = pi_full;
  res.loglik = loglik;
  res.psi = psi;
  res.active = act.idx;
  res.residual_check = recover::residual_check(res.state, pi_full, L, counts);
  Vector p_act = act.F * z.array().exp().matrix();
  res.gradient_bound = recover::gradient_bound_from_p(p_act, gamma);
  return res;
}

PdResult solve(const LikelihoodMatrix& L, const Vector& counts,
               const SolverOptions& options, bool prune) {
  DualState init = initial_dual_state(L, counts);
  return solve_from(L, counts, options, prune, init.z);
}

}  // namespace npmix::pd
