#ifndef NPMIX_PENALIZED_DUAL_HPP
#define NPMIX_PENALIZED_DUAL_HPP

#include <vector>

#include "densities.hpp"
#include "types.hpp"

namespace npmix::pd {

/// Log-residual vector z = ln(w) and penalty power gamma >= 1. z is stored in
/// the true coordinate system of the component densities; the solver shifts
/// it internally to the column-scaled system.
struct DualState {
  Vector z;
  double gamma = 1.0;
};

struct SolverOptions {
  double joint_tol = 1e-6;        // |dK| threshold ending the joint phase
  double psi_tol = 0.005;         // gradient-function stop (unnormalized count scale)
  long max_iter_joint = 500;
  long max_iter_fixed = 500;
  double step_shrink = 0.5;       // line-search halving factor
  int max_halvings = 60;
  double ridge_floor = 1e-10;     // first ridge added to a near-singular Hessian
  double ridge_max = 1e-2;
  double gamma_cap = 1e10;        // hard safety valve on the penalty power
  double stationarity_tol = 1e-10;  // fixed-phase polish on the z-gradient
  int joint_retries = 3;          // re-enter the joint phase with a tighter tol
                                  // when the certificate fails at the frozen gamma
  double prune_threshold = 1e-12; // on p_j^gamma, inactive-constraint mode
  double active_threshold = 1e-6; // pi_j above this counts toward m_hat
  bool record_states = false;     // keep (z, gamma) per iteration in the trace
};

struct TraceRow {
  long iteration = 0;
  int phase = 0;          // 0 joint, 1 fixed-gamma
  double k = 0.0;
  double grad_inf = 0.0;  // inf-norm of the gradient used for the step
  double gamma = 1.0;
  long active = 0;        // rows currently in the penalty sum
  double loglik = 0.0;    // l(pi*) at this iterate
  double psi = 0.0;       // sup of the gradient function at pi*
  long zero_p = 0;        // active supports with p_j = 0 (contribute nothing)
  int halvings = 0;
  bool stalled = false;
  Vector z_scaled;        // only when record_states
};

struct SolveTrace {
  std::vector<TraceRow> rows;
};

struct PdResult {
  DualState state;
  SolveTrace trace;
  Vector pi;               // m, exact zeros for pruned supports
  double loglik = 0.0;
  double psi = 0.0;
  bool converged = false;
  long iter_joint = 0;
  long iter_fixed = 0;
  std::vector<int> active; // surviving support indices
  double residual_check = 0.0;   // max_i |w_i g_i - n_i/n|
  double gradient_bound = 0.0;   // sum_k p_k^(gamma-1) - 1 at exit
};

/// Constraint function p_j(w) = sum_i w_i f_j(y_i) for every support row.
Vector constraint_values(const DualState& state, const LikelihoodMatrix& L);

/// K(z, gamma) = sum_i (n_i/n) z_i - (1/gamma) sum_j p_j^gamma. Returns -inf
/// when the penalty overflows.
double k_value(const DualState& state, const LikelihoodMatrix& L, const Vector& counts);

struct KDerivatives {
  Vector gradient;  // d+1, gamma last
  Matrix hessian;   // (d+1) x (d+1)
};

/// Exact first and second derivatives of K in (z, gamma). Supports with
/// p_j = 0 contribute zero to every sum.
KDerivatives k_gradient_hessian(const DualState& state, const LikelihoodMatrix& L,
                                const Vector& counts);

/// Explicit gamma = 1 interior solution w_i = (n_i/n) / sum_j f_j(y_i).
DualState initial_dual_state(const LikelihoodMatrix& L, const Vector& counts);

enum class StepMode { kJoint, kFixedGamma };

struct StepOutcome {
  DualState state;
  double k = 0.0;          // K after the step
  double grad_inf = 0.0;
  int halvings = 0;
  bool accepted = false;   // false: line search exhausted, state unchanged
  Vector direction;        // Newton direction actually used (z then gamma slot)
};

/// One monotone modified-Newton step: ridge-regularized solve, step halving
/// until K does not decrease, gamma kept >= 1 (optimized as ln gamma in joint
/// mode).
StepOutcome newton_step_monotone(const DualState& state, const LikelihoodMatrix& L,
                                 const Vector& counts, const SolverOptions& options,
                                 StepMode mode);

/// Surviving support rows after removing those whose current p_j^gamma falls
/// below options.prune_threshold while their gradient does not ask for mass;
/// at least one row is always retained.
std::vector<int> prune_inactive(const DualState& state, const LikelihoodMatrix& L,
                                const Vector& counts, const SolverOptions& options);

/// Two-phase penalized dual solve: joint Newton in (z, gamma) from the
/// explicit gamma = 1 state until |dK| < joint_tol (or gamma_cap), then
/// fixed-gamma Newton until the gradient certificate Psi <= psi_tol.
/// prune = true runs the inactive-constraint variant.
PdResult solve(const LikelihoodMatrix& L, const Vector& counts,
               const SolverOptions& options, bool prune = false);

/// As solve(), but starting the joint phase from the given z (gamma reset
/// to 1). Used for warm starts across sieve levels.
PdResult solve_from(const LikelihoodMatrix& L, const Vector& counts,
                    const SolverOptions& options, bool prune, const Vector& z0_true);

}  // namespace npmix::pd

#endif
