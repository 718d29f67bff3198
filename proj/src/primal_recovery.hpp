#ifndef NPMIX_PRIMAL_RECOVERY_HPP
#define NPMIX_PRIMAL_RECOVERY_HPP

#include "penalized_dual.hpp"

namespace npmix::recover {

/// Discrete mixing measure: simplex weights over support vectors.
struct MixingMeasure {
  Matrix supports;  // m x p
  Vector weights;   // m, in [0,1], summing to 1
};

struct FitDiagnostics {
  Vector mixture_fit;       // g(y_i), true density scale
  double loglik = 0.0;
  double psi = 0.0;
  double gradient_bound = 0.0;
  double residual_check = 0.0;
};

// Low-level kernels on plain vectors/matrices. F may be the scaled or the
// true likelihood matrix; the gradient function and EM step are invariant to
// per-column scaling.

/// Candidate weights p_j^(gamma-1) / sum_k p_k^(gamma-1), computed in log space.
Vector candidate_pi_from_p(const Vector& p, double gamma);

/// Penalized-dual weights p_j^gamma, renormalized exactly onto the simplex.
Vector pd_estimator_from_p(const Vector& p, double gamma);

/// One EM update pi_j <- pi_j * sum_i (n_i/n) F_ji / g_i, g = F^T pi.
Vector em_step(const Vector& pi, const Matrix& F, const Vector& counts);

/// Gradient function D_j = sum_i n_i (F_ji / g_i - 1).
Vector gradient_function(const Vector& pi, const Matrix& F, const Vector& counts);

/// sup_j D_j for the given weights.
double psi_value(const Vector& pi, const Matrix& F, const Vector& counts);

/// sum_k p_k^(gamma-1) - 1, which dominates D_j at the candidate estimator
/// whenever all p_j <= 1.
double gradient_bound_from_p(const Vector& p, double gamma);

// DualState-facing operations.

Vector candidate_pi(const pd::DualState& state, const LikelihoodMatrix& L);
Vector pd_estimator(const pd::DualState& state, const LikelihoodMatrix& L);
double gradient_bound(const pd::DualState& state, const LikelihoodMatrix& L);

/// Cross-check route for small problems: restrict to supports whose
/// constraints are tight, solve the linear equations
/// sum_j pi_j f_j(y_i) = (n_i/n)/w_i in the least-squares sense, and project
/// onto the simplex. The direct power estimator supersedes this in practice.
Vector linear_system_pi(const pd::DualState& state, const LikelihoodMatrix& L,
                        const Vector& counts, double tight_tol = 1e-4);

/// l(pi) = sum_i n_i ln(sum_j pi_j f_j(y_i)), stable in log space. Returns
/// -inf (flagged, not thrown) when some fitted value vanishes on observed data.
double mixture_loglik(const Vector& pi, const LikelihoodMatrix& L, const Vector& counts);

/// max_i |w_i g(y_i) - n_i/n|: the primal-dual consistency defect.
double residual_check(const pd::DualState& state, const Vector& pi,
                      const LikelihoodMatrix& L, const Vector& counts);

FitDiagnostics diagnostics(const pd::DualState& state, const Vector& pi,
                           const LikelihoodMatrix& L, const Vector& counts);

}  // namespace npmix::recover

#endif
