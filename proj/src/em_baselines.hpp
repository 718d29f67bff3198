#ifndef NPMIX_EM_BASELINES_HPP
#define NPMIX_EM_BASELINES_HPP

#include <vector>

#include "densities.hpp"
#include "primal_recovery.hpp"

namespace npmix::em {

enum class StopRule {
  kPsi,           // gradient certificate Psi <= tol
  kLoglikChange,  // |l(t) - l(t-1)| <= tol
};

struct EmTraceRow {
  long iteration = 0;
  double loglik = 0.0;
  double psi = 0.0;
  double delta_l = 0.0;
};

struct DiscreteEmResult {
  Vector pi;
  double loglik = 0.0;
  double psi = 0.0;
  long iterations = 0;
  bool converged = false;
  std::vector<EmTraceRow> trace;
};

/// Fixed-support EM from pi0 (uniform when empty), iterated until the chosen
/// stopping rule fires or max_iter is hit (flagged; the boundary may be
/// unreachable in finite time).
DiscreteEmResult discrete_em_solve(const LikelihoodMatrix& L, const Vector& counts,
                                   const Vector& pi0, StopRule rule, double tol,
                                   long max_iter);

/// Weights, free component locations and the common covariance of a
/// continuous-support fit of N_p(Q, delta*Sigma) (or a Poisson mixture, where
/// sigma_hat stays empty).
struct ContinuousFit {
  Matrix mu;         // m x p component locations
  Vector pi;         // m
  Matrix sigma_hat;  // p x p (normal family)
  double delta = 1.0;
  double loglik = 0.0;
  long iterations = 0;
  bool converged = false;
  bool collapsed = false;  // covariance hit the degenerate regime
  std::vector<double> loglik_trace;
};

/// Joint EM over weights, locations and the common covariance, seeded from a
/// fixed-support solution. The M-step uses the pooled covariance divided by
/// delta so the fitted model is N(mu_j, delta*Sigma_hat). Stops on
/// |delta loglik| <= tol.
ContinuousFit continuous_em_solve(const DistinctDataset& data, FamilyKind kind,
                                  double delta, Matrix mu0, Vector pi0, Matrix sigma0,
                                  double tol, long max_iter);

/// Lambda(t) = |l_star - l(t)| for each trace entry.
std::vector<double> loglik_residual(const std::vector<double>& logliks, double l_star);

struct RateEstimate {
  double slope = 0.0;  // least-squares slope of ln(Lambda) vs t
  double rate = 1.0;   // exp(slope)
  double residual = 0.0;  // max abs deviation from the fitted line
  long points = 0;
};

/// Trailing-window rate diagnostic; uses only Lambda > 0 and requires at
/// least 10 such values in the window.
RateEstimate rate_estimate(const std::vector<double>& lambdas, long window = 30);

}  // namespace npmix::em

#endif
