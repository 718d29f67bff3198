#ifndef NPMIX_MODEL_BUILDER_HPP
#define NPMIX_MODEL_BUILDER_HPP

#include <vector>

#include "em_baselines.hpp"

namespace npmix::model {

/// Step 1 (fixed-support penalized dual fit) followed by Step 2 (continuous
/// EM over weights, locations and the common covariance, seeded with Step 1's
/// active supports).
struct TwoStageResult {
  pd::PdResult step1;
  em::ContinuousFit step2;
  recover::MixingMeasure step1_measure;  // full support set with pi*
};

TwoStageResult two_stage_fit(const DistinctDataset& data, const ComponentFamily& family,
                             const SupportSet& supports, const pd::SolverOptions& options,
                             double cem_tol = 1e-6, long cem_max_iter = 200000);

struct TreeLevel {
  double sieve = 1.0;       // delta (or sigma in the 1-D parameterization)
  double loglik = 0.0;
  double psi = 0.0;
  long m_hat = 0;
  Matrix supports;          // active support vectors
  Vector weights;           // their weights, renormalized onto the simplex
  bool converged = false;
  bool degenerate = false;  // m_hat reached d: empirical-CDF regime
};

struct MixtureTree {
  std::vector<TreeLevel> levels;  // sorted by sieve value, descending
};

/// Fit the fixed-support model at every sieve value (processed largest
/// first). With warm_start, each level starts the joint phase from the
/// previous level's dual solution. Levels after an empirical-CDF degenerate
/// level are skipped.
MixtureTree sieve_sweep(const DistinctDataset& data, const Matrix& sigma_base,
                        FamilyKind kind, const SupportSet& supports,
                        std::vector<double> sieve_values, bool values_are_sigma,
                        const pd::SolverOptions& options, bool warm_start = true);

struct CdfSteps {
  Vector theta;       // sorted ascending
  Vector weight;
  Vector cumulative;  // non-decreasing, ends at 1
};

/// Step CDF of a univariate mixing measure; refuses multivariate supports.
CdfSteps cdf_of_measure(const recover::MixingMeasure& measure);

/// Supports with weight above the threshold, weights renormalized.
recover::MixingMeasure active_measure(const SupportSet& supports, const Vector& pi,
                                      double threshold);

}  // namespace npmix::model

#endif
