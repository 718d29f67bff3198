#include "model_builder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace npmix::model {

recover::MixingMeasure active_measure(const SupportSet& supports, const Vector& pi,
                                      double threshold) {
  std::vector<Index> keep;
  for (Index j = 0; j < pi.size(); ++j) {
    if (pi(j) > threshold) keep.push_back(j);
  }
  if (keep.empty()) {
    Index best = 0;
    pi.maxCoeff(&best);
    keep.push_back(best);
  }
  recover::MixingMeasure out;
  out.supports.resize(static_cast<Index>(keep.size()), supports.p());
  out.weights.resize(static_cast<Index>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) {
    out.supports.row(static_cast<Index>(k)) = supports.theta.row(keep[k]);
    out.weights(static_cast<Index>(k)) = pi(keep[k]);
  }
  out.weights /= out.weights.sum();
  return out;
}

TwoStageResult two_stage_fit(const DistinctDataset& data, const ComponentFamily& family,
                             const SupportSet& supports, const pd::SolverOptions& options,
                             double cem_tol, long cem_max_iter) {
  TwoStageResult out;
  LikelihoodMatrix L = likelihood_matrix(family, supports, data);
  out.step1 = pd::solve(L, data.counts, options);
  out.step1_measure = recover::MixingMeasure{supports.theta, out.step1.pi};

  recover::MixingMeasure seed = active_measure(supports, out.step1.pi, options.active_threshold);
  Matrix sigma0 = family.kind() == FamilyKind::kNormal ? family.sigma() : Matrix();
  out.step2 = em::continuous_em_solve(data, family.kind(), family.delta(), seed.supports,
                                      seed.weights, sigma0, cem_tol, cem_max_iter);
  return out;
}

MixtureTree sieve_sweep(const DistinctDataset& data, const Matrix& sigma_base,
                        FamilyKind kind, const SupportSet& supports,
                        std::vector<double> sieve_values, bool values_are_sigma,
                        const pd::SolverOptions& options, bool warm_start) {
  if (kind != FamilyKind::kNormal) {
    throw std::invalid_argument("sieve sweeps apply to the normal family");
  }
  for (double v : sieve_values) {
    if (v <= 0.0) throw std::invalid_argument("sieve values must be positive");
  }
  std::sort(sieve_values.begin(), sieve_values.end(), std::greater<double>());

  MixtureTree tree;
  Vector z_prev;
  bool have_prev = false;
  for (double value : sieve_values) {
    double delta = values_are_sigma ? value * value : value;
    TreeLevel level;
    level.sieve = value;
    try {
      ComponentFamily family = ComponentFamily::normal(sigma_base, delta);
      LikelihoodMatrix L = likelihood_matrix(family, supports, data);
      pd::PdResult fit = (warm_start && have_prev)
                             ? pd::solve_from(L, data.counts, options, false, z_prev)
                             : pd::solve(L, data.counts, options, false);
      level.loglik = fit.loglik;
      level.psi = fit.psi;
      level.converged = fit.converged;
      recover::MixingMeasure act = active_measure(supports, fit.pi, options.active_threshold);
      level.m_hat = act.weights.size();
      level.supports = act.supports;
      level.weights = act.weights;
      level.degenerate = level.m_hat >= data.d();
      z_prev = fit.state.z;
      have_prev = true;
    } catch (const std::exception&) {
      level.converged = false;
      level.m_hat = 0;
    }
    bool stop = level.degenerate;
    tree.levels.push_back(std::move(level));
    if (stop) break;  // smaller sieve values only deepen the empirical-CDF regime
  }
  return tree;
}

CdfSteps cdf_of_measure(const recover::MixingMeasure& measure) {
  if (measure.supports.cols() != 1) {
    throw std::invalid_argument("CDF steps are defined for univariate supports only");
  }
  const Index m = measure.weights.size();
  std::vector<Index> order(static_cast<size_t>(m));
  for (Index j = 0; j < m; ++j) order[static_cast<size_t>(j)] = j;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return measure.supports(a, 0) < measure.supports(b, 0);
  });

  CdfSteps out;
  out.theta.resize(m);
  out.weight.resize(m);
  out.cumulative.resize(m);
  double acc = 0.0;
  for (Index k = 0; k < m; ++k) {
    out.theta(k) = measure.supports(order[static_cast<size_t>(k)], 0);
    out.weight(k) = measure.weights(order[static_cast<size_t>(k)]);
    acc += out.weight(k);
    out.cumulative(k) = acc;
  }
  return out;
}

}  // namespace npmix::model
