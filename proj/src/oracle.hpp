#ifndef NPMIX_ORACLE_HPP
#define NPMIX_ORACLE_HPP

#include <functional>
#include <string>

#include "densities.hpp"

namespace npmix::oracle {

/// Independent reference solution of the fixed-support problem; shipped so
/// the CLI --verify mode can cross-check any small fit.
struct OracleSolution {
  Vector weights;
  double loglik = 0.0;
  std::string method;       // "grid" or "projected-ascent"
  bool coarse = false;      // grid polish moved the loglik by more than 1e-3
};

/// Exhaustive simplex-lattice search (resolution = subdivisions per axis)
/// followed by an EM polish. Requires m <= 4.
OracleSolution brute_force_primal(const LikelihoodMatrix& L, const Vector& counts,
                                  int resolution);

/// Long multiplicative-update ascent from the uniform start; any m.
OracleSolution projected_ascent(const LikelihoodMatrix& L, const Vector& counts,
                                long iterations);

struct FiniteDiff {
  Vector gradient;
  Matrix hessian;  // symmetrized
};

/// Central finite differences with a per-coordinate step.
FiniteDiff finite_diff(const std::function<double(const Vector&)>& fn, const Vector& x,
                       const Vector& steps);
FiniteDiff finite_diff(const std::function<double(const Vector&)>& fn, const Vector& x,
                       double step);

}  // namespace npmix::oracle

#endif
