#ifndef NPMIX_DENSITIES_HPP
#define NPMIX_DENSITIES_HPP

#include <optional>

#include "data_model.hpp"
#include "types.hpp"

namespace npmix {

enum class FamilyKind { kNormal, kPoisson };

/// Component density family. The normal kind evaluates N_p(y; theta, delta*Sigma)
/// with a covariance common to all components and a positive sieve scale delta;
/// the Poisson kind evaluates Poisson(y; theta) coordinate-wise (p = 1 in the
/// bundled applications).
class ComponentFamily {
 public:
  static ComponentFamily normal(Matrix sigma, double delta);
  static ComponentFamily poisson();

  FamilyKind kind() const { return kind_; }
  double delta() const { return delta_; }
  const Matrix& sigma() const { return sigma_; }

  /// log f_theta(y).
  double log_density(const Eigen::Ref<const Vector>& y,
                     const Eigen::Ref<const Vector>& theta) const;

  /// Same family with the sieve scale replaced.
  ComponentFamily with_delta(double delta) const;

 private:
  ComponentFamily() = default;

  FamilyKind kind_ = FamilyKind::kPoisson;
  Matrix sigma_;
  double delta_ = 1.0;
  // Cholesky factor of delta*Sigma and the log-density constant, cached.
  Matrix chol_lower_;
  double normal_const_ = 0.0;
};

double normal_log_density(const Eigen::Ref<const Vector>& y,
                          const Eigen::Ref<const Vector>& mu,
                          const Matrix& sigma, double delta);

/// y * ln(theta) - theta - ln(y!) with 0*ln(0) = 0, so theta = 0 puts unit
/// mass at y = 0. Returns -inf where the mass is zero.
double poisson_log_density(double y, double theta);

/// m x d matrix of component densities, assembled in log space. The scaled
/// view shifts every column so its largest entry is 1 (shift(i) = max_j log f),
/// which solvers use to avoid underflow on high-dimensional data; the shifts
/// only move the loglikelihood by a constant recovered via loglik_offset().
struct LikelihoodMatrix {
  Matrix scaled;     // m x d, per-column max = 1
  Vector log_shift;  // d

  Index m() const { return scaled.rows(); }
  Index d() const { return scaled.cols(); }

  /// True densities f_theta_j(y_i).
  Matrix densities() const;
  double density(Index j, Index i) const;

  /// sum_i counts(i) * log_shift(i): add to a scaled-matrix loglikelihood to
  /// obtain the true one.
  double loglik_offset(const Vector& counts) const;

  /// Rows restricted to the given support indices (shifts unchanged).
  LikelihoodMatrix rows(const std::vector<int>& idx) const;
};

LikelihoodMatrix likelihood_matrix(const ComponentFamily& family,
                                   const SupportSet& supports,
                                   const DistinctDataset& data);

}  // namespace npmix

#endif
