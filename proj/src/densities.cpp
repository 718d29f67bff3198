#include "densities.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace npmix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix cholesky_lower_or_throw(const Matrix& a, const char* what) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(what) + " is not positive definite");
  }
  return llt.matrixL();
}

}  // namespace

ComponentFamily ComponentFamily::normal(Matrix sigma, double delta) {
  if (delta <= 0.0) throw std::invalid_argument("sieve parameter delta must be positive");
  if (sigma.rows() != sigma.cols() || sigma.rows() < 1) {
    throw std::invalid_argument("Sigma must be a square matrix");
  }
  ComponentFamily f;
  f.kind_ = FamilyKind::kNormal;
  f.sigma_ = std::move(sigma);
  f.delta_ = delta;
  f.chol_lower_ = cholesky_lower_or_throw(f.delta_ * f.sigma_, "delta*Sigma");
  double logdet = 0.0;
  for (Index i = 0; i < f.chol_lower_.rows(); ++i) logdet += 2.0 * std::log(f.chol_lower_(i, i));
  f.normal_const_ = -0.5 * (static_cast<double>(f.sigma_.rows()) * kLog2Pi + logdet);
  return f;
}

ComponentFamily ComponentFamily::poisson() {
  ComponentFamily f;
  f.kind_ = FamilyKind::kPoisson;
  return f;
}

ComponentFamily ComponentFamily::with_delta(double delta) const {
  if (kind_ == FamilyKind::kPoisson) return poisson();
  return normal(sigma_, delta);
}

double ComponentFamily::log_density(const Eigen::Ref<const Vector>& y,
                                    const Eigen::Ref<const Vector>& theta) const {
  if (kind_ == FamilyKind::kPoisson) {
    double acc = 0.0;
    for (Index k = 0; k < y.size(); ++k) {
      double term = poisson_log_density(y(k), theta(k));
      if (term == kNegInf) return kNegInf;
      acc += term;
    }
    return acc;
  }
  // Solve L v = (y - mu); the quadratic form is |v|^2.
  Vector diff = y - theta;
  Vector v = chol_lower_.triangularView<Eigen::Lower>().solve(diff);
  return normal_const_ - 0.5 * v.squaredNorm();
}

double normal_log_density(const Eigen::Ref<const Vector>& y,
                          const Eigen::Ref<const Vector>& mu,
                          const Matrix& sigma, double delta) {
  return ComponentFamily::normal(sigma, delta).log_density(y, mu);
}

double poisson_log_density(double y, double theta) {
  if (y < 0.0 || std::rint(y) != y) throw std::invalid_argument("Poisson y must be a non-negative integer");
  if (theta < 0.0) throw std::invalid_argument("Poisson rate must be >= 0");
  if (theta == 0.0) return y == 0.0 ? 0.0 : kNegInf;
  return y * std::log(theta) - theta - std::lgamma(y + 1.0);
}

Matrix LikelihoodMatrix::densities() const {
  Matrix out = scaled;
  for (Index i = 0; i < d(); ++i) out.col(i) *= std::exp(log_shift(i));
  return out;
}

double LikelihoodMatrix::density(Index j, Index i) const {
  return scaled(j, i) * std::exp(log_shift(i));
}

double LikelihoodMatrix::loglik_offset(const Vector& counts) const {
  return counts.dot(log_shift);
}

LikelihoodMatrix LikelihoodMatrix::rows(const std::vector<int>& idx) const {
  LikelihoodMatrix out;
  out.log_shift = log_shift;
  out.scaled.resize(static_cast<Index>(idx.size()), d());
  for (size_t k = 0; k < idx.size(); ++k) out.scaled.row(static_cast<Index>(k)) = scaled.row(idx[k]);
  return out;
}

LikelihoodMatrix likelihood_matrix(const ComponentFamily& family,
                                   const SupportSet& supports,
                                   const DistinctDataset& data) {
  if (supports.p() != data.p()) {
    throw std::invalid_argument("support set and data dimension mismatch");
  }
  if (family.kind() == FamilyKind::kPoisson) {
    require_counts_data(data.y);
    if (supports.theta.minCoeff() < 0.0) {
      throw std::invalid_argument("Poisson supports must be >= 0");
    }
  } else if (family.sigma().rows() != data.p()) {
    throw std::invalid_argument("Sigma dimension does not match the data");
  }

  const Index m = supports.m();
  const Index d = data.d();
  Matrix logf(m, d);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < d; ++i) {
      logf(j, i) = family.log_density(data.y.row(i).transpose(), supports.theta.row(j).transpose());
    }
  }

  LikelihoodMatrix out;
  out.log_shift.resize(d);
  out.scaled.resize(m, d);
  for (Index i = 0; i < d; ++i) {
    double c = logf.col(i).maxCoeff();
    if (c == kNegInf) {
      throw std::invalid_argument("data point " + std::to_string(i) +
                                  " has zero density under every support");
    }
    out.log_shift(i) = c;
    for (Index j = 0; j < m; ++j) {
      double lv = logf(j, i);
      out.scaled(j, i) = (lv == kNegInf) ? 0.0 : std::exp(lv - c);
    }
  }
  return out;
}

}  // namespace npmix
