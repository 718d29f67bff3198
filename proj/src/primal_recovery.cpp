#include "primal_recovery.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace npmix::recover {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector normalized_power(const Vector& p, double power) {
  const Index m = p.size();
  Vector logv(m);
  double best = kNegInf;
  for (Index j = 0; j < m; ++j) {
    logv(j) = p(j) > 0.0 ? power * std::log(p(j)) : kNegInf;
    best = std::max(best, logv(j));
  }
  if (best == kNegInf) throw std::invalid_argument("all constraint values are zero");
  Vector out(m);
  double sum = 0.0;
  for (Index j = 0; j < m; ++j) {
    out(j) = logv(j) == kNegInf ? 0.0 : std::exp(logv(j) - best);
    sum += out(j);
  }
  out /= sum;
  return out;
}
}  // namespace

Vector candidate_pi_from_p(const Vector& p, double gamma) {
  return normalized_power(p, gamma - 1.0);
}

Vector pd_estimator_from_p(const Vector& p, double gamma) {
  return normalized_power(p, gamma);
}

Vector em_step(const Vector& pi, const Matrix& F, const Vector& counts) {
  const double n = counts.sum();
  Vector g = F.transpose() * pi;
  for (Index i = 0; i < g.size(); ++i) {
    if (g(i) <= 0.0 && counts(i) > 0.0) {
      throw std::invalid_argument("zero mixture fit at an observed data point");
    }
  }
  Vector v = F * (counts.array() / g.array()).matrix();
  return (pi.array() * v.array() / n).matrix();
}

Vector gradient_function(const Vector& pi, const Matrix& F, const Vector& counts) {
  const double n = counts.sum();
  Vector g = F.transpose() * pi;
  for (Index i = 0; i < g.size(); ++i) {
    if (g(i) <= 0.0 && counts(i) > 0.0) {
      throw std::invalid_argument("zero mixture fit at an observed data point");
    }
  }
  Vector d = F * (counts.array() / g.array()).matrix();
  return d.array() - n;
}

double psi_value(const Vector& pi, const Matrix& F, const Vector& counts) {
  return gradient_function(pi, F, counts).maxCoeff();
}

double gradient_bound_from_p(const Vector& p, double gamma) {
  double s = 0.0;
  for (Index j = 0; j < p.size(); ++j) {
    if (p(j) > 0.0) s += std::exp((gamma - 1.0) * std::log(p(j)));
  }
  return s - 1.0;
}

Vector candidate_pi(const pd::DualState& state, const LikelihoodMatrix& L) {
  return candidate_pi_from_p(pd::constraint_values(state, L), state.gamma);
}

Vector pd_estimator(const pd::DualState& state, const LikelihoodMatrix& L) {
  return pd_estimator_from_p(pd::constraint_values(state, L), state.gamma);
}

double gradient_bound(const pd::DualState& state, const LikelihoodMatrix& L) {
  return gradient_bound_from_p(pd::constraint_values(state, L), state.gamma);
}

Vector linear_system_pi(const pd::DualState& state, const LikelihoodMatrix& L,
                        const Vector& counts, double tight_tol) {
  Vector p = pd::constraint_values(state, L);
  std::vector<Index> tight;
  for (Index j = 0; j < p.size(); ++j) {
    if (p(j) >= 1.0 - tight_tol) tight.push_back(j);
  }
  if (tight.empty()) throw std::invalid_argument("no tight constraints at this state");

  // Fitted values (n_i/n) / w_i in the scaled coordinate system.
  const double n = counts.sum();
  Vector g(L.d());
  for (Index i = 0; i < L.d(); ++i) {
    g(i) = counts(i) / n * std::exp(-(state.z(i) + L.log_shift(i)));
  }
  Matrix A(L.d(), static_cast<Index>(tight.size()));
  for (size_t k = 0; k < tight.size(); ++k) {
    A.col(static_cast<Index>(k)) = L.scaled.row(tight[k]).transpose();
  }
  Vector sol = A.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(g);

  Vector pi = Vector::Zero(p.size());
  double total = 0.0;
  for (size_t k = 0; k < tight.size(); ++k) {
    double w = std::max(0.0, sol(static_cast<Index>(k)));
    pi(tight[k]) = w;
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("linear-system recovery degenerated");
  return pi / total;
}

double mixture_loglik(const Vector& pi, const LikelihoodMatrix& L, const Vector& counts) {
  Vector g = L.scaled.transpose() * pi;
  double l = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    if (g(i) <= 0.0) {
      if (counts(i) > 0.0) return kNegInf;
      continue;
    }
    l += counts(i) * std::log(g(i));
  }
  return l + L.loglik_offset(counts);
}

double residual_check(const pd::DualState& state, const Vector& pi,
                      const LikelihoodMatrix& L, const Vector& counts) {
  const double n = counts.sum();
  Vector g = L.scaled.transpose() * pi;  // scaled fit
  double worst = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    // w_i g_i is invariant to the column scaling: exp(z + shift) * g_scaled.
    double wg = std::exp(state.z(i) + L.log_shift(i)) * g(i);
    worst = std::max(worst, std::abs(wg - counts(i) / n));
  }
  return worst;
}

FitDiagnostics diagnostics(const pd::DualState& state, const Vector& pi,
                           const LikelihoodMatrix& L, const Vector& counts) {
  FitDiagnostics out;
  Vector g = L.scaled.transpose() * pi;
  out.mixture_fit.resize(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    out.mixture_fit(i) = g(i) * std::exp(L.log_shift(i));
  }
  out.loglik = mixture_loglik(pi, L, counts);
  out.psi = psi_value(pi, L.scaled, counts);
  out.gradient_bound = gradient_bound(state, L);
  out.residual_check = residual_check(state, pi, L, counts);
  return out;
}

}  // namespace npmix::recover
