#include "em_baselines.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace npmix::em {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

DiscreteEmResult discrete_em_solve(const LikelihoodMatrix& L, const Vector& counts,
                                   const Vector& pi0, StopRule rule, double tol,
                                   long max_iter) {
  const Index m = L.m();
  const double n = counts.sum();
  const double offset = L.loglik_offset(counts);

  Vector pi = pi0.size() == 0 ? Vector::Constant(m, 1.0 / static_cast<double>(m)) : pi0;
  if (pi.size() != m) throw std::invalid_argument("pi0 has the wrong length");

  DiscreteEmResult res;
  res.trace.reserve(256);
  double prev_l = kNegInf;
  for (long t = 1; t <= max_iter; ++t) {
    Vector g = L.scaled.transpose() * pi;
    for (Index i = 0; i < g.size(); ++i) {
      if (g(i) <= 0.0 && counts(i) > 0.0) {
        throw std::invalid_argument("zero mixture fit at an observed data point");
      }
    }
    // One m x d product serves the loglik, the EM update and the certificate:
    // v_j = sum_i n_i F_ji / g_i, pi'_j = pi_j v_j / n, D_j = v_j - n.
    double l = counts.dot(g.array().log().matrix()) + offset;
    Vector v = L.scaled * (counts.array() / g.array()).matrix();
    double psi = v.maxCoeff() - n;
    double dl = prev_l == kNegInf ? std::numeric_limits<double>::infinity() : l - prev_l;

    res.trace.push_back(EmTraceRow{t, l, psi, dl});
    res.pi = pi;
    res.loglik = l;
    res.psi = psi;
    res.iterations = t;

    bool stop = (rule == StopRule::kPsi) ? (psi <= tol) : (std::abs(dl) <= tol);
    if (stop) {
      res.converged = true;
      break;
    }
    pi = (pi.array() * v.array() / n).matrix();
    prev_l = l;
  }
  return res;
}

ContinuousFit continuous_em_solve(const DistinctDataset& data, FamilyKind kind,
                                  double delta, Matrix mu0, Vector pi0, Matrix sigma0,
                                  double tol, long max_iter) {
  const Index d = data.d();
  const Index p = data.p();
  const Index m = mu0.rows();
  const double n = data.total;
  if (pi0.size() != m) throw std::invalid_argument("seed weights/locations mismatch");

  ContinuousFit fit;
  fit.mu = std::move(mu0);
  fit.pi = pi0 / pi0.sum();
  fit.sigma_hat = kind == FamilyKind::kNormal ? std::move(sigma0) : Matrix();
  fit.delta = delta;

  auto family = [&]() {
    return kind == FamilyKind::kNormal ? ComponentFamily::normal(fit.sigma_hat, delta)
                                       : ComponentFamily::poisson();
  };

  Matrix logf(d, m);
  Matrix resp(d, m);
  double prev_l = kNegInf;
  for (long t = 1; t <= max_iter; ++t) {
    ComponentFamily fam = family();
    for (Index i = 0; i < d; ++i) {
      for (Index j = 0; j < m; ++j) {
        double lf = fam.log_density(data.y.row(i).transpose(), fit.mu.row(j).transpose());
        logf(i, j) = (fit.pi(j) > 0.0 && lf != kNegInf) ? std::log(fit.pi(j)) + lf : kNegInf;
      }
    }
    double l = 0.0;
    for (Index i = 0; i < d; ++i) {
      double mx = logf.row(i).maxCoeff();
      if (mx == kNegInf) throw std::invalid_argument("zero mixture fit at an observed data point");
      double s = (logf.row(i).array() - mx).exp().sum();
      double lng = mx + std::log(s);
      l += data.counts(i) * lng;
      resp.row(i) = (logf.row(i).array() - lng).exp();
    }
    fit.loglik_trace.push_back(l);
    fit.loglik = l;
    fit.iterations = t;
    if (prev_l != kNegInf && std::abs(l - prev_l) <= tol) {
      fit.converged = true;
      break;
    }
    prev_l = l;

    // M-step.
    Vector wsum = Vector::Zero(m);
    Matrix mu_new = Matrix::Zero(m, p);
    for (Index i = 0; i < d; ++i) {
      double ni = data.counts(i);
      for (Index j = 0; j < m; ++j) {
        double r = ni * resp(i, j);
        wsum(j) += r;
        mu_new.row(j) += r * data.y.row(i);
      }
    }
    for (Index j = 0; j < m; ++j) {
      if (wsum(j) > 0.0) mu_new.row(j) /= wsum(j);
      else mu_new.row(j) = fit.mu.row(j);
    }
    fit.mu = mu_new;
    fit.pi = wsum / n;

    if (kind == FamilyKind::kNormal) {
      Matrix S = Matrix::Zero(p, p);
      for (Index i = 0; i < d; ++i) {
        double ni = data.counts(i);
        for (Index j = 0; j < m; ++j) {
          Vector diff = (data.y.row(i) - fit.mu.row(j)).transpose();
          S.noalias() += ni * resp(i, j) * diff * diff.transpose();
        }
      }
      S /= n * delta;  // pooled covariance expressed so the model is N(mu, delta*Sigma)
      S = 0.5 * (S + S.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(S);
      if (es.eigenvalues().minCoeff() < 1e-10 * S.trace()) {
        fit.collapsed = true;
        break;
      }
      fit.sigma_hat = S;
    }
  }
  return fit;
}

std::vector<double> loglik_residual(const std::vector<double>& logliks, double l_star) {
  std::vector<double> out;
  out.reserve(logliks.size());
  for (double l : logliks) out.push_back(std::abs(l_star - l));
  return out;
}

RateEstimate rate_estimate(const std::vector<double>& lambdas, long window) {
  std::vector<std::pair<double, double>> pts;  // (t, ln Lambda), positive only
  for (long t = 0; t < static_cast<long>(lambdas.size()); ++t) {
    double v = lambdas[static_cast<size_t>(t)];
    if (v > 0.0) pts.emplace_back(static_cast<double>(t), std::log(v));
  }
  if (static_cast<long>(pts.size()) > window) {
    pts.erase(pts.begin(), pts.end() - window);
  }
  if (pts.size() < 10) throw std::invalid_argument("need at least 10 positive trailing residuals");

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double k = static_cast<double>(pts.size());
  double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  double intercept = (sy - slope * sx) / k;

  RateEstimate est;
  est.slope = slope;
  est.rate = std::exp(slope);
  est.points = static_cast<long>(pts.size());
  for (auto& [x, y] : pts) {
    est.residual = std::max(est.residual, std::abs(y - (intercept + slope * x)));
  }
  return est;
}

}  // namespace npmix::em
