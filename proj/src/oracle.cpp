#include "oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "primal_recovery.hpp"

namespace npmix::oracle {

namespace {

double loglik_of(const Vector& pi, const LikelihoodMatrix& L, const Vector& counts) {
  return recover::mixture_loglik(pi, L, counts);
}

Vector polish(Vector pi, const LikelihoodMatrix& L, const Vector& counts, long iters) {
  for (long t = 0; t < iters; ++t) {
    pi = recover::em_step(pi, L.scaled, counts);
  }
  return pi;
}

}  // namespace

OracleSolution brute_force_primal(const LikelihoodMatrix& L, const Vector& counts,
                                  int resolution) {
  const Index m = L.m();
  if (m > 4) throw std::invalid_argument("grid oracle supports m <= 4");
  if (resolution < 1) throw std::invalid_argument("resolution must be >= 1");
  const double r = static_cast<double>(resolution);

  Vector best;
  double best_l = -std::numeric_limits<double>::infinity();
  Vector pi(m);
  // Lattice points (k_1,...,k_m)/resolution; ties keep the first (lowest
  // lattice index) so the argmax is deterministic.
  auto consider = [&]() {
    double l = loglik_of(pi, L, counts);
    if (l > best_l) {
      best_l = l;
      best = pi;
    }
  };
  if (m == 1) {
    pi(0) = 1.0;
    consider();
  } else if (m == 2) {
    for (int k1 = 0; k1 <= resolution; ++k1) {
      pi(0) = k1 / r;
      pi(1) = (resolution - k1) / r;
      consider();
    }
  } else if (m == 3) {
    for (int k1 = 0; k1 <= resolution; ++k1) {
      for (int k2 = 0; k2 + k1 <= resolution; ++k2) {
        pi(0) = k1 / r;
        pi(1) = k2 / r;
        pi(2) = (resolution - k1 - k2) / r;
        consider();
      }
    }
  } else {
    for (int k1 = 0; k1 <= resolution; ++k1) {
      for (int k2 = 0; k2 + k1 <= resolution; ++k2) {
        for (int k3 = 0; k3 + k2 + k1 <= resolution; ++k3) {
          pi(0) = k1 / r;
          pi(1) = k2 / r;
          pi(2) = k3 / r;
          pi(3) = (resolution - k1 - k2 - k3) / r;
          consider();
        }
      }
    }
  }

  OracleSolution out;
  out.method = "grid";
  Vector polished = polish(best, L, counts, 10000);
  double polished_l = loglik_of(polished, L, counts);
  out.coarse = polished_l - best_l > 1e-3;
  out.weights = polished_l >= best_l ? polished : best;
  out.loglik = std::max(polished_l, best_l);
  return out;
}

OracleSolution projected_ascent(const LikelihoodMatrix& L, const Vector& counts,
                                long iterations) {
  const Index m = L.m();
  Vector pi = Vector::Constant(m, 1.0 / static_cast<double>(m));
  pi = polish(std::move(pi), L, counts, iterations);
  OracleSolution out;
  out.method = "projected-ascent";
  out.weights = pi;
  out.loglik = loglik_of(pi, L, counts);
  return out;
}

FiniteDiff finite_diff(const std::function<double(const Vector&)>& fn, const Vector& x,
                       const Vector& steps) {
  const Index k = x.size();
  if (steps.size() != k) throw std::invalid_argument("steps/point size mismatch");
  auto eval = [&](const Vector& v) {
    double f = fn(v);
    if (!std::isfinite(f)) throw std::invalid_argument("non-finite evaluation in finite_diff");
    return f;
  };

  FiniteDiff out;
  out.gradient.resize(k);
  out.hessian.resize(k, k);
  for (Index i = 0; i < k; ++i) {
    Vector up = x, dn = x;
    up(i) += steps(i);
    dn(i) -= steps(i);
    out.gradient(i) = (eval(up) - eval(dn)) / (2.0 * steps(i));
  }
  for (Index i = 0; i < k; ++i) {
    for (Index j = i; j < k; ++j) {
      Vector pp = x, pm = x, mp = x, mm = x;
      pp(i) += steps(i); pp(j) += steps(j);
      pm(i) += steps(i); pm(j) -= steps(j);
      mp(i) -= steps(i); mp(j) += steps(j);
      mm(i) -= steps(i); mm(j) -= steps(j);
      double h = (eval(pp) - eval(pm) - eval(mp) + eval(mm)) / (4.0 * steps(i) * steps(j));
      out.hessian(i, j) = h;
      out.hessian(j, i) = h;
    }
  }
  return out;
}

FiniteDiff finite_diff(const std::function<double(const Vector&)>& fn, const Vector& x,
                       double step) {
  return finite_diff(fn, x, Vector::Constant(x.size(), step));
}

}  // namespace npmix::oracle
