#include <doctest.h>

#include <random>

#include "oracle.hpp"
#include "penalized_dual.hpp"
#include "primal_recovery.hpp"
#include "test_helpers.hpp"

using namespace npmix;

namespace {

LikelihoodMatrix mortality_matrix(double eta) {
  static DistinctDataset data = deduplicate(testing::load_mortality(), 0.0);
  LikelihoodMatrix L = likelihood_matrix(ComponentFamily::poisson(),
                                         support_grid_1d(0.0, 9.0, eta), data);
  return L;
}

Vector mortality_counts() {
  static DistinctDataset data = deduplicate(testing::load_mortality(), 0.0);
  return data.counts;
}

}  // namespace

TEST_CASE("constraint values on hand instances") {
  LikelihoodMatrix L{(Matrix(1, 2) << 0.5, 0.5).finished(), Vector::Zero(2)};
  pd::DualState s{Vector::Zero(2), 1.0};
  Vector p = pd::constraint_values(s, L);
  CHECK(p(0) == doctest::Approx(1.0));

  // At the explicit gamma = 1 state of an m = 1 instance, p_1 = sum n_i/n = 1.
  LikelihoodMatrix L1{(Matrix(1, 3) << 0.2, 1.4, 0.7).finished(), Vector::Zero(3)};
  Vector counts(3);
  counts << 2, 1, 3;
  pd::DualState init = pd::initial_dual_state(L1, counts);
  CHECK(pd::constraint_values(init, L1)(0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("k_value on hand instances") {
  LikelihoodMatrix L{(Matrix(1, 1) << 1.0).finished(), Vector::Zero(1)};
  Vector counts(1);
  counts << 5;
  CHECK(pd::k_value({Vector::Zero(1), 1.0}, L, counts) == doctest::Approx(-1.0));
  CHECK(pd::k_value({Vector::Constant(1, -1.0), 1.0}, L, counts) ==
        doctest::Approx(-1.0 - std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("initial dual state reproduces the explicit solution") {
  LikelihoodMatrix L{(Matrix(1, 1) << 2.0).finished(), Vector::Zero(1)};
  Vector counts(1);
  counts << 4;
  pd::DualState s = pd::initial_dual_state(L, counts);
  CHECK(std::exp(s.z(0)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(s.gamma == 1.0);

  Matrix F(2, 2);
  F << 1.0, 0.0, std::exp(-1.0), std::exp(-1.0);
  LikelihoodMatrix L2{F, Vector::Zero(2)};
  Vector c2(2);
  c2 << 1, 1;
  pd::DualState s2 = pd::initial_dual_state(L2, c2);
  CHECK(std::exp(s2.z(0)) == doctest::Approx(0.5 / (1.0 + std::exp(-1.0))).epsilon(1e-14));
  CHECK(std::exp(s2.z(1)) == doctest::Approx(0.5 / std::exp(-1.0)).epsilon(1e-14));

  // Interior point: finite K, finite constraint values.
  CHECK(std::isfinite(pd::k_value(s2, L2, c2)));
  CHECK(pd::constraint_values(s2, L2).allFinite());

  LikelihoodMatrix zerocol{(Matrix(1, 1) << 0.0).finished(), Vector::Zero(1)};
  CHECK_THROWS_AS(pd::initial_dual_state(zerocol, counts), std::invalid_argument);
}

TEST_CASE("gradient vanishes at the explicit gamma = 1 solution") {
  std::mt19937 rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    testing::RandomInstance inst = testing::random_instance(rng, 2 + rng() % 7, 2 + rng() % 5);
    pd::DualState s = pd::initial_dual_state(inst.L, inst.counts);
    pd::KDerivatives kd = pd::k_gradient_hessian(s, inst.L, inst.counts);
    CHECK(kd.gradient.head(s.z.size()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("analytic derivatives of K match central finite differences") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Index d = 2 + rng() % 5;  // d <= 6
    Index m = 2 + rng() % 7;  // m <= 8
    testing::RandomInstance inst = testing::random_instance(rng, m, d, rep % 3 == 0);
    Vector z(d);
    for (Index i = 0; i < d; ++i) z(i) = -1.5 + 2.0 * unif(rng);
    double gamma = 1.0 + 6.0 * unif(rng);
    pd::DualState s{z, gamma};

    pd::KDerivatives kd = pd::k_gradient_hessian(s, inst.L, inst.counts);
    Vector x(d + 1);
    x.head(d) = z;
    x(d) = gamma;
    Vector steps = Vector::Constant(d + 1, 1e-5);
    steps(d) = 1e-4;
    auto fn = [&](const Vector& v) {
      return pd::k_value({v.head(d), v(d)}, inst.L, inst.counts);
    };
    oracle::FiniteDiff fd = oracle::finite_diff(fn, x, steps);

    double gscale = std::max(1.0, kd.gradient.cwiseAbs().maxCoeff());
    CHECK((kd.gradient - fd.gradient).cwiseAbs().maxCoeff() <= 1e-5 * gscale);
    double hscale = std::max(1.0, kd.hessian.cwiseAbs().maxCoeff());
    CHECK((kd.hessian - fd.hessian).cwiseAbs().maxCoeff() <= 1e-5 * hscale);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("z-block of the Hessian is negative definite at interior states") {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 25; ++rep) {
    Index d = 2 + rng() % 4;
    testing::RandomInstance inst = testing::random_instance(rng, 2 + rng() % 6, d);
    Vector z(d);
    for (Index i = 0; i < d; ++i) z(i) = -1.0 + 1.5 * unif(rng);
    pd::DualState s{z, 1.0 + 5.0 * unif(rng)};
    pd::KDerivatives kd = pd::k_gradient_hessian(s, inst.L, inst.counts);
    Eigen::SelfAdjointEigenSolver<Matrix> es(kd.hessian.topLeftCorner(d, d));
    CHECK(es.eigenvalues().maxCoeff() < 0.0);
  }
}

TEST_CASE("penalty terms behave as the power grows") {
  // p > 1: (p^gamma)/gamma increasing once gamma > 1/ln p; p < 1: decreasing.
  auto term = [](double p, double g) { return std::pow(p, g) / g; };
  double p_hi = 1.3;
  double start = 1.0 / std::log(p_hi);
  for (double g : {10.0, 100.0, 1000.0}) {
    if (g > start) CHECK(term(p_hi, g * 1.5) > term(p_hi, g));
  }
  double p_lo = 0.8;
  for (double g : {10.0, 100.0, 1000.0}) {
    CHECK(term(p_lo, g * 1.5) < term(p_lo, g));
  }
}

TEST_CASE("newton step increases K from the initial mortality state") {
  LikelihoodMatrix L = mortality_matrix(1.0);
  Vector counts = mortality_counts();
  pd::SolverOptions opt;
  pd::DualState s0 = pd::initial_dual_state(L, counts);
  double k0 = pd::k_value(s0, L, counts);
  pd::StepOutcome step = pd::newton_step_monotone(s0, L, counts, opt, pd::StepMode::kJoint);
  CHECK(step.accepted);
  CHECK(step.k > k0);
}

TEST_CASE("newton step is null at a stationary point with fixed gamma") {
  // Drive a small instance to machine stationarity, then ask for one more step.
  std::mt19937 rng(3);
  testing::RandomInstance inst = testing::random_instance(rng, 3, 3);
  pd::SolverOptions opt;
  pd::PdResult fit = pd::solve(inst.L, inst.counts, opt);
  pd::DualState s = fit.state;
  for (int t = 0; t < 50; ++t) {
    pd::StepOutcome polish =
        pd::newton_step_monotone(s, inst.L, inst.counts, opt, pd::StepMode::kFixedGamma);
    if (!polish.accepted) break;
    s = polish.state;
    if (polish.grad_inf < 1e-14) break;
  }
  pd::StepOutcome step =
      pd::newton_step_monotone(s, inst.L, inst.counts, opt, pd::StepMode::kFixedGamma);
  CHECK(step.direction.head(s.z.size()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gamma grows monotonically after the first iterations") {
  std::mt19937 rng(8);
  pd::SolverOptions opt;
  int ok = 0;
  const int runs = 50;
  for (int rep = 0; rep < runs; ++rep) {
    testing::RandomInstance inst = testing::random_instance(rng, 2 + rng() % 6, 2 + rng() % 4);
    pd::PdResult fit = pd::solve(inst.L, inst.counts, opt);
    bool monotone = true;
    double prev = 0.0;
    int joint_seen = 0;
    for (const auto& row : fit.trace.rows) {
      if (row.phase != 0) break;
      ++joint_seen;
      if (joint_seen > 3 && row.gamma < prev - 1e-12) monotone = false;
      prev = row.gamma;
    }
    if (monotone) ++ok;
  }
  CHECK(ok >= runs * 9 / 10);
}

TEST_CASE("solve reproduces the mortality grid fits") {
  Vector counts = mortality_counts();
  pd::SolverOptions opt;

  pd::PdResult fit1 = pd::solve(mortality_matrix(1.0), counts, opt);
  CHECK(fit1.converged);
  CHECK(fit1.loglik == doctest::Approx(-1990.0928).epsilon(5e-7));
  CHECK(fit1.iter_joint + fit1.iter_fixed <= 75);
  CHECK(fit1.psi <= opt.psi_tol);

  pd::PdResult fit01 = pd::solve(mortality_matrix(0.1), counts, opt);
  CHECK(fit01.converged);
  CHECK(fit01.loglik == doctest::Approx(-1989.9281).epsilon(5e-7));
}

TEST_CASE("invalid solver options are rejected") {
  LikelihoodMatrix L{(Matrix(1, 1) << 1.0).finished(), Vector::Zero(1)};
  Vector counts = Vector::Ones(1);
  pd::SolverOptions opt;
  opt.step_shrink = 1.0;
  CHECK_THROWS_AS(pd::solve(L, counts, opt), std::invalid_argument);
  opt.step_shrink = 0.5;
  opt.psi_tol = 0.0;
  CHECK_THROWS_AS(pd::solve(L, counts, opt), std::invalid_argument);
}

TEST_CASE("solve matches the brute-force oracle on the 2x2 toy") {
  Matrix F(2, 2);
  F << 1.0, 0.0, std::exp(-1.0), std::exp(-1.0);
  LikelihoodMatrix L{F, Vector::Zero(2)};
  Vector counts(2);
  counts << 1, 1;
  pd::SolverOptions opt;
  pd::PdResult fit = pd::solve(L, counts, opt);
  oracle::OracleSolution sol = oracle::brute_force_primal(L, counts, 64);
  CHECK(fit.loglik == doctest::Approx(sol.loglik).epsilon(1e-6));
}

TEST_CASE("K is monotone within phases and the exit state is feasible") {
  std::mt19937 rng(12);
  pd::SolverOptions opt;
  for (int rep = 0; rep < 15; ++rep) {
    testing::RandomInstance inst = testing::random_instance(rng, 2 + rng() % 6, 2 + rng() % 4);
    pd::PdResult fit = pd::solve(inst.L, inst.counts, opt);
    REQUIRE(fit.converged);

    double prev_k = -std::numeric_limits<double>::infinity();
    int prev_phase = -1;
    for (const auto& row : fit.trace.rows) {
      if (row.phase != prev_phase) {
        prev_phase = row.phase;
        prev_k = row.k;
        continue;
      }
      CHECK(row.k >= prev_k - 1e-9 * std::abs(prev_k));
      prev_k = row.k;
    }

    Vector p = pd::constraint_values(fit.state, inst.L);
    CHECK(p.maxCoeff() <= 1.0 + 1e-6);

    // Fixed-point identity at exit.
    const double n = inst.counts.sum();
    Vector s1(p.size());
    for (Index j = 0; j < p.size(); ++j) {
      s1(j) = p(j) > 0 ? std::exp((fit.state.gamma - 1.0) * std::log(p(j))) : 0.0;
    }
    Vector lhs =
        fit.state.z.array().exp() * (inst.L.scaled.transpose() * s1).array();
    for (Index i = 0; i < lhs.size(); ++i) {
      CHECK(lhs(i) == doctest::Approx(inst.counts(i) / n).epsilon(1e-6));
    }
  }
}

TEST_CASE("mortality exit state satisfies feasibility and the fixed point") {
  LikelihoodMatrix L = mortality_matrix(1.0);
  Vector counts = mortality_counts();
  pd::SolverOptions opt;
  pd::PdResult fit = pd::solve(L, counts, opt);
  Vector p = pd::constraint_values(fit.state, L);
  CHECK(p.maxCoeff() <= 1.0 + 1e-8);
  CHECK(recover::residual_check(fit.state, fit.pi, L, counts) <= 1e-5);
}

TEST_CASE("prune_inactive drops a support with zero density everywhere") {
  Matrix F(3, 2);
  F << 0.5, 0.4, 0.0, 0.0, 0.3, 0.6;  // middle support impossible
  LikelihoodMatrix L{F, Vector::Zero(2)};
  Vector counts(2);
  counts << 1, 2;
  pd::SolverOptions opt;
  pd::DualState s = pd::initial_dual_state(L, counts);
  std::vector<int> keep = pd::prune_inactive(s, L, counts, opt);
  CHECK(keep == std::vector<int>({0, 2}));

  pd::PdResult fit = pd::solve(L, counts, opt, true);
  CHECK(fit.pi(1) == 0.0);
  CHECK(fit.converged);
}

TEST_CASE("pruned and unpruned solves agree") {
  std::mt19937 rng(19);
  pd::SolverOptions opt;
  for (int rep = 0; rep < 20; ++rep) {
    testing::RandomInstance inst =
        testing::random_instance(rng, 3 + rng() % 6, 2 + rng() % 4, true);
    pd::PdResult plain = pd::solve(inst.L, inst.counts, opt, false);
    pd::PdResult pruned = pd::solve(inst.L, inst.counts, opt, true);
    CHECK(std::abs(plain.loglik - pruned.loglik) <= 1e-6);
  }
}

TEST_CASE("mortality inactive-constraint run matches the plain one") {
  LikelihoodMatrix L = mortality_matrix(1.0);
  Vector counts = mortality_counts();
  pd::SolverOptions opt;
  pd::PdResult plain = pd::solve(L, counts, opt, false);
  pd::PdResult pruned = pd::solve(L, counts, opt, true);
  CHECK(pruned.converged);
  CHECK(std::abs(plain.loglik - pruned.loglik) <= 1e-6);
  for (Index j = 0; j < pruned.pi.size(); ++j) {
    bool active = std::find(pruned.active.begin(), pruned.active.end(), j) !=
                  pruned.active.end();
    if (!active) CHECK(pruned.pi(j) == 0.0);
  }
}
