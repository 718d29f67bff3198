#include <doctest.h>

#include <random>

#include "model_builder.hpp"
#include "synthetic.hpp"
#include "test_helpers.hpp"

using namespace npmix;

TEST_CASE("two-stage fit on a single support is the single-component MLE") {
  Matrix rows(5, 1);
  rows << 1, 2, 2, 4, 6;
  RawDataset raw = make_raw(rows);
  DistinctDataset data = deduplicate(raw, 0.0);
  Matrix t(1, 1);
  t << 3.0;
  pd::SolverOptions opt;
  model::TwoStageResult ts =
      model::two_stage_fit(data, ComponentFamily::normal(sample_covariance(raw).S, 1.0),
                           make_support(t), opt);
  CHECK(ts.step1.pi(0) == doctest::Approx(1.0));
  CHECK(ts.step2.mu(0, 0) == doctest::Approx(3.0).epsilon(1e-8));  // sample mean
}

TEST_CASE("sieve sweep on the galaxy data thins out as sigma grows") {
  RawDataset galaxy = testing::load_galaxy();
  REQUIRE(galaxy.n() == 82);
  DistinctDataset data = deduplicate(galaxy, 0.0);
  SupportSet grid = support_grid_1d(9.0, 35.0, 0.02);
  REQUIRE(grid.m() == 1301);

  pd::SolverOptions opt;
  std::vector<double> sigmas = {4.0, 2.0, 0.95, 0.5};
  model::MixtureTree tree = model::sieve_sweep(data, Matrix::Identity(1, 1),
                                               FamilyKind::kNormal, grid, sigmas, true, opt);
  REQUIRE(tree.levels.size() == 4);
  for (size_t k = 0; k < tree.levels.size(); ++k) {
    CHECK(tree.levels[k].converged);
    CHECK(tree.levels[k].psi <= opt.psi_tol);
    CHECK(tree.levels[k].weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tree.levels[k].m_hat == tree.levels[k].weights.size());
  }
  // Larger sigma, simpler fitted measure (entries are sorted descending).
  // A cluster may appear as a pair of adjacent grid points, so the coarse
  // level counts a few more actives than visual clusters.
  for (size_t k = 1; k < tree.levels.size(); ++k) {
    CHECK(tree.levels[k - 1].m_hat <= tree.levels[k].m_hat);
  }
  CHECK(tree.levels.front().m_hat <= 8);
  // Fit quality is non-increasing in the sieve value.
  for (size_t k = 1; k < tree.levels.size(); ++k) {
    CHECK(tree.levels[k].loglik >= tree.levels[k - 1].loglik - 1e-6);
  }
}

TEST_CASE("iris petal sweep shows a handful of main branches") {
  RawDataset iris = testing::load_iris();
  Matrix petals = iris.rows.rightCols(2);
  RawDataset pet = make_raw(petals);
  DistinctDataset data = deduplicate(pet, 0.0);
  Matrix S = sample_covariance(pet).S;
  pd::SolverOptions opt;
  model::MixtureTree tree =
      model::sieve_sweep(data, S, FamilyKind::kNormal, support_from_data(data),
                         {5.0, 1.0, 0.1}, false, opt);
  REQUIRE(tree.levels.size() == 3);
  CHECK(tree.levels[0].m_hat <= 4);        // coarse end: few branches
  CHECK(tree.levels[1].m_hat >= 2);
  CHECK(tree.levels[2].m_hat > tree.levels[0].m_hat);
  for (const auto& lev : tree.levels) {
    CHECK(lev.converged);
  }
}

TEST_CASE("a single sieve value reduces to a direct solve") {
  std::mt19937 rng(44);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix rows(20, 1);
  for (Index i = 0; i < 20; ++i) rows(i, 0) = gauss(rng) + (i % 2 ? 2.5 : -2.5);
  RawDataset raw = make_raw(rows);
  DistinctDataset data = deduplicate(raw, 0.0);
  Matrix S = sample_covariance(raw).S;
  SupportSet sup = support_from_data(data);
  pd::SolverOptions opt;

  model::MixtureTree tree =
      model::sieve_sweep(data, S, FamilyKind::kNormal, sup, {0.8}, false, opt);
  LikelihoodMatrix L = likelihood_matrix(ComponentFamily::normal(S, 0.8), sup, data);
  pd::PdResult direct = pd::solve(L, data.counts, opt);
  REQUIRE(tree.levels.size() == 1);
  CHECK(tree.levels[0].loglik == doctest::Approx(direct.loglik).epsilon(1e-12));
}

TEST_CASE("warm and cold sweeps agree") {
  RawDataset galaxy = testing::load_galaxy();
  DistinctDataset data = deduplicate(galaxy, 0.0);
  SupportSet sup = support_from_data(data);
  pd::SolverOptions opt;
  std::vector<double> sigmas = {3.0, 1.5, 1.0};
  model::MixtureTree warm = model::sieve_sweep(data, Matrix::Identity(1, 1),
                                               FamilyKind::kNormal, sup, sigmas, true, opt, true);
  model::MixtureTree cold = model::sieve_sweep(data, Matrix::Identity(1, 1),
                                               FamilyKind::kNormal, sup, sigmas, true, opt, false);
  REQUIRE(warm.levels.size() == cold.levels.size());
  for (size_t k = 0; k < warm.levels.size(); ++k) {
    CHECK(std::abs(warm.levels[k].loglik - cold.levels[k].loglik) <= 1e-4);
  }
}

TEST_CASE("the sweep stops descending once every observation is its own component") {
  Matrix rows(6, 1);
  rows << 0.0, 1.1, 2.3, 3.6, 5.0, 7.5;
  RawDataset raw = make_raw(rows);
  DistinctDataset data = deduplicate(raw, 0.0);
  pd::SolverOptions opt;
  model::MixtureTree tree =
      model::sieve_sweep(data, sample_covariance(raw).S, FamilyKind::kNormal,
                         support_from_data(data), {1.0, 1e-3, 1e-4}, false, opt);
  REQUIRE(!tree.levels.empty());
  bool saw_degenerate = false;
  for (const auto& lev : tree.levels) saw_degenerate = saw_degenerate || lev.degenerate;
  CHECK(saw_degenerate);
  CHECK(tree.levels.size() < 3);  // descent stops at the degenerate level
  CHECK(tree.levels.back().degenerate);
  CHECK(tree.levels.back().m_hat == data.d());
}

TEST_CASE("cdf steps") {
  recover::MixingMeasure m;
  m.supports = (Matrix(2, 1) << 2.0, 1.0).finished();
  m.weights = (Vector(2) << 0.7, 0.3).finished();
  model::CdfSteps steps = model::cdf_of_measure(m);
  CHECK(steps.theta(0) == 1.0);
  CHECK(steps.cumulative(0) == doctest::Approx(0.3));
  CHECK(steps.cumulative(1) == doctest::Approx(1.0).epsilon(1e-12));

  // Permuting the support order does not change the steps.
  recover::MixingMeasure perm;
  perm.supports = (Matrix(2, 1) << 1.0, 2.0).finished();
  perm.weights = (Vector(2) << 0.3, 0.7).finished();
  model::CdfSteps steps2 = model::cdf_of_measure(perm);
  CHECK((steps.theta - steps2.theta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((steps.cumulative - steps2.cumulative).cwiseAbs().maxCoeff() == 0.0);

  recover::MixingMeasure multi;
  multi.supports = Matrix::Zero(2, 2);
  multi.weights = (Vector(2) << 0.5, 0.5).finished();
  CHECK_THROWS_AS(model::cdf_of_measure(multi), std::invalid_argument);
}

TEST_CASE("high-dimensional data survives the scaled likelihood path") {
  // p = 12 densities underflow in linear space; the per-column shift keeps
  // the solve well-posed.
  io::SyntheticDesign design;
  design.n = 200;
  design.p = 12;
  design.coords = {-6.0, 6.0};
  io::SyntheticResult syn = io::generate_synthetic(design, 31);
  DistinctDataset data = deduplicate(syn.data, 0.0);
  Matrix S = sample_covariance(syn.data).S;

  LikelihoodMatrix L = likelihood_matrix(ComponentFamily::normal(S, 0.02),
                                         support_from_data(data), data);
  // Cross-cluster densities fall below the smallest representable double,
  // so the unshifted matrix would hold exact zeros off the diagonal blocks.
  double min_logf = 0.0;
  for (Index i = 0; i < L.d(); ++i) {
    for (Index j = 0; j < L.m(); ++j) {
      if (L.scaled(j, i) > 0.0) {
        min_logf = std::min(min_logf, L.log_shift(i) + std::log(L.scaled(j, i)));
      }
    }
  }
  CHECK(min_logf < -745.0);
  CHECK(L.scaled.colwise().maxCoeff().minCoeff() == doctest::Approx(1.0));

  pd::SolverOptions opt;
  pd::PdResult fit = pd::solve(L, data.counts, opt);
  CHECK(fit.converged);
  CHECK(std::isfinite(fit.loglik));
  CHECK(pd::constraint_values(fit.state, L).maxCoeff() <= 1.0 + 1e-6);
}

TEST_CASE("mortality CDFs contrast the parsimonious and overparameterized fits") {
  DistinctDataset data = deduplicate(testing::load_mortality(), 0.0);
  SupportSet grid = support_grid_1d(0.0, 9.0, 0.01);
  LikelihoodMatrix L = likelihood_matrix(ComponentFamily::poisson(), grid, data);
  pd::SolverOptions opt;

  pd::PdResult fit = pd::solve(L, data.counts, opt);
  em::DiscreteEmResult dem = em::discrete_em_solve(L, data.counts, Vector(),
                                                   em::StopRule::kLoglikChange, 1e-4, 100000);

  long pd_active = 0, dem_active = 0;
  for (Index j = 0; j < grid.m(); ++j) {
    if (fit.pi(j) > 1e-6) ++pd_active;
    if (dem.pi(j) > 1e-6) ++dem_active;
  }
  CHECK(pd_active <= 40);     // few big jumps
  CHECK(dem_active >= 100);   // many small jumps left behind
}
