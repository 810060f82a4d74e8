#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "dlfpca/pipeline.hpp"
#include "dlfpca/simulation.hpp"

using namespace dlfpca;

namespace {

bool identical_datasets(const Dataset& a, const Dataset& b) {
  if (a.n_subjects() != b.n_subjects()) return false;
  for (std::size_t i = 0; i < a.n_subjects(); ++i) {
    if (a.trajectories[i].times != b.trajectories[i].times) return false;
    if (a.trajectories[i].values != b.trajectories[i].values) return false;
    if (a.trajectories[i].censored != b.trajectories[i].censored) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("degenerate generator settings give the zero function") {
  SimConfig config;
  config.n = 5;
  config.sigma_eps = 0.0;
  config.lambda = 0.0;
  config.seed = 3;
  const GeneratedData gen = generate_dataset(config, 0);
  for (const auto& traj : gen.data.trajectories) {
    for (const double v : traj.values) CHECK(v == 0.0);
  }
  for (const double xi : gen.xi) CHECK(xi == 0.0);
}

TEST_CASE("generator is deterministic in (seed, replicate)") {
  SimConfig config;
  config.n = 20;
  config.seed = 42;
  const GeneratedData a = generate_dataset(config, 7);
  const GeneratedData b = generate_dataset(config, 7);
  CHECK(identical_datasets(a.data, b.data));
  CHECK(a.xi == b.xi);

  const GeneratedData c = generate_dataset(config, 8);
  CHECK_FALSE(identical_datasets(a.data, c.data));
}

TEST_CASE("observation counts follow the density rules") {
  SimConfig sparse;
  sparse.n = 300;
  sparse.seed = 5;
  for (const auto& traj : generate_dataset(sparse, 0).data.trajectories) {
    CHECK(traj.size() >= 3);
    CHECK(traj.size() <= 10);
    for (std::size_t j = 1; j < traj.size(); ++j) {
      CHECK(traj.times[j] >= traj.times[j - 1]);
    }
    for (const double t : traj.times) {
      CHECK(t >= 0.0);
      CHECK(t <= 1.0);
    }
  }

  SimConfig scaled = sparse;
  scaled.scale = 200;
  for (const auto& traj : generate_dataset(scaled, 0).data.trajectories) {
    CHECK(traj.size() >= 6);
    CHECK(traj.size() <= 20);
  }

  SimConfig dense;
  dense.n = 100;
  dense.density = SimConfig::Density::kDense;
  dense.seed = 5;
  for (const auto& traj : generate_dataset(dense, 0).data.trajectories) {
    CHECK(traj.size() >= 75);
    CHECK(traj.size() <= 100);
  }

  SimConfig bad;
  bad.scale = 50;
  CHECK_THROWS_AS(generate_dataset(bad, 0), std::invalid_argument);
}

TEST_CASE("apply_detection_limit uses a strict inequality") {
  Dataset data;
  Trajectory traj;
  traj.subject_id = "x";
  traj.times = {0.1, 0.5, 0.9};
  traj.values = {-2.0, 0.0, 1.0};
  traj.censored = {0, 0, 0};
  data.trajectories = {traj};

  const Dataset censored = apply_detection_limit(data, 0.0);
  CHECK(censored.trajectories[0].values == std::vector<double>{0.0, 0.0, 1.0});
  CHECK(censored.trajectories[0].censored ==
        std::vector<std::uint8_t>{1, 0, 0});
  CHECK(censored.detection_limit == 0.0);
  CHECK_NOTHROW(censored.validate());

  // A limit below every value leaves the dataset unchanged and unflagged.
  const Dataset untouched = apply_detection_limit(data, -10.0);
  CHECK(identical_datasets(untouched, data));
  CHECK_FALSE(untouched.detection_limit.has_value());
}

TEST_CASE("censoring fractions match the model") {
  SimConfig config;
  config.n = 10000;
  config.seed = 314;
  const Dataset sparse = generate_dataset(config, 0).data;
  CHECK(std::abs(censored_fraction(apply_detection_limit(sparse, 0.0)) - 0.5) <=
        0.01);
  // Paper-observed rates: 25.66% sparse, 27.26% dense at DL = -1.
  CHECK(std::abs(censored_fraction(apply_detection_limit(sparse, -1.0)) -
                 0.2566) <= 0.02);

  SimConfig dense = config;
  dense.n = 1500;
  dense.density = SimConfig::Density::kDense;
  const Dataset dense_data = generate_dataset(dense, 0).data;
  CHECK(std::abs(censored_fraction(apply_detection_limit(dense_data, -1.0)) -
                 0.2726) <= 0.02);
}

TEST_CASE("score_metrics formulas") {
  const std::vector<double> xi{1.0, 2.0, 3.0};
  const ScoreMetrics zero = score_metrics(xi, xi, xi);
  CHECK(zero.mse_star == 0.0);
  CHECK(zero.mse_dstar == 0.0);
  CHECK(zero.mean == doctest::Approx(2.0));
  CHECK(zero.variance == doctest::Approx(1.0));

  const std::vector<double> shifted{2.0, 3.0, 4.0};
  const ScoreMetrics one = score_metrics(shifted, xi, xi);
  CHECK(one.mse_star == doctest::Approx(1.0));

  const std::vector<double> bad{1.0};
  CHECK_THROWS_AS(score_metrics(bad, xi, xi), std::invalid_argument);
}

TEST_CASE("ise_eigenfunction is sign-aligned") {
  const Grid grid = make_uniform_grid(0.0, 1.0, 201);
  const auto psi = [](double t) {
    return std::numbers::sqrt2 * std::cos(4.0 * std::numbers::pi * t);
  };
  EigenSystem sys;
  sys.grid = grid;
  sys.eigenvalues = Eigen::VectorXd::Constant(1, 2.0);
  sys.eigenfunctions.resize(static_cast<int>(grid.size()), 1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sys.eigenfunctions(static_cast<int>(i), 0) = psi(grid.points[i]);
  }
  CHECK(ise_eigenfunction(sys, psi, grid) == doctest::Approx(0.0));

  sys.eigenfunctions.col(0) *= -1.0;
  CHECK(ise_eigenfunction(sys, psi, grid) == doctest::Approx(0.0));

  for (std::size_t i = 0; i < grid.size(); ++i) {
    sys.eigenfunctions(static_cast<int>(i), 0) = psi(grid.points[i]) + 0.1;
  }
  CHECK(std::abs(ise_eigenfunction(sys, psi, grid) - 0.01) < 1e-6);
}

TEST_CASE("reconstruction error formulas") {
  const Grid grid = make_uniform_grid(0.0, 2.0, 101);
  EigenSystem sys;
  sys.grid = grid;
  sys.eigenvalues = Eigen::VectorXd::Constant(1, 1.0);
  sys.eigenfunctions = Eigen::MatrixXd::Ones(101, 1);

  std::vector<Eigen::VectorXd> scores{Eigen::VectorXd::Constant(1, 1.5)};
  auto truth_exact = [](int, double) { return 1.5; };
  CHECK(reconstruct_and_imse(scores, sys, 1, {}, truth_exact) ==
        doctest::Approx(0.0));

  auto truth_offset = [](int, double) { return 1.5 + 0.25; };
  CHECK(reconstruct_and_imse(scores, sys, 1, {}, truth_offset) ==
        doctest::Approx(0.0625 * 2.0).epsilon(1e-9));

  CHECK_THROWS_AS(
      reconstruct_and_imse({}, sys, 1, {}, truth_exact),
      std::invalid_argument);
}

TEST_CASE("run_score_study: single replicate equals its aggregate") {
  SimConfig config;
  config.n = 40;
  config.seed = 11;
  config.dl = 0.0;
  config.replicates = 1;
  const StudyResult res = run_score_study(config);
  REQUIRE(res.rows.size() == 1);
  CHECK(res.aggregate.score_mean == res.rows[0].score_mean);
  CHECK(res.aggregate.mse_star == res.rows[0].mse_star);
  CHECK(res.failures.empty());
}

TEST_CASE("run_score_study is seed-deterministic") {
  SimConfig config;
  config.n = 30;
  config.seed = 2024;
  config.dl = -1.0;
  config.replicates = 4;
  const StudyResult a = run_score_study(config);
  const StudyResult b = run_score_study(config);
  CHECK(a.aggregate.mse_star == b.aggregate.mse_star);
  CHECK(a.aggregate.score_var == b.aggregate.score_var);
  CHECK(a.aggregate.mse_star_trad == b.aggregate.mse_star_trad);
}

TEST_CASE("calibrate_bias_mc: no censoring gives a near-zero surface") {
  SimConfig null_config;
  null_config.n = 25;
  null_config.null_model = true;
  null_config.sigma_eps = 1.0;
  // dl unset: nothing is censored.
  const Grid grid = make_uniform_grid(0.0, 1.0, 9);
  const int reps = 150;
  const BiasCorrection correction =
      calibrate_bias_mc(null_config, grid, 0.15, reps, 99);
  REQUIRE(correction.tag == BiasCorrection::Tag::kMonteCarlo);
  const double bound = 3.0 / std::sqrt(static_cast<double>(reps));
  CHECK(correction.surface.cwiseAbs().maxCoeff() < bound);
}

TEST_CASE("naive_fit equals the DL-aware fit when nothing is censored") {
  SimConfig config;
  config.n = 25;
  config.seed = 8;
  const Dataset data = generate_dataset(config, 0).data;

  FitOptions options;
  options.grid_size = 25;
  options.bandwidth = 0.15;
  options.assume_zero_mean = true;
  options.with_scores = false;

  const FitResult local = fit_pipeline(data, options);
  const FitResult naive = naive_fit(data, options);
  CHECK((local.raw_cov.values - naive.raw_cov.values).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((local.eig.eigenvalues - naive.eig.eigenvalues).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(local.sigma.sigma == naive.sigma.sigma);
}

}  // TEST_SUITE
