#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "dlfpca/core.hpp"
#include "dlfpca/rng.hpp"

using namespace dlfpca;

namespace {

// High-precision Gaussian density, written out from first principles so the
// kernel checks do not reuse the implementation path.
double phi_oracle(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

Dataset two_subject_data() {
  Dataset data;
  data.domain_lo = 0.0;
  data.domain_hi = 1.0;
  Trajectory a;
  a.subject_id = "a";
  a.times = {0.1, 0.4, 0.9};
  a.values = {1.0, 2.0, 3.0};
  a.censored = {0, 0, 0};
  Trajectory b;
  b.subject_id = "b";
  b.times = {0.2, 0.7};
  b.values = {0.5, 1.5};
  b.censored = {0, 0};
  data.trajectories = {a, b};
  return data;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("kernel_h closed-form values") {
  Kernel kernel;
  CHECK(kernel_h(kernel, 1.0, 0.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(kernel_h(kernel, 2.0, 0.0) ==
        doctest::Approx(0.5 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
  // h = 0.5, u = 0.5 -> 2 phi(1)
  CHECK(kernel_h(kernel, 0.5, 0.5) ==
        doctest::Approx(2.0 * phi_oracle(1.0)).epsilon(1e-12));
  CHECK(kernel_h(kernel, 0.5, 0.5) == doctest::Approx(0.4839414).epsilon(1e-6));
}

TEST_CASE("kernel_h rejects non-positive bandwidth") {
  Kernel kernel;
  CHECK_THROWS_AS(kernel_h(kernel, 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(kernel_h(kernel, -1.0, 0.1), std::invalid_argument);
}

TEST_CASE("kernel is symmetric, nonnegative, integrates to one") {
  Kernel kernel;
  for (double u = 0.0; u <= 5.0; u += 0.25) {
    CHECK(kernel(u) == kernel(-u));
    CHECK(kernel(u) >= 0.0);
  }
  for (const double h : {0.01, 0.1, 1.0}) {
    const int steps = 200000;
    const double lo = -8.0 * h, hi = 8.0 * h;
    const double dx = (hi - lo) / steps;
    double integral = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double weight = (i == 0 || i == steps) ? 0.5 : 1.0;
      integral += weight * kernel_h(kernel, h, lo + dx * i);
    }
    integral *= dx;
    CHECK(std::abs(integral - 1.0) < 1e-6);
  }
}

TEST_CASE("make_uniform_grid small cases") {
  const Grid g2 = make_uniform_grid(0.0, 1.0, 2);
  CHECK(g2.points == std::vector<double>{0.0, 1.0});
  CHECK(g2.quad_weights == std::vector<double>{0.5, 0.5});

  const Grid g3 = make_uniform_grid(0.0, 1.0, 3);
  CHECK(g3.points == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(g3.quad_weights == std::vector<double>{0.25, 0.5, 0.25});
}

TEST_CASE("grid weights sum to the domain length") {
  for (const auto& [a, b, g] : {std::tuple{0.0, 1.0, 100},
                                std::tuple{-2.5, 7.0, 37},
                                std::tuple{3.0, 3.5, 2}}) {
    const Grid grid = make_uniform_grid(a, b, g);
    double sum = 0.0;
    for (const double w : grid.quad_weights) sum += w;
    CHECK(std::abs(sum - (b - a)) <= 1e-12 * std::abs(b - a));
  }
}

TEST_CASE("make_uniform_grid rejects bad inputs") {
  CHECK_THROWS_AS(make_uniform_grid(0.0, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_uniform_grid(1.0, 1.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(make_uniform_grid(2.0, 1.0, 5), std::invalid_argument);
}

TEST_CASE("inner_product basics") {
  const Grid grid = make_uniform_grid(0.0, 1.0, 101);
  std::vector<double> ones(grid.size(), 1.0);
  CHECK(inner_product(ones, ones, grid) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> linear(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) linear[i] = grid.points[i];
  CHECK(std::abs(inner_product(ones, linear, grid) - 0.5) < 1e-6);
}

TEST_CASE("inner_product of the model eigenfunction") {
  const Grid grid = make_uniform_grid(0.0, 1.0, 201);
  std::vector<double> psi(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    psi[i] =
        std::numbers::sqrt2 * std::cos(4.0 * std::numbers::pi * grid.points[i]);
  }
  const double ip = inner_product(psi, psi, grid);
  CHECK(std::abs(ip - 1.0) < 1e-3);

  // Cross-check against a much finer trapezoid evaluation of the integral.
  const int steps = 2000001;
  double ref = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / (steps - 1);
    const double v = std::numbers::sqrt2 * std::cos(4.0 * std::numbers::pi * t);
    ref += ((i == 0 || i == steps - 1) ? 0.5 : 1.0) * v * v;
  }
  ref /= (steps - 1);
  CHECK(std::abs(ip - ref) < 1e-3);
}

TEST_CASE("inner_product is symmetric and bilinear") {
  const Grid grid = make_uniform_grid(0.0, 2.0, 41);
  Rng rng(7, 0);
  std::vector<double> f(grid.size()), g(grid.size()), h(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    f[i] = rng.normal();
    g[i] = rng.normal();
    h[i] = rng.normal();
  }
  CHECK(inner_product(f, g, grid) == inner_product(g, f, grid));

  const double alpha = 1.375, beta = -0.5;
  std::vector<double> combo(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    combo[i] = alpha * f[i] + beta * h[i];
  }
  const double lhs = inner_product(combo, g, grid);
  const double rhs =
      alpha * inner_product(f, g, grid) + beta * inner_product(h, g, grid);
  CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
}

TEST_CASE("inner_product rejects mismatched lengths") {
  const Grid grid = make_uniform_grid(0.0, 1.0, 5);
  std::vector<double> four(4, 1.0), five(5, 1.0);
  CHECK_THROWS_AS(inner_product(four, five, grid), std::invalid_argument);
}

TEST_CASE("dataset validation accepts well-formed data") {
  Dataset data = two_subject_data();
  CHECK_NOTHROW(data.validate());
  CHECK(data.total_observations() == 5);
  CHECK_FALSE(data.has_censoring());
}

TEST_CASE("dataset validation rejects censored value != detection limit") {
  Dataset data = two_subject_data();
  data.detection_limit = 0.0;
  data.trajectories[0].censored[1] = 1;  // value is 2.0, limit is 0.0
  CHECK_THROWS_AS(data.validate(), std::invalid_argument);

  data.trajectories[0].values[1] = 0.0;
  CHECK_NOTHROW(data.validate());
}

TEST_CASE("dataset validation enforces limit-present-iff-censored") {
  Dataset data = two_subject_data();
  data.detection_limit = -1.0;  // nothing censored
  CHECK_THROWS_AS(data.validate(), std::invalid_argument);

  Dataset data2 = two_subject_data();
  data2.trajectories[0].censored[0] = 1;  // censored but no limit anywhere
  CHECK_THROWS_AS(data2.validate(), std::invalid_argument);
}

TEST_CASE("dataset validation rejects structural problems") {
  Dataset empty;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

  Dataset data = two_subject_data();
  data.trajectories[1].values.pop_back();
  CHECK_THROWS_AS(data.validate(), std::invalid_argument);

  Dataset outside = two_subject_data();
  outside.trajectories[0].times[0] = 1.5;
  CHECK_THROWS_AS(outside.validate(), std::invalid_argument);
}

TEST_CASE("weight schemes") {
  const Dataset data = two_subject_data();  // N = {3, 2}
  const auto w_obs = mean_weights(data, WeightScheme::kObs);
  CHECK(w_obs[0] == doctest::Approx(1.0 / 5.0).epsilon(1e-15));
  CHECK(w_obs[1] == doctest::Approx(1.0 / 5.0).epsilon(1e-15));
  const auto w_subj = mean_weights(data, WeightScheme::kSubj);
  CHECK(w_subj[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(w_subj[1] == doctest::Approx(1.0 / 4.0).epsilon(1e-15));

  const auto v_obs = covariance_weights(data, WeightScheme::kObs);
  CHECK(v_obs[0] == doctest::Approx(1.0 / 8.0).epsilon(1e-15));  // 3*2 + 2*1
  CHECK(v_obs[1] == doctest::Approx(1.0 / 8.0).epsilon(1e-15));
  const auto v_subj = covariance_weights(data, WeightScheme::kSubj);
  CHECK(v_subj[0] == doctest::Approx(1.0 / 12.0).epsilon(1e-15));
  CHECK(v_subj[1] == doctest::Approx(1.0 / 4.0).epsilon(1e-15));
}

TEST_CASE("interpolate clamps and interpolates") {
  const Grid grid = make_uniform_grid(0.0, 1.0, 3);
  const std::vector<double> values{1.0, 3.0, 2.0};
  CHECK(interpolate(grid, values, -0.5) == 1.0);
  CHECK(interpolate(grid, values, 1.5) == 2.0);
  CHECK(interpolate(grid, values, 0.25) == doctest::Approx(2.0));
  CHECK(interpolate(grid, values, 0.75) == doctest::Approx(2.5));
}

}  // TEST_SUITE
