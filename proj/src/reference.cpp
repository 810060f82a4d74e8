#include "dlfpca/reference.hpp"

#include <limits>
#include <stdexcept>

#include "dlfpca/constants.hpp"

namespace dlfpca::reference {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

MeanEstimate local_constant_mean_direct(const Dataset& data, double h,
                                        WeightScheme scheme, double sigma,
                                        const Grid& grid,
                                        const Kernel& kernel) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("mean_direct: bandwidth must be > 0");
  }
  const std::vector<double> w = mean_weights(data, scheme);
  const double fallback = data.detection_limit.value_or(0.0);

  MeanEstimate est;
  est.grid = grid;
  est.values.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  est.estimable.assign(grid.size(), 0);
  est.support.assign(grid.size(), 0.0);
  est.bandwidth = h;
  est.scheme = scheme;
  est.sigma = sigma;

  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double t0 = grid.points[g];
    double numer = 0.0, denom = 0.0;
    for (std::size_t i = 0; i < data.n_subjects(); ++i) {
      const Trajectory& traj = data.trajectories[i];
      for (std::size_t j = 0; j < traj.size(); ++j) {
        const double k = kernel_h(kernel, h, traj.times[j] - t0);
        const bool censored = traj.censored[j] != 0;
        numer += w[i] * k *
                 approx::pseudo_value(traj.values[j], censored,
                                      traj.limit_at(j, fallback), sigma);
        denom += w[i] * k * approx::pseudo_weight(censored);
      }
    }
    est.support[g] = denom;
    if (denom > kEps) {
      est.values[g] = numer / denom;
      est.estimable[g] = 1;
    }
  }
  return est;
}

CovSurfaceRaw local_constant_covariance_direct(const Dataset& data, double h,
                                               WeightScheme scheme,
                                               double sigma, const Grid& grid,
                                               const Kernel& kernel) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("covariance_direct: bandwidth must be > 0");
  }
  const std::vector<double> v = covariance_weights(data, scheme);
  const double fallback = data.detection_limit.value_or(0.0);
  const int g = static_cast<int>(grid.size());

  CovSurfaceRaw surf;
  surf.grid = grid;
  surf.values.setZero(g, g);
  surf.estimable.setOnes(g, g);
  surf.bandwidth = h;
  surf.scheme = scheme;

  Eigen::MatrixXd numer = Eigen::MatrixXd::Zero(g, g);
  Eigen::MatrixXd denom = Eigen::MatrixXd::Zero(g, g);
  for (std::size_t i = 0; i < data.n_subjects(); ++i) {
    const Trajectory& traj = data.trajectories[i];
    const std::size_t n_i = traj.size();
    if (n_i < 2) continue;
    std::vector<double> a(n_i), d(n_i);
    for (std::size_t j = 0; j < n_i; ++j) {
      const bool censored = traj.censored[j] != 0;
      a[j] = approx::pseudo_value(traj.values[j], censored,
                                  traj.limit_at(j, fallback), sigma);
      d[j] = approx::pseudo_weight(censored);
    }
    for (int g1 = 0; g1 < g; ++g1) {
      for (int g2 = 0; g2 < g; ++g2) {
        double cell_num = 0.0, cell_den = 0.0;
        for (std::size_t j = 0; j < n_i; ++j) {
          const double kj = kernel_h(kernel, h, traj.times[j] - grid.points[static_cast<std::size_t>(g1)]);
          for (std::size_t l = 0; l < n_i; ++l) {
            if (l == j) continue;
            const double kl = kernel_h(kernel, h, traj.times[l] - grid.points[static_cast<std::size_t>(g2)]);
            cell_num += kj * kl * a[j] * a[l];
            cell_den += kj * kl * d[j] * d[l];
          }
        }
        numer(g1, g2) += v[i] * cell_num;
        denom(g1, g2) += v[i] * cell_den;
      }
    }
  }

  for (int g1 = 0; g1 < g; ++g1) {
    for (int g2 = 0; g2 < g; ++g2) {
      if (denom(g1, g2) > kEps) {
        surf.values(g1, g2) = numer(g1, g2) / denom(g1, g2);
      } else {
        surf.values(g1, g2) = std::numeric_limits<double>::quiet_NaN();
        surf.estimable(g1, g2) = 0;
      }
    }
  }
  // j != l runs over ordered pairs, so the surface is symmetric already;
  // average with the transpose to pin exact transpose equality.
  surf.values = (0.5 * (surf.values + surf.values.transpose())).eval();
  return surf;
}

}  // namespace dlfpca::reference
