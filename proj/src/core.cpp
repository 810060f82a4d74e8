#include "dlfpca/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dlfpca {

namespace {

bool close_to(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

bool Trajectory::has_censoring() const {
  return std::any_of(censored.begin(), censored.end(),
                     [](std::uint8_t d) { return d != 0; });
}

std::size_t Dataset::total_observations() const {
  std::size_t total = 0;
  for (const auto& traj : trajectories) total += traj.size();
  return total;
}

bool Dataset::has_censoring() const {
  return std::any_of(trajectories.begin(), trajectories.end(),
                     [](const Trajectory& t) { return t.has_censoring(); });
}

void Dataset::validate() const {
  if (trajectories.empty()) {
    throw std::invalid_argument("dataset: needs at least one trajectory");
  }
  if (!(domain_hi > domain_lo)) {
    throw std::invalid_argument("dataset: domain interval is empty");
  }
  bool any_censored = false;
  for (const auto& traj : trajectories) {
    const std::size_t n = traj.size();
    if (n == 0) {
      throw std::invalid_argument("trajectory '" + traj.subject_id +
                                  "': no observations");
    }
    if (traj.values.size() != n || traj.censored.size() != n ||
        (!traj.limits.empty() && traj.limits.size() != n)) {
      throw std::invalid_argument("trajectory '" + traj.subject_id +
                                  "': array length mismatch");
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double t = traj.times[j];
      if (!(t >= domain_lo - 1e-12 && t <= domain_hi + 1e-12)) {
        throw std::invalid_argument("trajectory '" + traj.subject_id +
                                    "': time " + std::to_string(t) +
                                    " outside domain");
      }
      if (traj.censored[j]) {
        any_censored = true;
        if (!traj.limits.empty()) {
          if (!close_to(traj.values[j], traj.limits[j])) {
            throw std::invalid_argument(
                "trajectory '" + traj.subject_id +
                "': censored value differs from its effective limit");
          }
        } else if (!detection_limit) {
          throw std::invalid_argument("dataset: censored entries but no "
                                      "detection limit");
        } else if (!close_to(traj.values[j], *detection_limit)) {
          throw std::invalid_argument(
              "trajectory '" + traj.subject_id + "': censored value " +
              std::to_string(traj.values[j]) + " != detection limit " +
              std::to_string(*detection_limit));
        }
      }
    }
  }
  if (detection_limit && !any_censored) {
    throw std::invalid_argument(
        "dataset: detection limit present but nothing is censored");
  }
}

std::vector<double> mean_weights(const Dataset& data, WeightScheme scheme) {
  const std::size_t n = data.n_subjects();
  std::vector<double> w(n);
  if (scheme == WeightScheme::kObs) {
    const double total = static_cast<double>(data.total_observations());
    std::fill(w.begin(), w.end(), 1.0 / total);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 1.0 / (static_cast<double>(n) *
                    static_cast<double>(data.trajectories[i].size()));
    }
  }
  return w;
}

std::vector<double> covariance_weights(const Dataset& data,
                                       WeightScheme scheme) {
  const std::size_t n = data.n_subjects();
  std::vector<double> v(n, 0.0);
  if (scheme == WeightScheme::kObs) {
    double total_pairs = 0.0;
    for (const auto& traj : data.trajectories) {
      const double ni = static_cast<double>(traj.size());
      total_pairs += ni * (ni - 1.0);
    }
    if (total_pairs <= 0.0) {
      throw std::invalid_argument(
          "covariance weights: no subject has two or more observations");
    }
    std::fill(v.begin(), v.end(), 1.0 / total_pairs);
  } else {
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double ni = static_cast<double>(data.trajectories[i].size());
      if (ni >= 2.0) {
        v[i] = 1.0 / (static_cast<double>(n) * ni * (ni - 1.0));
        any = true;
      }
    }
    if (!any) {
      throw std::invalid_argument(
          "covariance weights: no subject has two or more observations");
    }
  }
  return v;
}

Grid make_uniform_grid(double a, double b, int num_points) {
  if (num_points < 2) {
    throw std::invalid_argument("make_uniform_grid: need at least 2 points");
  }
  if (!(b > a)) {
    throw std::invalid_argument("make_uniform_grid: need b > a");
  }
  Grid grid;
  const int g = num_points;
  grid.points.resize(g);
  grid.quad_weights.resize(g);
  const double step = (b - a) / static_cast<double>(g - 1);
  for (int i = 0; i < g; ++i) {
    grid.points[i] = a + step * static_cast<double>(i);
    grid.quad_weights[i] = (i == 0 || i == g - 1) ? 0.5 * step : step;
  }
  grid.points.back() = b;
  return grid;
}

double inner_product(std::span<const double> f, std::span<const double> g,
                     const Grid& grid) {
  if (f.size() != grid.size() || g.size() != grid.size()) {
    throw std::invalid_argument("inner_product: array/grid length mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sum += grid.quad_weights[i] * (f[i] * g[i]);
  }
  return sum;
}

double Kernel::operator()(double u) const {
  // Gaussian density; other kernels would slot in here.
  return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}

double kernel_h(const Kernel& kernel, double h, double u) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("kernel_h: bandwidth must be positive");
  }
  return kernel(u / h) / h;
}

double interpolate(const Grid& grid, std::span<const double> values,
                   double t) {
  if (values.size() != grid.size()) {
    throw std::invalid_argument("interpolate: array/grid length mismatch");
  }
  const auto& pts = grid.points;
  if (t <= pts.front()) return values.front();
  if (t >= pts.back()) return values.back();
  const auto it = std::upper_bound(pts.begin(), pts.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - pts.begin());
  const std::size_t lo = hi - 1;
  const double frac = (t - pts[lo]) / (pts[hi] - pts[lo]);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace dlfpca
