#ifndef DLFPCA_CORE_HPP
#define DLFPCA_CORE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dlfpca {

// One subject's observations {(t_ij, y_ij, delta_ij)}. Censored entries carry
// the detection limit as their recorded value, the way instruments report DL
// data. `limits` is empty for raw data; after centering it holds the
// per-observation effective limit c - mu(t_ij) (and equals the recorded value
// of censored entries).
struct Trajectory {
  std::string subject_id;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<std::uint8_t> censored;
  std::vector<double> limits;

  std::size_t size() const { return times.size(); }
  bool has_censoring() const;
  // Effective detection limit for observation j; `fallback` is the dataset
  // limit used when the trajectory has no per-observation limits.
  double limit_at(std::size_t j, double fallback) const {
    return limits.empty() ? fallback : limits[j];
  }
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  std::optional<double> detection_limit;
  double domain_lo = 0.0;
  double domain_hi = 1.0;

  std::size_t n_subjects() const { return trajectories.size(); }
  std::size_t total_observations() const;
  bool has_censoring() const;
  // Throws std::invalid_argument on any broken invariant (empty dataset,
  // length mismatches, times outside the domain, censored values that do not
  // equal the applicable detection limit, limit present without censoring).
  void validate() const;
};

// OBS weights every observation equally, SUBJ every subject.
enum class WeightScheme { kObs, kSubj };

// Per-subject weights w_i (mean) and v_i (covariance) for a scheme.
std::vector<double> mean_weights(const Dataset& data, WeightScheme scheme);
std::vector<double> covariance_weights(const Dataset& data, WeightScheme scheme);

// Evaluation grid with quadrature weights summing to the domain length.
struct Grid {
  std::vector<double> points;
  std::vector<double> quad_weights;

  std::size_t size() const { return points.size(); }
  double lo() const { return points.front(); }
  double hi() const { return points.back(); }
};

// Equally spaced points with trapezoidal weights.
Grid make_uniform_grid(double a, double b, int num_points);

// Quadrature inner product sum_g w_g f_g g_g of two functions sampled on the
// grid.
double inner_product(std::span<const double> f, std::span<const double> g,
                     const Grid& grid);

struct Kernel {
  enum class Type { kGaussian };
  Type type = Type::kGaussian;

  double operator()(double u) const;
};

// K_h(u) = K(u/h)/h.
double kernel_h(const Kernel& kernel, double h, double u);

// Linear interpolation of (grid.points, values) at t, clamped to the end
// values outside the grid range.
double interpolate(const Grid& grid, std::span<const double> values, double t);

}  // namespace dlfpca

#endif
