#ifndef DLFPCA_MEAN_COV_HPP
#define DLFPCA_MEAN_COV_HPP

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dlfpca/core.hpp"

namespace dlfpca {

struct SigmaEstimate {
  double sigma = 0.0;
  std::string method_tag;
};

// Global polynomial least-squares fit pooled over all recorded values
// (censored entries enter at the detection limit); sigma is the residual
// root mean square with denominator N - degree - 1.
SigmaEstimate estimate_sigma(const Dataset& data, int degree = 4);

// Local-constant likelihood mean estimate mu(t_g) = R_0/S_0 on a grid.
// Grid points where the denominator S_0 fell below machine epsilon are
// flagged instead of extrapolated.
struct MeanEstimate {
  Grid grid;
  std::vector<double> values;
  std::vector<std::uint8_t> estimable;
  std::vector<double> support;  // S_0 per grid point
  double bandwidth = 0.0;
  WeightScheme scheme = WeightScheme::kObs;
  double sigma = 0.0;

  bool all_estimable() const;
  // Linear interpolation between estimable grid points; throws
  // NonEstimableError naming t when a bracketing point is flagged.
  double value_at(double t) const;
};

MeanEstimate local_constant_mean(const Dataset& data, double h,
                                 WeightScheme scheme, double sigma,
                                 const Grid& grid, const Kernel& kernel);

// Raw covariance surface C~(s,t) = R_00/S_00 over all within-subject ordered
// pairs j != l. Exactly symmetric; subjects with a single observation
// contribute nothing.
struct CovSurfaceRaw {
  Grid grid;
  Eigen::MatrixXd values;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> estimable;
  double bandwidth = 0.0;
  WeightScheme scheme = WeightScheme::kObs;

  bool all_estimable() const;
};

CovSurfaceRaw local_constant_covariance(const Dataset& data, double h,
                                        WeightScheme scheme, double sigma,
                                        const Grid& grid,
                                        const Kernel& kernel);

// Subtracts the interpolated mean from uncensored values and shifts the
// effective detection limit of censored entries to c - mu(t_ij), stored per
// observation.
Dataset center_dataset(const Dataset& data, const MeanEstimate& mean);

enum class BandwidthObjective {
  kOracleMean,        // ISE of the mean estimate against a known truth
  kOracleCovariance,  // ISE of the raw covariance against a known truth
  kCrossValidation,   // leave-one-subject-out prediction of uncensored values
  kCovCrossValidation,  // leave-one-subject-out prediction of uncensored
                        // within-subject products (covariance bandwidth)
};

struct BandwidthTruth {
  std::function<double(double)> mean;
  std::function<double(double, double)> covariance;
};

struct SmoothingSpec {
  WeightScheme scheme = WeightScheme::kObs;
  double sigma = 0.0;
  Kernel kernel;
};

// Smallest candidate attaining the minimal objective. Oracle objectives
// require `truth`; candidates that cannot produce a usable estimate are
// excluded.
double select_bandwidth(const Dataset& data, std::span<const double> candidates,
                        BandwidthObjective objective, const SmoothingSpec& spec,
                        const Grid& grid,
                        const BandwidthTruth* truth = nullptr);

// 20 log-spaced candidates in [0.02, 0.5] * (b - a).
std::vector<double> default_bandwidth_candidates(double a, double b);

}  // namespace dlfpca

#endif
