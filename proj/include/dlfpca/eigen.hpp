#ifndef DLFPCA_EIGEN_HPP
#define DLFPCA_EIGEN_HPP

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "dlfpca/mean_cov.hpp"

namespace dlfpca {

// Correction for the censoring-induced bias of the raw covariance:
// C_hat = C~ - B * sigma^2. The surface B is calibrated empirically from a
// pure-noise model (see calibrate_bias_from_replicates) since its closed form
// is not available here.
struct BiasCorrection {
  enum class Tag { kNone, kMonteCarlo };
  Tag tag = Tag::kNone;
  Eigen::MatrixXd surface;  // present iff tag == kMonteCarlo

  static BiasCorrection none() { return {}; }
};

Eigen::MatrixXd adjust_covariance(const CovSurfaceRaw& raw,
                                  const BiasCorrection& correction,
                                  double sigma);

// Averages C~/sigma^2 over `replicates` pure-noise datasets produced by
// `make_null_dataset(r)`. Cells that were not estimable in a replicate are
// excluded from that cell's average.
BiasCorrection calibrate_bias_from_replicates(
    const std::function<Dataset(int replicate)>& make_null_dataset,
    const Grid& grid, double h, int replicates, WeightScheme scheme,
    double sigma);

// Bilinear resampling of a surface between evaluation grids (used to move a
// coarse-grid bias calibration onto the working grid).
Eigen::MatrixXd resample_surface(const Grid& from, const Eigen::MatrixXd& values,
                                 const Grid& to);

// Full eigen decomposition of the discretized covariance operator.
// Eigenfunctions are orthonormal under the grid's quadrature inner product;
// eigenvalues are descending with negatives clamped to zero (raw_trace keeps
// the pre-clamp total). Sign convention: the entry of maximal absolute value
// is positive, ties broken by the smallest grid index.
struct EigenSystem {
  Grid grid;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenfunctions;  // column l = psi_l sampled on the grid
  double raw_trace = 0.0;

  int size() const { return static_cast<int>(eigenvalues.size()); }
  // Linear-interpolation evaluators for the first L eigenfunctions.
  std::vector<std::function<double(double)>> interpolators(int num) const;
};

EigenSystem eigen_decompose(const Eigen::MatrixXd& surface, const Grid& grid);

// Smallest L whose leading eigenvalues explain at least `fve_threshold` of
// the total (clamped) variance.
int select_num_components(std::span<const double> eigenvalues,
                          double fve_threshold);
int select_num_components(const Eigen::VectorXd& eigenvalues,
                          double fve_threshold);

}  // namespace dlfpca

#endif
