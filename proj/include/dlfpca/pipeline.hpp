#ifndef DLFPCA_PIPELINE_HPP
#define DLFPCA_PIPELINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "dlfpca/simulation.hpp"

namespace dlfpca {

enum class BiasMode { kAuto, kNone, kMonteCarlo };

// Everything cmd-fit style runs need: smoothing, bandwidth selection, bias
// handling, component choice, score estimation.
struct FitOptions {
  int grid_size = 100;
  WeightScheme scheme = WeightScheme::kObs;
  Kernel kernel;

  std::optional<double> bandwidth;  // fixed h; unset -> select from candidates
  std::optional<double> cov_bandwidth;  // covariance h; unset -> see below
  std::vector<double> candidates;       // empty -> default 20 log-spaced
  BandwidthObjective objective = BandwidthObjective::kCrossValidation;
  const BandwidthTruth* truth = nullptr;  // oracle objectives only
  int selection_grid_stride = 1;          // >1: coarser grid while selecting

  std::optional<double> sigma_override;
  int sigma_degree = 4;

  BiasMode bias = BiasMode::kAuto;  // auto: Monte-Carlo iff censoring present
  int bias_replicates = 200;
  const BiasCorrection* fixed_correction = nullptr;  // reuse a calibration

  double fve = 0.90;
  std::optional<int> num_components;  // overrides the FVE choice

  bool assume_zero_mean = false;  // skip mean estimation and centering
  bool with_scores = true;

  std::uint64_t seed = 0;  // drives the bias calibration
};

struct FitResult {
  SigmaEstimate sigma;
  double bandwidth = 0.0;      // mean bandwidth
  double cov_bandwidth = 0.0;  // covariance bandwidth
  MeanEstimate mean;  // zero function when assume_zero_mean
  Dataset centered;
  CovSurfaceRaw raw_cov;
  BiasCorrection correction;
  Eigen::MatrixXd adjusted_cov;
  EigenSystem eig;
  int num_components = 0;
  std::vector<Eigen::VectorXd> scores;  // per subject, length num_components
  std::vector<double> score_conditions;
  std::vector<std::string> warnings;  // low-support regions and the like
};

// sigma -> bandwidth -> mean -> center -> covariance -> adjust -> eigen ->
// FVE -> scores. Errors carry the failing stage name in brackets.
// Bandwidths: `objective` drives the mean bandwidth. The covariance gets its
// own leave-one-subject-out product CV on the centered data unless a fixed
// cov_bandwidth is given or an oracle objective is in use (simulation runs
// select the covariance bandwidth directly against the truth).
FitResult fit_pipeline(const Dataset& data, const FitOptions& options);

// Same machinery with censoring flags dropped (values stay at the detection
// limit); scores by the traditional per-subject average
// (1/N_i) sum_j y_ij psi_l(t_ij).
FitResult naive_fit(const Dataset& data, const FitOptions& options);

}  // namespace dlfpca

#endif
