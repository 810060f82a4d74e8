#include "dlfpca/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dlfpca/errors.hpp"

namespace dlfpca {

namespace {

[[noreturn]] void rethrow_tagged(const char* stage) {
  try {
    throw;
  } catch (const SingularSystemError& e) {
    throw SingularSystemError(std::string("[") + stage + "] " + e.what(),
                              e.condition(), e.suggested_components());
  } catch (const NonEstimableError& e) {
    throw NonEstimableError(std::string("[") + stage + "] " + e.what(),
                            e.location());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("[") + stage + "] " + e.what());
  }
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (...) {
    rethrow_tagged(name);
  }
}

MeanEstimate zero_mean(const Grid& grid) {
  MeanEstimate mean;
  mean.grid = grid;
  mean.values.assign(grid.size(), 0.0);
  mean.estimable.assign(grid.size(), 1);
  mean.support.assign(grid.size(), 0.0);
  return mean;
}

// Null model approximating the dataset's design for bias calibration:
// same subject count, density bracket chosen from the average N_i, noise and
// censoring level from the fit. Times are generated on [0,1]; covariance
// ratios are invariant under the affine map to the data's domain when the
// bandwidth is rescaled alongside.
SimConfig null_model_for(const Dataset& data, const Dataset& centered,
                         double sigma, std::uint64_t seed) {
  SimConfig config;
  config.n = static_cast<int>(data.n_subjects());
  const double mean_n = static_cast<double>(data.total_observations()) /
                        static_cast<double>(data.n_subjects());
  if (mean_n <= 20.0) {
    config.density = SimConfig::Density::kSparse;
    config.scale = std::max(100, static_cast<int>(std::lround(mean_n * 100.0 / 6.5)));
  } else {
    config.density = SimConfig::Density::kDense;
    config.scale = std::max(4, static_cast<int>(std::lround(mean_n / 0.875)));
  }
  config.sigma_eps = sigma;
  config.null_model = true;
  config.seed = seed;

  // Average effective limit on the centered scale.
  double limit_sum = 0.0;
  std::size_t limit_count = 0;
  const double fallback = centered.detection_limit.value_or(0.0);
  for (const auto& traj : centered.trajectories) {
    for (std::size_t j = 0; j < traj.size(); ++j) {
      if (traj.censored[j]) {
        limit_sum += traj.limit_at(j, fallback);
        ++limit_count;
      }
    }
  }
  if (limit_count > 0) config.dl = limit_sum / static_cast<double>(limit_count);
  return config;
}

std::vector<std::string> low_support_warnings(const MeanEstimate& mean) {
  std::vector<std::string> warnings;
  double max_support = 0.0;
  for (const double s : mean.support) max_support = std::max(max_support, s);
  if (!(max_support > 0.0)) return warnings;
  const double threshold = 0.01 * max_support;
  const auto& pts = mean.grid.points;
  std::size_t g = 0;
  while (g < pts.size()) {
    if (mean.support[g] < threshold || !mean.estimable[g]) {
      std::size_t start = g;
      while (g < pts.size() &&
             (mean.support[g] < threshold || !mean.estimable[g])) {
        ++g;
      }
      char buf[128];
      std::snprintf(buf, sizeof(buf),
                    "low support on [%.6g, %.6g]: estimates unreliable",
                    pts[start], pts[g - 1]);
      warnings.emplace_back(buf);
    } else {
      ++g;
    }
  }
  return warnings;
}

Dataset strip_censoring(const Dataset& data) {
  Dataset out = data;
  for (auto& traj : out.trajectories) {
    std::fill(traj.censored.begin(), traj.censored.end(), 0);
    traj.limits.clear();
  }
  out.detection_limit.reset();
  return out;
}

struct SmoothedFit {
  SigmaEstimate sigma;
  double bandwidth = 0.0;
  double cov_bandwidth = 0.0;
  MeanEstimate mean;
  Dataset centered;
  CovSurfaceRaw raw_cov;
  BiasCorrection correction;
  Eigen::MatrixXd adjusted_cov;
  EigenSystem eig;
  int num_components = 0;
  std::vector<std::string> warnings;
};

// Common smoothing/eigen part of the DL-aware fit and the naive baseline.
SmoothedFit smooth_and_decompose(const Dataset& data,
                                 const FitOptions& options) {
  stage("input", [&] { data.validate(); });

  SmoothedFit fit;
  fit.sigma = stage("sigma", [&] {
    if (options.sigma_override) {
      return SigmaEstimate{*options.sigma_override, "override"};
    }
    return estimate_sigma(data, options.sigma_degree);
  });

  const Grid grid =
      make_uniform_grid(data.domain_lo, data.domain_hi, options.grid_size);
  const SmoothingSpec spec{options.scheme, fit.sigma.sigma, options.kernel};

  std::vector<double> candidates = options.candidates;
  if (candidates.empty()) {
    candidates = default_bandwidth_candidates(data.domain_lo, data.domain_hi);
  }
  Grid selection_grid = grid;
  if (options.selection_grid_stride > 1) {
    const int coarse =
        std::max(2, options.grid_size / options.selection_grid_stride);
    selection_grid = make_uniform_grid(data.domain_lo, data.domain_hi, coarse);
  }

  fit.bandwidth = stage("bandwidth", [&] {
    if (options.bandwidth) {
      if (!(*options.bandwidth > 0.0)) {
        throw std::invalid_argument("bandwidth must be positive");
      }
      return *options.bandwidth;
    }
    return select_bandwidth(data, candidates, options.objective, spec,
                            selection_grid, options.truth);
  });

  if (options.assume_zero_mean) {
    fit.mean = zero_mean(grid);
    fit.centered = data;
  } else {
    fit.mean = stage("mean", [&] {
      return local_constant_mean(data, fit.bandwidth, options.scheme,
                                 fit.sigma.sigma, grid, options.kernel);
    });
    fit.warnings = low_support_warnings(fit.mean);
    fit.centered =
        stage("center", [&] { return center_dataset(data, fit.mean); });
  }

  fit.cov_bandwidth = stage("bandwidth", [&] {
    if (options.cov_bandwidth) {
      if (!(*options.cov_bandwidth > 0.0)) {
        throw std::invalid_argument("covariance bandwidth must be positive");
      }
      return *options.cov_bandwidth;
    }
    if (options.bandwidth) return *options.bandwidth;
    const bool oracle =
        options.objective == BandwidthObjective::kOracleMean ||
        options.objective == BandwidthObjective::kOracleCovariance;
    if (oracle) return fit.bandwidth;
    return select_bandwidth(fit.centered, candidates,
                            BandwidthObjective::kCovCrossValidation, spec,
                            selection_grid, options.truth);
  });

  fit.raw_cov = stage("covariance", [&] {
    CovSurfaceRaw raw = local_constant_covariance(
        fit.centered, fit.cov_bandwidth, options.scheme, fit.sigma.sigma, grid,
        options.kernel);
    if (!raw.all_estimable()) {
      const auto bad =
          (raw.estimable.array() == 0).template cast<int>().sum();
      throw std::runtime_error(std::to_string(bad) +
                               " covariance cells not estimable; "
                               "increase the bandwidth");
    }
    return raw;
  });

  fit.correction = stage("adjust", [&] {
    const bool want_mc =
        options.bias == BiasMode::kMonteCarlo ||
        (options.bias == BiasMode::kAuto && fit.centered.has_censoring() &&
         fit.sigma.sigma > 0.0);
    if (!want_mc) return BiasCorrection::none();
    if (options.fixed_correction) return *options.fixed_correction;
    // Calibrate on the unit domain (kernel ratios are scale invariant) at
    // half the grid resolution: the bias surface is smooth, and the null
    // replicates dominate the fit's cost otherwise.
    const double span = data.domain_hi - data.domain_lo;
    const int coarse = std::max(2, options.grid_size / 2);
    const Grid unit_coarse = make_uniform_grid(0.0, 1.0, coarse);
    const Grid unit_full = make_uniform_grid(0.0, 1.0, options.grid_size);
    const SimConfig null_config = null_model_for(
        data, fit.centered, fit.sigma.sigma, options.seed ^ 0xB1A5C0DEULL);
    BiasCorrection correction = calibrate_bias_mc(
        null_config, unit_coarse, fit.cov_bandwidth / span,
        options.bias_replicates, null_config.seed, options.scheme);
    correction.surface =
        resample_surface(unit_coarse, correction.surface, unit_full);
    return correction;
  });
  fit.adjusted_cov = stage("adjust", [&] {
    return adjust_covariance(fit.raw_cov, fit.correction, fit.sigma.sigma);
  });

  fit.eig = stage("eigen", [&] {
    return eigen_decompose(fit.adjusted_cov, grid);
  });
  fit.num_components = stage("components", [&] {
    if (options.num_components) {
      if (*options.num_components < 1 ||
          *options.num_components > fit.eig.size()) {
        throw std::invalid_argument("requested component count out of range");
      }
      return *options.num_components;
    }
    return select_num_components(fit.eig.eigenvalues, options.fve);
  });
  return fit;
}

FitResult to_result(SmoothedFit&& fit) {
  FitResult result;
  result.sigma = std::move(fit.sigma);
  result.bandwidth = fit.bandwidth;
  result.cov_bandwidth = fit.cov_bandwidth;
  result.mean = std::move(fit.mean);
  result.centered = std::move(fit.centered);
  result.raw_cov = std::move(fit.raw_cov);
  result.correction = std::move(fit.correction);
  result.adjusted_cov = std::move(fit.adjusted_cov);
  result.eig = std::move(fit.eig);
  result.num_components = fit.num_components;
  result.warnings = std::move(fit.warnings);
  return result;
}

}  // namespace

FitResult fit_pipeline(const Dataset& data, const FitOptions& options) {
  FitResult result = to_result(smooth_and_decompose(data, options));
  if (!options.with_scores) return result;

  stage("scores", [&] {
    const int num = result.num_components;
    const PsiFunctions psi = result.eig.interpolators(num);
    const double fallback = result.centered.detection_limit.value_or(0.0);
    const int n = static_cast<int>(result.centered.n_subjects());
    result.scores.resize(static_cast<std::size_t>(n));
    result.score_conditions.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const ScoreSystem sys = build_score_system(
          result.centered.trajectories[static_cast<std::size_t>(i)], psi,
          result.sigma.sigma, fallback);
      ScoreEstimate est = estimate_scores(sys);
      result.scores[static_cast<std::size_t>(i)] = std::move(est.xi);
      result.score_conditions[static_cast<std::size_t>(i)] = est.condition;
    }
  });
  return result;
}

FitResult naive_fit(const Dataset& data, const FitOptions& options) {
  const Dataset stripped = strip_censoring(data);
  FitOptions naive_options = options;
  naive_options.bias = BiasMode::kNone;
  naive_options.fixed_correction = nullptr;
  FitResult result = to_result(smooth_and_decompose(stripped, naive_options));
  if (!options.with_scores) return result;

  stage("scores", [&] {
    const int num = result.num_components;
    const PsiFunctions psi = result.eig.interpolators(num);
    const int n = static_cast<int>(result.centered.n_subjects());
    result.scores.resize(static_cast<std::size_t>(n));
    result.score_conditions.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      const Trajectory& traj =
          result.centered.trajectories[static_cast<std::size_t>(i)];
      Eigen::VectorXd xi = Eigen::VectorXd::Zero(num);
      for (std::size_t j = 0; j < traj.size(); ++j) {
        for (int l = 0; l < num; ++l) {
          xi(l) += traj.values[j] * psi[static_cast<std::size_t>(l)](traj.times[j]);
        }
      }
      xi /= static_cast<double>(traj.size());
      result.scores[static_cast<std::size_t>(i)] = std::move(xi);
    }
  });
  return result;
}

StudyResult run_eigen_study(const SimConfig& config,
                            const EigenStudyOptions& options) {
  config.validate();
  const auto psi_true = config.true_psi();
  const BandwidthTruth truth{nullptr, config.true_cov()};

  FitOptions fit_options;
  fit_options.grid_size = options.grid_size;
  fit_options.scheme = options.scheme;
  fit_options.candidates = options.candidates;
  fit_options.objective = BandwidthObjective::kOracleCovariance;
  fit_options.truth = &truth;
  fit_options.selection_grid_stride = options.selection_grid_stride;
  fit_options.assume_zero_mean = true;  // the model has mu == 0
  fit_options.with_scores = options.with_scores;
  fit_options.fve = options.fve;
  fit_options.seed = config.seed;
  fit_options.bias = BiasMode::kNone;

  // One calibration per scenario, at the first replicate's selected
  // bandwidth; the surface is then reused across replicates.
  BiasCorrection shared_correction;
  if (config.dl && options.bias_correction) {
    GeneratedData first = generate_dataset(config, 0);
    Dataset censored = apply_detection_limit(first.data, *config.dl);
    FitOptions probe = fit_options;
    probe.with_scores = false;
    const FitResult fit0 = fit_pipeline(censored, probe);
    SimConfig null_config = config;
    null_config.null_model = true;
    null_config.seed = config.seed ^ 0xB1A5C0DEULL;
    const int coarse = std::max(2, options.grid_size / 2);
    const Grid coarse_grid = make_uniform_grid(0.0, 1.0, coarse);
    const Grid full_grid = make_uniform_grid(0.0, 1.0, options.grid_size);
    shared_correction =
        calibrate_bias_mc(null_config, coarse_grid, fit0.cov_bandwidth,
                          options.bias_replicates, null_config.seed,
                          options.scheme);
    shared_correction.surface = resample_surface(
        coarse_grid, shared_correction.surface, full_grid);
    fit_options.bias = BiasMode::kMonteCarlo;
    fit_options.fixed_correction = &shared_correction;
  }

  StudyResult result;
  for (int r = 0; r < config.replicates; ++r) {
    try {
      GeneratedData gen = generate_dataset(config, r);
      Dataset data = config.dl ? apply_detection_limit(gen.data, *config.dl)
                               : gen.data;
      const FitResult local = fit_pipeline(data, fit_options);

      ReplicateSummary row;
      row.censored_fraction = censored_fraction(data);
      row.ise_local = ise_eigenfunction(local.eig, psi_true, local.eig.grid);
      auto truth_x = [&gen, &psi_true](int subject, double t) {
        return gen.xi[static_cast<std::size_t>(subject)] * psi_true(t);
      };
      if (options.with_scores) {
        row.imse_local = reconstruct_and_imse(local.scores, local.eig,
                                              local.num_components, {},
                                              truth_x);
      }
      if (options.with_naive) {
        const FitResult naive = naive_fit(data, fit_options);
        row.ise_naive = ise_eigenfunction(naive.eig, psi_true, naive.eig.grid);
        if (options.with_scores) {
          row.imse_naive = reconstruct_and_imse(naive.scores, naive.eig,
                                                naive.num_components, {},
                                                truth_x);
        }
      }
      result.rows.push_back(row);
    } catch (const std::exception& ex) {
      result.failures.emplace_back(r, ex.what());
    }
  }
  if (result.rows.empty()) {
    throw std::runtime_error("run_eigen_study: every replicate failed");
  }

  ReplicateSummary& agg = result.aggregate;
  for (const auto& row : result.rows) {
    agg.ise_local += row.ise_local;
    agg.ise_naive += row.ise_naive;
    agg.imse_local += row.imse_local;
    agg.imse_naive += row.imse_naive;
    agg.censored_fraction += row.censored_fraction;
  }
  const double count = static_cast<double>(result.rows.size());
  agg.ise_local /= count;
  agg.ise_naive /= count;
  agg.imse_local /= count;
  agg.imse_naive /= count;
  agg.censored_fraction /= count;
  return result;
}

}  // namespace dlfpca
