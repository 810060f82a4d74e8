#include "dlfpca/mean_cov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dlfpca/constants.hpp"
#include "dlfpca/errors.hpp"

namespace dlfpca {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_sigma_if_censored(const Dataset& data, double sigma,
                               const char* where) {
  if (data.has_censoring() && !(sigma > 0.0)) {
    throw std::invalid_argument(std::string(where) +
                                ": censored data needs sigma > 0");
  }
}

// Flat observation view of the dataset, restricted to subjects with at least
// `min_obs` observations. Pseudo-values bake in the censoring constants and
// the per-observation effective limit.
struct FlatObs {
  std::vector<double> t;
  std::vector<double> a;   // pseudo value
  std::vector<double> d;   // pseudo weight
  std::vector<int> subject;
  std::vector<int> kept_subjects;
};

FlatObs flatten(const Dataset& data, double sigma, std::size_t min_obs) {
  FlatObs flat;
  const double fallback = data.detection_limit.value_or(0.0);
  for (int i = 0; i < static_cast<int>(data.n_subjects()); ++i) {
    const Trajectory& traj = data.trajectories[static_cast<std::size_t>(i)];
    if (traj.size() < min_obs) continue;
    flat.kept_subjects.push_back(i);
    for (std::size_t j = 0; j < traj.size(); ++j) {
      flat.t.push_back(traj.times[j]);
      flat.a.push_back(approx::pseudo_value(traj.values[j],
                                            traj.censored[j] != 0,
                                            traj.limit_at(j, fallback), sigma));
      flat.d.push_back(approx::pseudo_weight(traj.censored[j] != 0));
      flat.subject.push_back(i);
    }
  }
  return flat;
}

}  // namespace

SigmaEstimate estimate_sigma(const Dataset& data, int degree) {
  if (degree < 0) throw std::invalid_argument("estimate_sigma: degree < 0");
  const std::size_t n_obs = data.total_observations();
  const int p = degree + 1;
  if (n_obs <= static_cast<std::size_t>(p)) {
    throw std::invalid_argument(
        "estimate_sigma: need more observations than coefficients");
  }

  // Standardized times keep the Vandermonde well conditioned.
  double lo = data.domain_lo, hi = data.domain_hi;
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  Eigen::MatrixXd design(n_obs, p);
  Eigen::VectorXd response(n_obs);
  std::size_t row = 0;
  for (const auto& traj : data.trajectories) {
    for (std::size_t j = 0; j < traj.size(); ++j, ++row) {
      const double x = (traj.times[j] - mid) / half;
      double power = 1.0;
      for (int k = 0; k < p; ++k) {
        design(row, k) = power;
        power *= x;
      }
      response(row) = traj.values[j];
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    throw std::invalid_argument(
        "estimate_sigma: singular fit (degenerate time design)");
  }
  const Eigen::VectorXd beta = qr.solve(response);
  const double rss = (response - design * beta).squaredNorm();
  const double dof = static_cast<double>(n_obs) - static_cast<double>(p);
  SigmaEstimate est;
  est.sigma = std::sqrt(std::max(0.0, rss / dof));
  est.method_tag = "pooled-poly-ols-degree-" + std::to_string(degree);
  return est;
}

bool MeanEstimate::all_estimable() const {
  return std::all_of(estimable.begin(), estimable.end(),
                     [](std::uint8_t e) { return e != 0; });
}

double MeanEstimate::value_at(double t) const {
  const auto& pts = grid.points;
  auto require = [&](std::size_t idx) {
    if (!estimable[idx]) {
      throw NonEstimableError(
          "mean not estimable near t = " + std::to_string(t), t);
    }
  };
  if (t <= pts.front()) {
    require(0);
    return values.front();
  }
  if (t >= pts.back()) {
    require(pts.size() - 1);
    return values.back();
  }
  const auto it = std::upper_bound(pts.begin(), pts.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - pts.begin());
  const std::size_t lo = hi - 1;
  require(lo);
  require(hi);
  const double frac = (t - pts[lo]) / (pts[hi] - pts[lo]);
  return values[lo] + frac * (values[hi] - values[lo]);
}

MeanEstimate local_constant_mean(const Dataset& data, double h,
                                 WeightScheme scheme, double sigma,
                                 const Grid& grid, const Kernel& kernel) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("local_constant_mean: bandwidth must be > 0");
  }
  require_sigma_if_censored(data, sigma, "local_constant_mean");

  const FlatObs flat = flatten(data, sigma, 1);
  const std::vector<double> w = mean_weights(data, scheme);
  const int num_obs = static_cast<int>(flat.t.size());
  const int g = static_cast<int>(grid.size());

  MeanEstimate est;
  est.grid = grid;
  est.values.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  est.estimable.assign(grid.size(), 0);
  est.support.assign(grid.size(), 0.0);
  est.bandwidth = h;
  est.scheme = scheme;
  est.sigma = sigma;

#pragma omp parallel for schedule(static)
  for (int gi = 0; gi < g; ++gi) {
    const double t0 = grid.points[static_cast<std::size_t>(gi)];
    double numer = 0.0, denom = 0.0;
    for (int o = 0; o < num_obs; ++o) {
      const double k = kernel((flat.t[o] - t0) / h) / h;
      const double wo = w[static_cast<std::size_t>(flat.subject[o])];
      numer += wo * flat.a[o] * k;
      denom += wo * flat.d[o] * k;
    }
    est.support[static_cast<std::size_t>(gi)] = denom;
    if (denom > kEps) {
      est.values[static_cast<std::size_t>(gi)] = numer / denom;
      est.estimable[static_cast<std::size_t>(gi)] = 1;
    }
  }
  return est;
}

bool CovSurfaceRaw::all_estimable() const {
  return (estimable.array() != 0).all();
}

CovSurfaceRaw local_constant_covariance(const Dataset& data, double h,
                                        WeightScheme scheme, double sigma,
                                        const Grid& grid,
                                        const Kernel& kernel) {
  if (!(h > 0.0)) {
    throw std::invalid_argument(
        "local_constant_covariance: bandwidth must be > 0");
  }
  require_sigma_if_censored(data, sigma, "local_constant_covariance");

  // Subjects with one observation have no pairs; dropping them up front keeps
  // their contribution exactly zero.
  const FlatObs flat = flatten(data, sigma, 2);
  if (flat.kept_subjects.empty()) {
    throw std::invalid_argument(
        "local_constant_covariance: no subject has two or more observations");
  }
  const std::vector<double> v_all = covariance_weights(data, scheme);

  const int num_obs = static_cast<int>(flat.t.size());
  const int g = static_cast<int>(grid.size());
  const int n_kept = static_cast<int>(flat.kept_subjects.size());

  // Dense subject index -> position among kept subjects.
  std::vector<int> kept_pos(data.n_subjects(), -1);
  for (int k = 0; k < n_kept; ++k) kept_pos[flat.kept_subjects[k]] = k;
  std::vector<double> v(n_kept);
  for (int k = 0; k < n_kept; ++k) {
    v[k] = v_all[static_cast<std::size_t>(flat.kept_subjects[k])];
  }

  // Kernel matrix K(g, o) and per-subject kernel sums; the pair sum over
  // j != l factors into outer products of these minus a same-observation
  // correction.
  RowMajorMatrix kmat(g, num_obs);
#pragma omp parallel for schedule(static)
  for (int gi = 0; gi < g; ++gi) {
    const double t0 = grid.points[static_cast<std::size_t>(gi)];
    double* krow = kmat.row(gi).data();
    for (int o = 0; o < num_obs; ++o) {
      krow[o] = kernel((flat.t[o] - t0) / h) / h;
    }
  }

  RowMajorMatrix ua = RowMajorMatrix::Zero(g, n_kept);
  RowMajorMatrix ud = RowMajorMatrix::Zero(g, n_kept);
#pragma omp parallel for schedule(static)
  for (int gi = 0; gi < g; ++gi) {
    const double* krow = kmat.row(gi).data();
    double* ua_row = ua.row(gi).data();
    double* ud_row = ud.row(gi).data();
    for (int o = 0; o < num_obs; ++o) {
      const int s = kept_pos[static_cast<std::size_t>(flat.subject[o])];
      ua_row[s] += krow[o] * flat.a[o];
      ud_row[s] += krow[o] * flat.d[o];
    }
  }
  RowMajorMatrix va = ua, vd = ud;
  for (int k = 0; k < n_kept; ++k) {
    va.col(k) *= v[k];
    vd.col(k) *= v[k];
  }
  std::vector<double> wa2(num_obs), wd2(num_obs);
  for (int o = 0; o < num_obs; ++o) {
    const double vo = v[kept_pos[static_cast<std::size_t>(flat.subject[o])]];
    wa2[o] = vo * flat.a[o] * flat.a[o];
    wd2[o] = vo * flat.d[o] * flat.d[o];
  }

  CovSurfaceRaw surf;
  surf.grid = grid;
  surf.values = Eigen::MatrixXd::Zero(g, g);
  surf.estimable.setOnes(g, g);
  surf.bandwidth = h;
  surf.scheme = scheme;

#pragma omp parallel for schedule(dynamic, 1)
  for (int g1 = 0; g1 < g; ++g1) {
    const double* k1 = kmat.row(g1).data();
    for (int g2 = g1; g2 < g; ++g2) {
      const double* k2 = kmat.row(g2).data();
      double corr_num = 0.0, corr_den = 0.0;
      for (int o = 0; o < num_obs; ++o) {
        const double kk = k1[o] * k2[o];
        corr_num += kk * wa2[o];
        corr_den += kk * wd2[o];
      }
      const double numer = va.row(g1).dot(ua.row(g2)) - corr_num;
      const double denom = vd.row(g1).dot(ud.row(g2)) - corr_den;
      if (denom > kEps) {
        const double c = numer / denom;
        surf.values(g1, g2) = c;
        surf.values(g2, g1) = c;
      } else {
        surf.values(g1, g2) = surf.values(g2, g1) =
            std::numeric_limits<double>::quiet_NaN();
        surf.estimable(g1, g2) = surf.estimable(g2, g1) = 0;
      }
    }
  }
  return surf;
}

Dataset center_dataset(const Dataset& data, const MeanEstimate& mean) {
  Dataset out = data;
  const bool censored_anywhere = data.has_censoring();
  const double fallback = data.detection_limit.value_or(0.0);
  for (auto& traj : out.trajectories) {
    std::vector<double> limits;
    if (censored_anywhere) limits.resize(traj.size());
    for (std::size_t j = 0; j < traj.size(); ++j) {
      const double mu = mean.value_at(traj.times[j]);
      const double shifted = traj.limit_at(j, fallback) - mu;
      if (traj.censored[j]) {
        traj.values[j] = shifted;
      } else {
        traj.values[j] -= mu;
      }
      if (censored_anywhere) limits[j] = shifted;
    }
    traj.limits = std::move(limits);
  }
  return out;
}

namespace {

// Leave-one-subject-out prediction error of the mean on uncensored values.
// Per-subject grid contributions are accumulated once; removing a subject is
// then a subtraction (the scheme's global normalizing constant cancels in the
// ratio). Returns +inf when nothing is predictable.
double loo_cv_error(const Dataset& data, double h, const SmoothingSpec& spec,
                    const Grid& grid) {
  const int n = static_cast<int>(data.n_subjects());
  const int g = static_cast<int>(grid.size());
  const FlatObs flat = flatten(data, spec.sigma, 1);
  const int num_obs = static_cast<int>(flat.t.size());

  std::vector<double> shape(data.n_subjects(), 1.0);
  if (spec.scheme == WeightScheme::kSubj) {
    for (int i = 0; i < n; ++i) {
      shape[i] = 1.0 / static_cast<double>(
                           data.trajectories[static_cast<std::size_t>(i)]
                               .size());
    }
  }

  RowMajorMatrix numer = RowMajorMatrix::Zero(n, g);
  RowMajorMatrix denom = RowMajorMatrix::Zero(n, g);
#pragma omp parallel for schedule(static)
  for (int gi = 0; gi < g; ++gi) {
    const double t0 = grid.points[static_cast<std::size_t>(gi)];
    for (int o = 0; o < num_obs; ++o) {
      const int s = flat.subject[o];
      const double k =
          spec.kernel((flat.t[o] - t0) / h) / h * shape[static_cast<std::size_t>(s)];
      numer(s, gi) += k * flat.a[o];
      denom(s, gi) += k * flat.d[o];
    }
  }
  const Eigen::RowVectorXd numer_tot = numer.colwise().sum();
  const Eigen::RowVectorXd denom_tot = denom.colwise().sum();

  double sse = 0.0;
  long count = 0;
  for (int i = 0; i < n; ++i) {
    const Trajectory& traj = data.trajectories[static_cast<std::size_t>(i)];
    std::vector<double> loo_values(grid.size());
    std::vector<std::uint8_t> ok(grid.size());
    for (int gi = 0; gi < g; ++gi) {
      const double den = denom_tot(gi) - denom(i, gi);
      ok[static_cast<std::size_t>(gi)] = den > kEps;
      loo_values[static_cast<std::size_t>(gi)] =
          ok[static_cast<std::size_t>(gi)] ? (numer_tot(gi) - numer(i, gi)) / den
                                           : 0.0;
    }
    for (std::size_t j = 0; j < traj.size(); ++j) {
      if (traj.censored[j]) continue;
      const double t = traj.times[j];
      const auto& pts = grid.points;
      std::size_t lo, hi;
      if (t <= pts.front()) {
        lo = hi = 0;
      } else if (t >= pts.back()) {
        lo = hi = pts.size() - 1;
      } else {
        hi = static_cast<std::size_t>(
            std::upper_bound(pts.begin(), pts.end(), t) - pts.begin());
        lo = hi - 1;
      }
      if (!ok[lo] || !ok[hi]) continue;
      double pred = loo_values[lo];
      if (hi != lo) {
        const double frac = (t - pts[lo]) / (pts[hi] - pts[lo]);
        pred += frac * (loo_values[hi] - loo_values[lo]);
      }
      const double err = traj.values[j] - pred;
      sse += err * err;
      ++count;
    }
  }
  if (count == 0) return std::numeric_limits<double>::infinity();
  return sse / static_cast<double>(count);
}

// Leave-one-subject-out prediction of uncensored within-subject products:
// the covariance analogue of loo_cv_error. Per-subject numerator/denominator
// surfaces are accumulated once, so removing a subject is a subtraction.
double loo_cov_cv_error(const Dataset& data, double h,
                        const SmoothingSpec& spec, const Grid& grid) {
  const int g = static_cast<int>(grid.size());
  const FlatObs flat = flatten(data, spec.sigma, 2);
  if (flat.kept_subjects.empty()) {
    return std::numeric_limits<double>::infinity();
  }
  const std::vector<double> v_all = covariance_weights(data, spec.scheme);
  const int n_kept = static_cast<int>(flat.kept_subjects.size());
  const int num_obs = static_cast<int>(flat.t.size());

  std::vector<int> kept_pos(data.n_subjects(), -1);
  for (int k = 0; k < n_kept; ++k) kept_pos[flat.kept_subjects[k]] = k;

  // Kernel values per (grid point, observation).
  RowMajorMatrix kmat(g, num_obs);
  for (int gi = 0; gi < g; ++gi) {
    for (int o = 0; o < num_obs; ++o) {
      kmat(gi, o) = spec.kernel((flat.t[o] - grid.points[static_cast<std::size_t>(gi)]) / h) / h;
    }
  }

  // Per-subject surface contributions and their totals.
  std::vector<Eigen::MatrixXd> numer(static_cast<std::size_t>(n_kept)),
      denom(static_cast<std::size_t>(n_kept));
  Eigen::MatrixXd numer_tot = Eigen::MatrixXd::Zero(g, g);
  Eigen::MatrixXd denom_tot = Eigen::MatrixXd::Zero(g, g);
  int start = 0;
  for (int k = 0; k < n_kept; ++k) {
    int end = start;
    while (end < num_obs && flat.subject[end] == flat.kept_subjects[k]) ++end;
    const int count = end - start;
    Eigen::VectorXd ua = Eigen::VectorXd::Zero(g), ud = Eigen::VectorXd::Zero(g);
    for (int gi = 0; gi < g; ++gi) {
      for (int o = start; o < end; ++o) {
        ua(gi) += kmat(gi, o) * flat.a[o];
        ud(gi) += kmat(gi, o) * flat.d[o];
      }
    }
    const double vk = v_all[static_cast<std::size_t>(flat.kept_subjects[k])];
    Eigen::MatrixXd corr_num = Eigen::MatrixXd::Zero(g, g);
    Eigen::MatrixXd corr_den = Eigen::MatrixXd::Zero(g, g);
    for (int o = start; o < end; ++o) {
      const Eigen::VectorXd kcol = kmat.col(o);
      corr_num += (flat.a[o] * flat.a[o]) * kcol * kcol.transpose();
      corr_den += (flat.d[o] * flat.d[o]) * kcol * kcol.transpose();
    }
    numer[static_cast<std::size_t>(k)] =
        vk * (ua * ua.transpose() - corr_num);
    denom[static_cast<std::size_t>(k)] =
        vk * (ud * ud.transpose() - corr_den);
    numer_tot += numer[static_cast<std::size_t>(k)];
    denom_tot += denom[static_cast<std::size_t>(k)];
    (void)count;
    start = end;
  }

  double sse = 0.0;
  long count_pairs = 0;
  for (int k = 0; k < n_kept; ++k) {
    const Trajectory& traj =
        data.trajectories[static_cast<std::size_t>(flat.kept_subjects[k])];
    const Eigen::MatrixXd loo_num =
        numer_tot - numer[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd loo_den =
        denom_tot - denom[static_cast<std::size_t>(k)];
    auto cell = [&](std::size_t g1, std::size_t g2, bool& ok) {
      const double den = loo_den(static_cast<int>(g1), static_cast<int>(g2));
      ok = den > kEps;
      return ok ? loo_num(static_cast<int>(g1), static_cast<int>(g2)) / den
                : 0.0;
    };
    auto bracket = [&](double t, std::size_t& lo, std::size_t& hi,
                       double& frac) {
      const auto& pts = grid.points;
      if (t <= pts.front()) {
        lo = hi = 0;
        frac = 0.0;
      } else if (t >= pts.back()) {
        lo = hi = pts.size() - 1;
        frac = 0.0;
      } else {
        hi = static_cast<std::size_t>(
            std::upper_bound(pts.begin(), pts.end(), t) - pts.begin());
        lo = hi - 1;
        frac = (t - pts[lo]) / (pts[hi] - pts[lo]);
      }
    };
    for (std::size_t j = 0; j < traj.size(); ++j) {
      if (traj.censored[j]) continue;
      for (std::size_t l = j + 1; l < traj.size(); ++l) {
        if (traj.censored[l]) continue;
        std::size_t j_lo, j_hi, l_lo, l_hi;
        double fj, fl;
        bracket(traj.times[j], j_lo, j_hi, fj);
        bracket(traj.times[l], l_lo, l_hi, fl);
        bool ok00, ok01, ok10, ok11;
        const double c00 = cell(j_lo, l_lo, ok00);
        const double c01 = cell(j_lo, l_hi, ok01);
        const double c10 = cell(j_hi, l_lo, ok10);
        const double c11 = cell(j_hi, l_hi, ok11);
        if (!(ok00 && ok01 && ok10 && ok11)) continue;
        const double pred = (1.0 - fj) * ((1.0 - fl) * c00 + fl * c01) +
                            fj * ((1.0 - fl) * c10 + fl * c11);
        const double err = traj.values[j] * traj.values[l] - pred;
        sse += err * err;
        ++count_pairs;
      }
    }
  }
  if (count_pairs == 0) return std::numeric_limits<double>::infinity();
  return sse / static_cast<double>(count_pairs);
}

double oracle_mean_ise(const Dataset& data, double h,
                       const SmoothingSpec& spec, const Grid& grid,
                       const BandwidthTruth& truth) {
  const MeanEstimate est =
      local_constant_mean(data, h, spec.scheme, spec.sigma, grid, spec.kernel);
  if (!est.all_estimable()) return std::numeric_limits<double>::infinity();
  double ise = 0.0;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    const double diff = est.values[gi] - truth.mean(grid.points[gi]);
    ise += grid.quad_weights[gi] * diff * diff;
  }
  return ise;
}

double oracle_cov_ise(const Dataset& data, double h, const SmoothingSpec& spec,
                      const Grid& grid, const BandwidthTruth& truth) {
  const CovSurfaceRaw est = local_constant_covariance(
      data, h, spec.scheme, spec.sigma, grid, spec.kernel);
  if (!est.all_estimable()) return std::numeric_limits<double>::infinity();
  double ise = 0.0;
  for (std::size_t g1 = 0; g1 < grid.size(); ++g1) {
    for (std::size_t g2 = 0; g2 < grid.size(); ++g2) {
      const double diff =
          est.values(g1, g2) - truth.covariance(grid.points[g1], grid.points[g2]);
      ise += grid.quad_weights[g1] * grid.quad_weights[g2] * diff * diff;
    }
  }
  return ise;
}

}  // namespace

double select_bandwidth(const Dataset& data,
                        std::span<const double> candidates,
                        BandwidthObjective objective,
                        const SmoothingSpec& spec, const Grid& grid,
                        const BandwidthTruth* truth) {
  if (candidates.empty()) {
    throw std::invalid_argument("select_bandwidth: no candidates");
  }
  const bool oracle = objective == BandwidthObjective::kOracleMean ||
                      objective == BandwidthObjective::kOracleCovariance;
  if (oracle &&
      (truth == nullptr ||
       (objective == BandwidthObjective::kOracleMean && !truth->mean) ||
       (objective == BandwidthObjective::kOracleCovariance &&
        !truth->covariance))) {
    throw std::invalid_argument(
        "select_bandwidth: oracle objective needs the truth");
  }

  double best_h = 0.0;
  double best_err = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const double h : candidates) {
    if (!(h > 0.0)) {
      throw std::invalid_argument("select_bandwidth: candidate h <= 0");
    }
    double err;
    switch (objective) {
      case BandwidthObjective::kOracleMean:
        err = oracle_mean_ise(data, h, spec, grid, *truth);
        break;
      case BandwidthObjective::kOracleCovariance:
        err = oracle_cov_ise(data, h, spec, grid, *truth);
        break;
      case BandwidthObjective::kCovCrossValidation:
        err = loo_cov_cv_error(data, h, spec, grid);
        break;
      case BandwidthObjective::kCrossValidation:
      default:
        err = loo_cv_error(data, h, spec, grid);
        break;
    }
    if (std::isinf(err)) continue;
    if (!found || err < best_err || (err == best_err && h < best_h)) {
      best_h = h;
      best_err = err;
      found = true;
    }
  }
  if (!found) {
    throw std::runtime_error(
        "select_bandwidth: every candidate was non-estimable");
  }
  return best_h;
}

std::vector<double> default_bandwidth_candidates(double a, double b) {
  const double span = b - a;
  const double lo = 0.02 * span, hi = 0.5 * span;
  const int count = 20;
  std::vector<double> out(count);
  const double ratio = std::log(hi / lo);
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] =
        lo * std::exp(ratio * static_cast<double>(i) /
                      static_cast<double>(count - 1));
  }
  return out;
}

}  // namespace dlfpca
