#include "dlfpca/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "dlfpca/rng.hpp"

namespace dlfpca {

void SimConfig::validate() const {
  if (n < 1) throw std::invalid_argument("SimConfig: n must be >= 1");
  if (replicates < 1) {
    throw std::invalid_argument("SimConfig: replicates must be >= 1");
  }
  if (density == Density::kSparse && scale < 100) {
    throw std::invalid_argument("SimConfig: sparse setting needs M >= 100");
  }
  if (density == Density::kDense && scale < 4) {
    throw std::invalid_argument("SimConfig: dense setting needs M >= 4");
  }
  if (sigma_eps < 0.0 || lambda < 0.0) {
    throw std::invalid_argument("SimConfig: negative variance");
  }
}

std::function<double(double)> SimConfig::true_psi() const {
  return [](double t) {
    return std::numbers::sqrt2 * std::cos(4.0 * std::numbers::pi * t);
  };
}

std::function<double(double, double)> SimConfig::true_cov() const {
  if (null_model) {
    return [](double, double) { return 0.0; };
  }
  const double lam = lambda;
  auto psi = true_psi();
  return [lam, psi](double s, double t) { return lam * psi(s) * psi(t); };
}

GeneratedData generate_dataset(const SimConfig& config, int replicate_index) {
  config.validate();
  Rng rng(config.seed, static_cast<std::uint64_t>(replicate_index));
  const auto psi = config.true_psi();

  GeneratedData out;
  out.data.domain_lo = 0.0;
  out.data.domain_hi = 1.0;
  out.data.trajectories.reserve(static_cast<std::size_t>(config.n));
  out.xi.reserve(static_cast<std::size_t>(config.n));

  for (int i = 0; i < config.n; ++i) {
    int n_i;
    if (config.density == SimConfig::Density::kSparse) {
      const int base = rng.uniform_int(3, 10);
      n_i = std::max(1, static_cast<int>(std::lround(
                            base * static_cast<double>(config.scale) / 100.0)));
    } else {
      const int lo = static_cast<int>(
          std::ceil(0.75 * static_cast<double>(config.scale)));
      n_i = rng.uniform_int(lo, config.scale);
    }
    const double xi = config.null_model
                          ? 0.0
                          : rng.normal(0.0, std::sqrt(config.lambda));

    std::vector<std::pair<double, double>> draws(
        static_cast<std::size_t>(n_i));
    for (auto& d : draws) d.first = rng.uniform();
    for (auto& d : draws) d.second = rng.normal(0.0, config.sigma_eps);
    std::sort(draws.begin(), draws.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    Trajectory traj;
    traj.subject_id = "s" + std::to_string(i + 1);
    traj.times.reserve(draws.size());
    traj.values.reserve(draws.size());
    traj.censored.assign(draws.size(), 0);
    for (const auto& [t, eps] : draws) {
      traj.times.push_back(t);
      traj.values.push_back(xi * psi(t) + eps);
    }
    out.data.trajectories.push_back(std::move(traj));
    out.xi.push_back(xi);
  }
  return out;
}

Dataset apply_detection_limit(const Dataset& data, double c) {
  Dataset out = data;
  bool any = false;
  for (auto& traj : out.trajectories) {
    for (std::size_t j = 0; j < traj.size(); ++j) {
      if (traj.values[j] < c) {
        traj.values[j] = c;
        traj.censored[j] = 1;
        any = true;
      } else {
        traj.censored[j] = 0;
      }
    }
  }
  out.detection_limit = any ? std::optional<double>(c) : std::nullopt;
  return out;
}

double censored_fraction(const Dataset& data) {
  std::size_t censored = 0, total = 0;
  for (const auto& traj : data.trajectories) {
    total += traj.size();
    for (const auto d : traj.censored) censored += (d != 0);
  }
  return total == 0 ? 0.0
                    : static_cast<double>(censored) / static_cast<double>(total);
}

BiasCorrection calibrate_bias_mc(const SimConfig& null_model, const Grid& grid,
                                 double h, int replicates, std::uint64_t seed,
                                 WeightScheme scheme) {
  SimConfig config = null_model;
  config.null_model = true;
  config.seed = seed;
  config.validate();
  const double sigma = config.sigma_eps;
  auto make_null = [config](int rep) {
    Dataset data = generate_dataset(config, rep).data;
    if (config.dl) data = apply_detection_limit(data, *config.dl);
    return data;
  };
  return calibrate_bias_from_replicates(make_null, grid, h, replicates, scheme,
                                        sigma);
}

double ise_eigenfunction(const EigenSystem& est,
                         const std::function<double(double)>& truth,
                         const Grid& grid) {
  if (est.size() < 1) {
    throw std::invalid_argument("ise_eigenfunction: no components");
  }
  double plus = 0.0, minus = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double psi_true = truth(grid.points[g]);
    const double psi_hat = est.eigenfunctions(static_cast<int>(g), 0);
    const double dp = psi_hat - psi_true;
    const double dm = -psi_hat - psi_true;
    plus += grid.quad_weights[g] * dp * dp;
    minus += grid.quad_weights[g] * dm * dm;
  }
  return std::min(plus, minus);
}

ScoreMetrics score_metrics(std::span<const double> xi_hat,
                           std::span<const double> xi_true,
                           std::span<const double> a_surrogate) {
  const std::size_t n = xi_hat.size();
  if (xi_true.size() != n || a_surrogate.size() != n || n == 0) {
    throw std::invalid_argument("score_metrics: length mismatch");
  }
  ScoreMetrics m;
  for (const double x : xi_hat) m.mean += x;
  m.mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double centered = xi_hat[i] - m.mean;
    m.variance += centered * centered;
    m.mse_star += (xi_hat[i] - xi_true[i]) * (xi_hat[i] - xi_true[i]);
    m.mse_dstar += (xi_hat[i] - a_surrogate[i]) * (xi_hat[i] - a_surrogate[i]);
  }
  m.variance /= static_cast<double>(n > 1 ? n - 1 : 1);
  m.mse_star /= static_cast<double>(n);
  m.mse_dstar /= static_cast<double>(n);
  return m;
}

namespace {

Eigen::VectorXd reconstruct_on_grid(const Eigen::VectorXd& scores,
                                    const EigenSystem& eig, int num_components,
                                    std::span<const double> mean_on_grid) {
  const int g = static_cast<int>(eig.grid.size());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(g);
  if (!mean_on_grid.empty()) {
    for (int i = 0; i < g; ++i) x(i) = mean_on_grid[static_cast<std::size_t>(i)];
  }
  for (int l = 0; l < num_components; ++l) {
    x += scores(l) * eig.eigenfunctions.col(l);
  }
  return x;
}

}  // namespace

double reconstruct_and_imse(const std::vector<Eigen::VectorXd>& scores,
                            const EigenSystem& eig, int num_components,
                            std::span<const double> mean_on_grid,
                            const std::function<double(int, double)>& truth_x) {
  if (scores.empty()) {
    throw std::invalid_argument("reconstruct_and_imse: missing scores");
  }
  const Grid& grid = eig.grid;
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() < num_components) {
      throw std::invalid_argument("reconstruct_and_imse: missing scores");
    }
    const Eigen::VectorXd x =
        reconstruct_on_grid(scores[i], eig, num_components, mean_on_grid);
    double ise = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double diff =
          x(static_cast<int>(g)) - truth_x(static_cast<int>(i), grid.points[g]);
      ise += grid.quad_weights[g] * diff * diff;
    }
    total += ise;
  }
  return total / static_cast<double>(scores.size());
}

double reconstruct_and_imse(const std::vector<Eigen::VectorXd>& scores,
                            const EigenSystem& eig, int num_components,
                            std::span<const double> mean_on_grid,
                            const Dataset& observed) {
  if (scores.size() != observed.n_subjects()) {
    throw std::invalid_argument("reconstruct_and_imse: missing scores");
  }
  const Grid& grid = eig.grid;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Trajectory& traj = observed.trajectories[i];
    std::vector<double> t_obs, y_obs;
    for (std::size_t j = 0; j < traj.size(); ++j) {
      if (!traj.censored[j]) {
        t_obs.push_back(traj.times[j]);
        y_obs.push_back(traj.values[j]);
      }
    }
    if (t_obs.size() < 2) continue;  // nothing to compare against
    const Eigen::VectorXd x =
        reconstruct_on_grid(scores[i], eig, num_components, mean_on_grid);
    double ise = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double t = grid.points[g];
      if (t < t_obs.front() || t > t_obs.back()) continue;
      const auto it = std::upper_bound(t_obs.begin(), t_obs.end(), t);
      double y;
      if (it == t_obs.begin()) {
        y = y_obs.front();
      } else if (it == t_obs.end()) {
        y = y_obs.back();
      } else {
        const std::size_t hi = static_cast<std::size_t>(it - t_obs.begin());
        const std::size_t lo = hi - 1;
        const double frac = (t - t_obs[lo]) / (t_obs[hi] - t_obs[lo]);
        y = y_obs[lo] + frac * (y_obs[hi] - y_obs[lo]);
      }
      const double diff = x(static_cast<int>(g)) - y;
      ise += grid.quad_weights[g] * diff * diff;
    }
    total += ise;
    ++used;
  }
  if (used == 0) {
    throw std::invalid_argument(
        "reconstruct_and_imse: no subject has two uncensored observations");
  }
  return total / static_cast<double>(used);
}

StudyResult run_score_study(const SimConfig& config) {
  config.validate();
  StudyResult result;
  result.rows.reserve(static_cast<std::size_t>(config.replicates));
  const auto psi_true = config.true_psi();
  const PsiFunctions psi{psi_true};
  const double sigma = config.sigma_eps;
  const double dl = config.dl.value_or(0.0);

  std::vector<ReplicateSummary> rows(
      static_cast<std::size_t>(config.replicates));
  std::vector<std::uint8_t> ok(static_cast<std::size_t>(config.replicates), 0);
  std::vector<std::string> errors(static_cast<std::size_t>(config.replicates));

#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < config.replicates; ++r) {
    try {
      GeneratedData gen = generate_dataset(config, r);
      Dataset data = config.dl ? apply_detection_limit(gen.data, *config.dl)
                               : gen.data;
      const int n = static_cast<int>(data.n_subjects());
      std::vector<double> xi_hat(static_cast<std::size_t>(n));
      std::vector<double> xi_trad(static_cast<std::size_t>(n));
      std::vector<double> a_sur(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const Trajectory& traj = data.trajectories[static_cast<std::size_t>(i)];
        const ScoreSystem sys = build_score_system(traj, psi, sigma, dl);
        xi_hat[static_cast<std::size_t>(i)] = estimate_scores(sys).xi(0);
        const std::array<double, 1> xi_true{
            gen.xi[static_cast<std::size_t>(i)]};
        a_sur[static_cast<std::size_t>(i)] =
            asymptotic_moments(traj, psi, sigma, dl, xi_true).a(0);
        // Traditional method: numerical integral of the (c-imputed)
        // observations against psi.
        double acc = 0.0;
        for (std::size_t j = 0; j < traj.size(); ++j) {
          acc += traj.values[j] * psi_true(traj.times[j]);
        }
        xi_trad[static_cast<std::size_t>(i)] =
            acc / static_cast<double>(traj.size());
      }
      const ScoreMetrics local = score_metrics(xi_hat, gen.xi, a_sur);
      const ScoreMetrics trad = score_metrics(xi_trad, gen.xi, a_sur);
      ReplicateSummary row;
      row.score_mean = local.mean;
      row.score_var = local.variance;
      row.mse_star = local.mse_star;
      row.mse_dstar = local.mse_dstar;
      row.score_var_trad = trad.variance;
      row.mse_star_trad = trad.mse_star;
      row.censored_fraction = censored_fraction(data);
      rows[static_cast<std::size_t>(r)] = row;
      ok[static_cast<std::size_t>(r)] = 1;
    } catch (const std::exception& ex) {
      errors[static_cast<std::size_t>(r)] = ex.what();
    }
  }

  for (int r = 0; r < config.replicates; ++r) {
    if (ok[static_cast<std::size_t>(r)]) {
      result.rows.push_back(rows[static_cast<std::size_t>(r)]);
    } else {
      result.failures.emplace_back(r, errors[static_cast<std::size_t>(r)]);
    }
  }
  if (result.rows.empty()) {
    throw std::runtime_error("run_score_study: every replicate failed");
  }
  ReplicateSummary& agg = result.aggregate;
  for (const auto& row : result.rows) {
    agg.score_mean += row.score_mean;
    agg.score_var += row.score_var;
    agg.mse_star += row.mse_star;
    agg.mse_dstar += row.mse_dstar;
    agg.score_var_trad += row.score_var_trad;
    agg.mse_star_trad += row.mse_star_trad;
    agg.censored_fraction += row.censored_fraction;
  }
  const double count = static_cast<double>(result.rows.size());
  agg.score_mean /= count;
  agg.score_var /= count;
  agg.mse_star /= count;
  agg.mse_dstar /= count;
  agg.score_var_trad /= count;
  agg.mse_star_trad /= count;
  agg.censored_fraction /= count;
  return result;
}

}  // namespace dlfpca
