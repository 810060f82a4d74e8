// dlfpca: detection-limit-aware FPCA on longitudinal CSV data, plus the
// simulation studies behind it. See README.md for the file formats.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dlfpca/csv.hpp"
#include "dlfpca/pipeline.hpp"
#include "dlfpca/simulation.hpp"

namespace fs = std::filesystem;
using namespace dlfpca;

namespace {

// Removes every file it registered unless the run commits; keeps failed runs
// from leaving partial outputs behind.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (committed_) return;
    for (const auto& path : files_) {
      std::error_code ec;
      fs::remove(path, ec);
    }
  }
  std::string track(const std::string& path) {
    files_.push_back(path);
    return path;
  }
  void commit() { committed_ = true; }

 private:
  std::vector<std::string> files_;
  bool committed_ = false;
};

std::string default_outdir() {
  const char* env = std::getenv("DLFPCA_OUTDIR");
  return env ? env : ".";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("[write] cannot open '" + path + "'");
  return out;
}

WeightScheme parse_scheme(const std::string& name) {
  if (name == "OBS") return WeightScheme::kObs;
  if (name == "SUBJ") return WeightScheme::kSubj;
  throw CLI::ValidationError("--scheme", "must be OBS or SUBJ");
}

SimConfig::Density parse_density(const std::string& name) {
  if (name == "sparse") return SimConfig::Density::kSparse;
  if (name == "dense") return SimConfig::Density::kDense;
  throw CLI::ValidationError("--density", "must be sparse or dense");
}

// Shared fit/scores/reproduce knobs mirrored as CLI flags.
struct CommonFlags {
  int grid_size = 100;
  std::string scheme = "OBS";
  double fve = 0.90;
  int sigma_degree = 4;
  std::string bias = "auto";
  int bias_replicates = 200;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--grid-size", flags.grid_size, "Evaluation grid points")
      ->check(CLI::Range(2, 100000));
  cmd->add_option("--scheme", flags.scheme, "Weighting scheme: OBS or SUBJ");
  cmd->add_option("--fve", flags.fve,
                  "Fraction of variance explained for component choice")
      ->check(CLI::Range(1e-9, 1.0));
  cmd->add_option("--sigma-degree", flags.sigma_degree,
                  "Polynomial degree of the pooled noise fit");
  cmd->add_option("--bias", flags.bias,
                  "Covariance bias correction: auto, none or mc");
  cmd->add_option("--bias-replicates", flags.bias_replicates,
                  "Replicates for the Monte-Carlo bias calibration");
  cmd->add_option("--seed", flags.seed, "Master seed");
}

BiasMode parse_bias(const std::string& name) {
  if (name == "auto") return BiasMode::kAuto;
  if (name == "none") return BiasMode::kNone;
  if (name == "mc") return BiasMode::kMonteCarlo;
  throw CLI::ValidationError("--bias", "must be auto, none or mc");
}

Dataset exclude_3sd(const Dataset& data) {
  double sum = 0.0, sum2 = 0.0;
  std::size_t count = 0;
  for (const auto& traj : data.trajectories) {
    for (std::size_t j = 0; j < traj.size(); ++j) {
      if (traj.censored[j]) continue;
      sum += traj.values[j];
      sum2 += traj.values[j] * traj.values[j];
      ++count;
    }
  }
  if (count < 2) return data;
  const double mean = sum / static_cast<double>(count);
  const double sd =
      std::sqrt(std::max(0.0, sum2 / static_cast<double>(count) - mean * mean));
  Dataset out;
  out.detection_limit = data.detection_limit;
  out.domain_lo = data.domain_lo;
  out.domain_hi = data.domain_hi;
  bool any_censored = false;
  for (const auto& traj : data.trajectories) {
    Trajectory kept;
    kept.subject_id = traj.subject_id;
    for (std::size_t j = 0; j < traj.size(); ++j) {
      if (!traj.censored[j] && std::abs(traj.values[j] - mean) > 3.0 * sd) {
        continue;
      }
      kept.times.push_back(traj.times[j]);
      kept.values.push_back(traj.values[j]);
      kept.censored.push_back(traj.censored[j]);
      any_censored |= traj.censored[j] != 0;
    }
    if (!kept.times.empty()) out.trajectories.push_back(std::move(kept));
  }
  if (!any_censored) out.detection_limit.reset();
  return out;
}

void write_mean_csv(const std::string& path, const MeanEstimate& mean) {
  auto out = open_out(path);
  out << "t,mu,support,estimable\n";
  for (std::size_t g = 0; g < mean.grid.size(); ++g) {
    out << format_double(mean.grid.points[g]) << ','
        << (mean.estimable[g] ? format_double(mean.values[g]) : "NA") << ','
        << format_double(mean.support[g]) << ','
        << (mean.estimable[g] ? '1' : '0') << '\n';
  }
}

void write_covariance_csv(const std::string& path, const FitResult& fit) {
  auto out = open_out(path);
  out << "s,t,raw,adjusted\n";
  const auto& grid = fit.raw_cov.grid;
  for (std::size_t g1 = 0; g1 < grid.size(); ++g1) {
    for (std::size_t g2 = 0; g2 < grid.size(); ++g2) {
      out << format_double(grid.points[g1]) << ','
          << format_double(grid.points[g2]) << ','
          << format_double(fit.raw_cov.values(static_cast<int>(g1),
                                              static_cast<int>(g2)))
          << ','
          << format_double(fit.adjusted_cov(static_cast<int>(g1),
                                            static_cast<int>(g2)))
          << '\n';
    }
  }
}

void write_eigen_csv(const std::string& path, const EigenSystem& eig,
                     int num_components) {
  auto out = open_out(path);
  out << "component,eigenvalue,t,psi\n";
  for (int l = 0; l < num_components; ++l) {
    for (std::size_t g = 0; g < eig.grid.size(); ++g) {
      out << (l + 1) << ',' << format_double(eig.eigenvalues(l)) << ','
          << format_double(eig.grid.points[g]) << ','
          << format_double(eig.eigenfunctions(static_cast<int>(g), l)) << '\n';
    }
  }
}

void write_scores_csv(const std::string& path, const Dataset& data,
                      const std::vector<Eigen::VectorXd>& scores,
                      const std::vector<double>& conditions) {
  auto out = open_out(path);
  out << "subject_id,component,score,condition\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (int l = 0; l < scores[i].size(); ++l) {
      out << data.trajectories[i].subject_id << ',' << (l + 1) << ','
          << format_double(scores[i](l)) << ','
          << format_double(conditions.empty() ? 0.0 : conditions[i]) << '\n';
    }
  }
}

// Rebuilds an EigenSystem from the eigen.csv layout written above.
EigenSystem read_eigen_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "component,eigenvalue,t,psi") {
    throw std::runtime_error("'" + path + "': not an eigen.csv file");
  }
  std::map<int, double> lambdas;
  std::map<int, std::vector<std::pair<double, double>>> functions;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    int component;
    double lambda, t, psi;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &component, &lambda, &t,
                    &psi) != 4) {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                               ": malformed row");
    }
    lambdas[component] = lambda;
    functions[component].emplace_back(t, psi);
  }
  if (functions.empty()) {
    throw std::runtime_error("'" + path + "' has no components");
  }
  const std::size_t g = functions.begin()->second.size();
  EigenSystem eig;
  eig.grid = make_uniform_grid(functions.begin()->second.front().first,
                               functions.begin()->second.back().first,
                               static_cast<int>(g));
  eig.eigenvalues.resize(static_cast<int>(functions.size()));
  eig.eigenfunctions.resize(static_cast<int>(g),
                            static_cast<int>(functions.size()));
  int col = 0;
  for (const auto& [component, values] : functions) {
    if (values.size() != g) {
      throw std::runtime_error("'" + path + "': component " +
                               std::to_string(component) +
                               " has a different grid");
    }
    eig.eigenvalues(col) = lambdas[component];
    for (std::size_t i = 0; i < g; ++i) {
      eig.eigenfunctions(static_cast<int>(i), col) = values[i].second;
    }
    ++col;
  }
  eig.raw_trace = eig.eigenvalues.sum();
  return eig;
}

int cmd_fit(const std::string& input, const std::string& outdir,
            const CommonFlags& common, std::optional<double> bandwidth,
            const std::vector<double>& candidates, std::optional<double> sigma,
            std::optional<double> dl, std::optional<int> components,
            bool drop_outliers) {
  Dataset data = ingest_csv(input, dl);
  if (drop_outliers) data = exclude_3sd(data);

  FitOptions options;
  options.grid_size = common.grid_size;
  options.scheme = parse_scheme(common.scheme);
  options.bandwidth = bandwidth;
  options.candidates = candidates;
  options.objective = BandwidthObjective::kCrossValidation;
  options.sigma_override = sigma;
  options.sigma_degree = common.sigma_degree;
  options.bias = parse_bias(common.bias);
  options.bias_replicates = common.bias_replicates;
  options.fve = common.fve;
  options.num_components = components;
  options.seed = common.seed;

  const FitResult fit = fit_pipeline(data, options);

  fs::create_directories(outdir);
  OutputGuard guard;
  write_mean_csv(guard.track(outdir + "/mean.csv"), fit.mean);
  write_covariance_csv(guard.track(outdir + "/covariance.csv"), fit);
  write_eigen_csv(guard.track(outdir + "/eigen.csv"), fit.eig,
                  fit.num_components);
  write_scores_csv(guard.track(outdir + "/scores.csv"), data, fit.scores,
                   fit.score_conditions);

  const double imse = reconstruct_and_imse(fit.scores, fit.eig,
                                           fit.num_components,
                                           fit.mean.values, data);

  auto report = open_out(guard.track(outdir + "/report.txt"));
  report << "dlfpca fit report\n";
  report << "subjects: " << data.n_subjects()
         << "  observations: " << data.total_observations() << '\n';
  report << "censored fraction: " << format_double(censored_fraction(data))
         << '\n';
  if (data.detection_limit) {
    report << "detection limit: " << format_double(*data.detection_limit)
           << '\n';
  }
  report << "sigma: " << format_double(fit.sigma.sigma) << " ("
         << fit.sigma.method_tag << ")\n";
  report << "bandwidth (mean): " << format_double(fit.bandwidth) << '\n';
  report << "bandwidth (covariance): " << format_double(fit.cov_bandwidth)
         << '\n';
  report << "scheme: " << common.scheme << "  grid: " << common.grid_size
         << '\n';
  report << "bias correction: "
         << (fit.correction.tag == BiasCorrection::Tag::kMonteCarlo
                 ? "monte-carlo"
                 : "none")
         << '\n';
  report << "components (fve >= " << format_double(common.fve)
         << "): " << fit.num_components << '\n';
  double total = 0.0;
  for (int l = 0; l < fit.eig.size(); ++l) total += fit.eig.eigenvalues(l);
  for (int l = 0; l < fit.num_components; ++l) {
    report << "  component " << (l + 1)
           << ": eigenvalue = " << format_double(fit.eig.eigenvalues(l))
           << ", share = "
           << format_double(total > 0.0 ? fit.eig.eigenvalues(l) / total : 0.0)
           << '\n';
  }
  report << "reconstruction imse (vs interpolated observations, approximate): "
         << format_double(imse) << '\n';
  for (const auto& warning : fit.warnings) {
    report << "warning: " << warning << '\n';
  }
  report.flush();
  guard.commit();
  std::cout << "wrote " << outdir
            << "/{mean,covariance,eigen,scores}.csv and report.txt\n";
  return 0;
}

int cmd_simulate(const SimConfig& config, int replicate,
                 const std::string& out_path, const std::string& truth_path) {
  const GeneratedData gen = generate_dataset(config, replicate);
  const Dataset data =
      config.dl ? apply_detection_limit(gen.data, *config.dl) : gen.data;
  OutputGuard guard;
  export_dataset_csv(data, guard.track(out_path));
  if (!truth_path.empty()) {
    auto out = open_out(guard.track(truth_path));
    out << "subject_id,xi\n";
    for (std::size_t i = 0; i < gen.xi.size(); ++i) {
      out << data.trajectories[i].subject_id << ','
          << format_double(gen.xi[i]) << '\n';
    }
  }
  guard.commit();
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

void write_replicate_rows(const std::string& path, const StudyResult& result,
                          const std::string& scenario) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("[write] cannot open '" + path + "'");
  if (fresh) {
    out << "scenario,replicate,ise_local,ise_naive,imse_local,imse_naive,"
           "score_mean,score_var,mse_star,mse_dstar,score_var_trad,"
           "mse_star_trad,censored_fraction\n";
  }
  for (std::size_t r = 0; r < result.rows.size(); ++r) {
    const auto& row = result.rows[r];
    out << scenario << ',' << r << ',' << format_double(row.ise_local) << ','
        << format_double(row.ise_naive) << ','
        << format_double(row.imse_local) << ','
        << format_double(row.imse_naive) << ','
        << format_double(row.score_mean) << ','
        << format_double(row.score_var) << ','
        << format_double(row.mse_star) << ','
        << format_double(row.mse_dstar) << ','
        << format_double(row.score_var_trad) << ','
        << format_double(row.mse_star_trad) << ','
        << format_double(row.censored_fraction) << '\n';
  }
}

int cmd_reproduce_table1(const std::string& outdir, const CommonFlags& common,
                         int replicates, int n) {
  fs::create_directories(outdir);
  OutputGuard guard;
  const std::string rows_path = guard.track(outdir + "/table1_replicates.csv");
  {
    std::error_code ec;
    fs::remove(rows_path, ec);
  }
  auto table = open_out(guard.track(outdir + "/table1.csv"));
  table << "density,dl,ise_local_x1000_seed0,ise_naive_x1000_seed0,"
           "ise_local_x1000_mean,ise_naive_x1000_mean,replicates,failures,"
           "censored_fraction\n";

  EigenStudyOptions options;
  options.grid_size = common.grid_size;
  options.scheme = parse_scheme(common.scheme);
  options.bias_correction = parse_bias(common.bias) != BiasMode::kNone;
  options.bias_replicates = common.bias_replicates;

  for (const auto density :
       {SimConfig::Density::kSparse, SimConfig::Density::kDense}) {
    for (const auto dl :
         {std::optional<double>(0.0), std::optional<double>(-1.0),
          std::optional<double>()}) {
      SimConfig config;
      config.n = n;
      config.density = density;
      config.dl = dl;
      config.seed = common.seed;
      config.replicates = replicates;
      const StudyResult res = run_eigen_study(config, options);
      const std::string name =
          std::string(density == SimConfig::Density::kSparse ? "sparse"
                                                             : "dense") +
          (dl ? (*dl == 0.0 ? ",0" : ",-1") : ",none");
      write_replicate_rows(rows_path, res, name);
      table << name << ',' << format_double(res.rows[0].ise_local * 1000.0)
            << ',' << format_double(res.rows[0].ise_naive * 1000.0) << ','
            << format_double(res.aggregate.ise_local * 1000.0) << ','
            << format_double(res.aggregate.ise_naive * 1000.0) << ','
            << res.rows.size() << ',' << res.failures.size() << ','
            << format_double(res.aggregate.censored_fraction) << '\n';
      std::cerr << "table1 " << name << ": mean ISEx1000 local "
                << res.aggregate.ise_local * 1000.0 << " naive "
                << res.aggregate.ise_naive * 1000.0 << '\n';
    }
  }
  guard.commit();
  std::cout << "wrote " << outdir << "/table1.csv\n";
  return 0;
}

int cmd_reproduce_table2(const std::string& outdir, const CommonFlags& common,
                         int replicates, int n) {
  fs::create_directories(outdir);
  OutputGuard guard;
  const std::string rows_path = guard.track(outdir + "/table2_replicates.csv");
  {
    std::error_code ec;
    fs::remove(rows_path, ec);
  }
  auto table = open_out(guard.track(outdir + "/table2.csv"));
  // Paper layout: mean and variance raw, the MSE columns scaled by 100.
  table << "density,dl,m,mean,variance,mse_star_x100,mse_dstar_x100,"
           "variance_trad,mse_star_trad_x100,replicates,failures\n";

  for (const auto density :
       {SimConfig::Density::kSparse, SimConfig::Density::kDense}) {
    for (const double dl : {0.0, -1.0}) {
      for (const int m : {100, 200, 500, 1000}) {
        SimConfig config;
        config.n = n;
        config.density = density;
        config.scale = m;
        config.dl = dl;
        config.seed = common.seed;
        config.replicates = replicates;
        const StudyResult res = run_score_study(config);
        const std::string name =
            std::string(density == SimConfig::Density::kSparse ? "sparse"
                                                               : "dense") +
            (dl == 0.0 ? ",0" : ",-1");
        write_replicate_rows(rows_path, res, name + "," + std::to_string(m));
        table << name << ',' << m << ','
              << format_double(res.aggregate.score_mean) << ','
              << format_double(res.aggregate.score_var) << ','
              << format_double(res.aggregate.mse_star * 100.0) << ','
              << format_double(res.aggregate.mse_dstar * 100.0) << ','
              << format_double(res.aggregate.score_var_trad) << ','
              << format_double(res.aggregate.mse_star_trad * 100.0) << ','
              << res.rows.size() << ',' << res.failures.size() << '\n';
      }
    }
  }
  guard.commit();
  std::cout << "wrote " << outdir << "/table2.csv\n";
  return 0;
}

int cmd_scores(const std::string& input, const std::string& eigen_path,
               const std::string& mean_path, const std::string& out_path,
               std::optional<double> sigma, std::optional<double> dl,
               std::optional<int> components, int sigma_degree) {
  Dataset data = ingest_csv(input, dl);
  const EigenSystem eig = read_eigen_csv(eigen_path);
  const int num = components.value_or(eig.size());
  if (num < 1 || num > eig.size()) {
    throw std::runtime_error("[scores] component count out of range");
  }

  if (!mean_path.empty()) {
    std::ifstream in(mean_path);
    if (!in) throw std::runtime_error("cannot open '" + mean_path + "'");
    std::string line;
    std::getline(in, line);
    MeanEstimate mean;
    mean.grid = eig.grid;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      double t, mu, support;
      int estimable;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%d", &t, &mu, &support,
                      &estimable) == 4) {
        mean.values.push_back(mu);
        mean.support.push_back(support);
        mean.estimable.push_back(estimable ? 1 : 0);
      } else {
        mean.values.push_back(0.0);
        mean.support.push_back(0.0);
        mean.estimable.push_back(0);
      }
    }
    if (mean.values.size() != eig.grid.size()) {
      throw std::runtime_error(
          "[scores] mean.csv grid does not match eigen.csv");
    }
    data = center_dataset(data, mean);
  }

  const double sigma_value =
      sigma ? *sigma : estimate_sigma(data, sigma_degree).sigma;
  const PsiFunctions psi = eig.interpolators(num);
  const double fallback = data.detection_limit.value_or(0.0);

  std::vector<Eigen::VectorXd> scores(data.n_subjects());
  std::vector<double> conditions(data.n_subjects());
  for (std::size_t i = 0; i < data.n_subjects(); ++i) {
    const ScoreEstimate est = estimate_scores(
        build_score_system(data.trajectories[i], psi, sigma_value, fallback));
    scores[i] = est.xi;
    conditions[i] = est.condition;
  }
  OutputGuard guard;
  write_scores_csv(guard.track(out_path), data, scores, conditions);
  guard.commit();
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

int cmd_export_grid(double a, double b, int grid_size,
                    const std::string& out_path) {
  const Grid grid = make_uniform_grid(a, b, grid_size);
  OutputGuard guard;
  auto out = open_out(guard.track(out_path));
  out << "t,quad_weight\n";
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out << format_double(grid.points[g]) << ','
        << format_double(grid.quad_weights[g]) << '\n';
  }
  guard.commit();
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Detection-limit-aware functional principal component analysis"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value config file; flags win");

  // fit
  auto* fit = app.add_subcommand("fit", "Estimate mean, covariance, FPCs and "
                                        "scores from a CSV file");
  std::string fit_input, fit_out = default_outdir();
  CommonFlags fit_common;
  double fit_bandwidth = 0.0, fit_sigma = -1.0, fit_dl = 0.0;
  int fit_components = 0;
  std::vector<double> fit_candidates;
  bool fit_drop_outliers = false;
  bool fit_has_dl = false;
  fit->add_option("--input", fit_input, "Input CSV")->required();
  fit->add_option("--out", fit_out, "Output directory (env DLFPCA_OUTDIR)");
  add_common(fit, fit_common);
  fit->add_option("--bandwidth", fit_bandwidth,
                  "Fixed bandwidth (skips selection)");
  fit->add_option("--bw-candidates", fit_candidates,
                  "Explicit bandwidth candidates")
      ->delimiter(',');
  fit->add_option("--sigma", fit_sigma, "Noise sd override");
  fit->add_option("--dl", fit_dl, "Detection limit of censored rows")
      ->trigger_on_parse()
      ->each([&](const std::string&) { fit_has_dl = true; });
  fit->add_option("--components", fit_components,
                  "Fixed component count (overrides --fve)");
  fit->add_flag("--exclude-3sd", fit_drop_outliers,
                "Drop uncensored values beyond 3 pooled standard deviations");

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "Generate one dataset from the simulation model");
  SimConfig sim_config;
  std::string sim_density = "sparse";
  double sim_dl = 0.0;
  bool sim_has_dl = false;
  int sim_replicate = 0;
  std::string sim_out = "data.csv", sim_truth;
  simulate->add_option("--n", sim_config.n, "Subjects")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--density", sim_density, "sparse or dense");
  simulate->add_option("--m", sim_config.scale, "Scale M");
  simulate->add_option("--dl", sim_dl, "Detection limit to apply")
      ->trigger_on_parse()
      ->each([&](const std::string&) { sim_has_dl = true; });
  simulate->add_option("--sigma-eps", sim_config.sigma_eps, "Noise sd");
  simulate->add_option("--lambda", sim_config.lambda, "Score variance");
  simulate->add_flag("--null-model", sim_config.null_model,
                     "Generate pure noise (U == 0)");
  simulate->add_option("--seed", sim_config.seed, "Master seed");
  simulate->add_option("--replicate", sim_replicate, "Replicate index");
  simulate->add_option("--out", sim_out, "Output CSV path");
  simulate->add_option("--truth", sim_truth, "Also write true scores here");

  // reproduce
  auto* reproduce = app.add_subcommand(
      "reproduce", "Re-run the simulation studies (table1 or table2)");
  std::string which_table;
  std::string rep_out = default_outdir();
  CommonFlags rep_common;
  int rep_replicates = 0, rep_n = 100;
  bool rep_quick = false;
  reproduce->add_option("table", which_table, "table1 or table2")
      ->required()
      ->check(CLI::IsMember({"table1", "table2"}));
  reproduce->add_option("--out", rep_out, "Output directory");
  add_common(reproduce, rep_common);
  reproduce->add_option("--replicates", rep_replicates,
                        "Replicates per scenario (default 50/100)");
  reproduce->add_option("--n", rep_n, "Subjects per replicate");
  reproduce->add_flag("--quick", rep_quick, "25 replicates (orderings only)");

  // scores
  auto* scores = app.add_subcommand(
      "scores", "Estimate subject scores against exported eigenfunctions");
  std::string sc_input, sc_eigen, sc_mean, sc_out = "scores.csv";
  double sc_sigma = -1.0, sc_dl = 0.0;
  bool sc_has_sigma = false, sc_has_dl = false;
  int sc_components = 0, sc_sigma_degree = 4;
  scores->add_option("--input", sc_input, "Input CSV")->required();
  scores->add_option("--eigen", sc_eigen, "eigen.csv from a fit")->required();
  scores->add_option("--mean", sc_mean, "mean.csv from a fit (centers data)");
  scores->add_option("--out", sc_out, "Output CSV path");
  scores->add_option("--sigma", sc_sigma, "Noise sd")
      ->trigger_on_parse()
      ->each([&](const std::string&) { sc_has_sigma = true; });
  scores->add_option("--dl", sc_dl, "Detection limit of censored rows")
      ->trigger_on_parse()
      ->each([&](const std::string&) { sc_has_dl = true; });
  scores->add_option("--components", sc_components, "Component count");
  scores->add_option("--sigma-degree", sc_sigma_degree,
                     "Polynomial degree of the pooled noise fit");

  // export-grid
  auto* export_grid = app.add_subcommand(
      "export-grid", "Write the evaluation grid with quadrature weights");
  double eg_a = 0.0, eg_b = 1.0;
  int eg_size = 100;
  std::string eg_out = "grid.csv";
  export_grid->add_option("--a", eg_a, "Interval start");
  export_grid->add_option("--b", eg_b, "Interval end");
  export_grid->add_option("--grid-size", eg_size, "Grid points");
  export_grid->add_option("--out", eg_out, "Output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      return cmd_fit(fit_input, fit_out, fit_common,
                     fit_bandwidth > 0.0 ? std::optional<double>(fit_bandwidth)
                                         : std::nullopt,
                     fit_candidates,
                     fit_sigma >= 0.0 ? std::optional<double>(fit_sigma)
                                      : std::nullopt,
                     fit_has_dl ? std::optional<double>(fit_dl) : std::nullopt,
                     fit_components > 0 ? std::optional<int>(fit_components)
                                        : std::nullopt,
                     fit_drop_outliers);
    }
    if (simulate->parsed()) {
      sim_config.density = parse_density(sim_density);
      if (sim_has_dl) sim_config.dl = sim_dl;
      return cmd_simulate(sim_config, sim_replicate, sim_out, sim_truth);
    }
    if (reproduce->parsed()) {
      if (which_table == "table1") {
        const int reps =
            rep_replicates > 0 ? rep_replicates : (rep_quick ? 25 : 50);
        return cmd_reproduce_table1(rep_out, rep_common, reps, rep_n);
      }
      const int reps =
          rep_replicates > 0 ? rep_replicates : (rep_quick ? 25 : 100);
      return cmd_reproduce_table2(rep_out, rep_common, reps, rep_n);
    }
    if (scores->parsed()) {
      return cmd_scores(sc_input, sc_eigen, sc_mean, sc_out,
                        sc_has_sigma ? std::optional<double>(sc_sigma)
                                     : std::nullopt,
                        sc_has_dl ? std::optional<double>(sc_dl) : std::nullopt,
                        sc_components > 0 ? std::optional<int>(sc_components)
                                          : std::nullopt,
                        sc_sigma_degree);
    }
    if (export_grid->parsed()) {
      return cmd_export_grid(eg_a, eg_b, eg_size, eg_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "dlfpca: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
