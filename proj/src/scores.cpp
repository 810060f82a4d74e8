#include "dlfpca/scores.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "dlfpca/constants.hpp"
#include "dlfpca/errors.hpp"
#include "dlfpca/normal.hpp"

namespace dlfpca {

double log_phi_approx(double x) {
  using namespace approx;
  return kLogPhiC0 + kLogPhiC1 * x - kLogPhiC2 * x * x;
}

ScoreSystem build_score_system(const Trajectory& traj, const PsiFunctions& psi,
                               double sigma, double detection_limit) {
  const int num = static_cast<int>(psi.size());
  if (num < 1) {
    throw std::invalid_argument("build_score_system: need at least one psi");
  }
  if (traj.has_censoring() && !(sigma > 0.0)) {
    throw std::invalid_argument(
        "build_score_system: censored data needs sigma > 0");
  }

  ScoreSystem sys;
  sys.t_matrix = Eigen::MatrixXd::Zero(num, num);
  sys.r = Eigen::VectorXd::Zero(num);
  sys.s = Eigen::VectorXd::Zero(num);
  sys.n_obs = static_cast<int>(traj.size());

  Eigen::VectorXd psi_at(num);
  for (std::size_t j = 0; j < traj.size(); ++j) {
    for (int l = 0; l < num; ++l) {
      psi_at(l) = psi[static_cast<std::size_t>(l)](traj.times[j]);
    }
    const bool censored = traj.censored[j] != 0;
    const double weight = approx::pseudo_weight(censored);
    sys.t_matrix += weight * psi_at * psi_at.transpose();
    if (censored) {
      const double limit = traj.limit_at(j, detection_limit);
      sys.s += (approx::kTwoC2 * limit - approx::kLogPhiC1 * sigma) * psi_at;
    } else {
      sys.r += traj.values[j] * psi_at;
    }
  }
  return sys;
}

ScoreEstimate estimate_scores(const ScoreSystem& system) {
  const int num = system.num_components();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(system.t_matrix);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("estimate_scores: eigensolver failed");
  }
  const Eigen::VectorXd& ev = solver.eigenvalues();
  const double max_mag = ev.cwiseAbs().maxCoeff();
  const double min_mag = ev.cwiseAbs().minCoeff();
  // Entries of T sum n_obs terms of order one (the eigenfunctions are
  // quadrature-orthonormal), so a largest eigenvalue at machine-zero scale
  // means every observation sits on a zero of the basis: singular, whatever
  // the eigenvalue ratio says.
  const double floor = 4.0 * std::numeric_limits<double>::epsilon() *
                       std::max(1, system.n_obs);
  const double condition =
      (min_mag > 0.0 && max_mag > floor)
          ? max_mag / min_mag
          : std::numeric_limits<double>::infinity();
  if (!(condition < 1e12)) {
    throw SingularSystemError(
        "estimate_scores: score system is ill-conditioned (cond ~ " +
            std::to_string(condition) + "); try " + std::to_string(num - 1) +
            " components",
        condition, num - 1);
  }

  ScoreEstimate est;
  est.condition = condition;
  est.q = solver.eigenvectors() *
          ev.cwiseInverse().asDiagonal() *
          solver.eigenvectors().transpose();
  const Eigen::VectorXd rhs = system.r + system.s;
  est.xi = est.q * rhs;

  const double residual = (system.t_matrix * est.xi - rhs).norm();
  if (residual > 1e-8 * (1.0 + rhs.norm())) {
    throw std::runtime_error("estimate_scores: residual contract violated");
  }
  return est;
}

double score_likelihood_oracle(const Trajectory& traj, const PsiFunctions& psi,
                               double sigma, double detection_limit,
                               std::span<const double> xi) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("score_likelihood_oracle: sigma must be > 0");
  }
  if (xi.size() != psi.size()) {
    throw std::invalid_argument("score_likelihood_oracle: xi/psi mismatch");
  }
  const double log_norm =
      -0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma);
  double loglik = 0.0;
  for (std::size_t j = 0; j < traj.size(); ++j) {
    double mean = 0.0;
    for (std::size_t l = 0; l < psi.size(); ++l) {
      mean += xi[l] * psi[l](traj.times[j]);
    }
    if (traj.censored[j]) {
      const double limit = traj.limit_at(j, detection_limit);
      loglik += normal_log_cdf((limit - mean) / sigma);
    } else {
      const double z = (traj.values[j] - mean) / sigma;
      loglik += log_norm - 0.5 * z * z;
    }
  }
  return loglik;
}

AsymptoticMoments asymptotic_moments(const Trajectory& traj,
                                     const PsiFunctions& psi, double sigma,
                                     double detection_limit,
                                     std::span<const double> xi_true) {
  const int num = static_cast<int>(psi.size());
  if (static_cast<int>(xi_true.size()) != num) {
    throw std::invalid_argument("asymptotic_moments: xi_true/psi mismatch");
  }
  const ScoreSystem sys =
      build_score_system(traj, psi, sigma, detection_limit);
  const ScoreEstimate est = estimate_scores(sys);  // propagates singular T

  const double n_i = static_cast<double>(traj.size());
  Eigen::VectorXd signal = Eigen::VectorXd::Zero(num);  // b_k
  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(num, num);
  Eigen::VectorXd psi_at(num);
  for (std::size_t j = 0; j < traj.size(); ++j) {
    if (traj.censored[j]) continue;  // (1-d_j) and (1-d_j)^2 both vanish
    for (int l = 0; l < num; ++l) {
      psi_at(l) = psi[static_cast<std::size_t>(l)](traj.times[j]);
    }
    double u = 0.0;
    for (int l = 0; l < num; ++l) u += xi_true[static_cast<std::size_t>(l)] * psi_at(l);
    signal += u * psi_at;
    noise += psi_at * psi_at.transpose();
  }

  AsymptoticMoments moments;
  moments.a = est.q * (signal + sys.s);
  moments.v = est.q * (n_i * sigma * sigma * noise) * est.q;
  moments.v = 0.5 * (moments.v + moments.v.transpose()).eval();
  return moments;
}

}  // namespace dlfpca
