#ifndef DLFPCA_SCORES_HPP
#define DLFPCA_SCORES_HPP

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "dlfpca/core.hpp"

namespace dlfpca {

// Quadratic stand-in for log(Phi(x)); accurate on [-1, 2] only.
double log_phi_approx(double x);

using PsiFunctions = std::vector<std::function<double(double)>>;

// Linear system of the approximated per-subject score likelihood:
//   T xi = r + s
// with T_kl = sum_j (1-0.498 d_j) psi_k psi_l, r_l = sum_j (1-d_j) y_j psi_l,
// s_l = sum_j d_j (0.502 c_j - 0.8194 sigma) psi_l. Censored entries use the
// per-observation effective limit when the trajectory was centered.
struct ScoreSystem {
  Eigen::MatrixXd t_matrix;
  Eigen::VectorXd r;
  Eigen::VectorXd s;
  int n_obs = 0;

  int num_components() const { return static_cast<int>(r.size()); }
};

ScoreSystem build_score_system(const Trajectory& traj, const PsiFunctions& psi,
                               double sigma, double detection_limit);

struct ScoreEstimate {
  Eigen::VectorXd xi;
  Eigen::MatrixXd q;  // inverse of T
  double condition = 0.0;
};

// Solves T xi = r + s. Throws SingularSystemError (suggesting L-1) when the
// condition estimate exceeds 1e12.
ScoreEstimate estimate_scores(const ScoreSystem& system);

// Exact censored log-likelihood (phi/Phi products, no approximation); the
// oracle the quadratic approximation is tested against.
double score_likelihood_oracle(const Trajectory& traj, const PsiFunctions& psi,
                               double sigma, double detection_limit,
                               std::span<const double> xi);

// Finite-N surrogates of the asymptotic mean A_il and covariance V of
// sqrt(N_i) (xi_hat - A); simulation use only (needs the true scores).
struct AsymptoticMoments {
  Eigen::VectorXd a;
  Eigen::MatrixXd v;
};

AsymptoticMoments asymptotic_moments(const Trajectory& traj,
                                     const PsiFunctions& psi, double sigma,
                                     double detection_limit,
                                     std::span<const double> xi_true);

}  // namespace dlfpca

#endif
