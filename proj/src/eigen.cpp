#include "dlfpca/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dlfpca {

Eigen::MatrixXd adjust_covariance(const CovSurfaceRaw& raw,
                                  const BiasCorrection& correction,
                                  double sigma) {
  if (correction.tag == BiasCorrection::Tag::kNone) {
    return raw.values;
  }
  if (correction.surface.rows() != raw.values.rows() ||
      correction.surface.cols() != raw.values.cols()) {
    throw std::invalid_argument(
        "adjust_covariance: correction surface does not match the grid");
  }
  Eigen::MatrixXd adjusted =
      raw.values - correction.surface * (sigma * sigma);
  adjusted = 0.5 * (adjusted + adjusted.transpose()).eval();
  return adjusted;
}

BiasCorrection calibrate_bias_from_replicates(
    const std::function<Dataset(int replicate)>& make_null_dataset,
    const Grid& grid, double h, int replicates, WeightScheme scheme,
    double sigma) {
  if (replicates < 100) {
    throw std::invalid_argument(
        "calibrate_bias_from_replicates: need at least 100 replicates");
  }
  if (!(sigma > 0.0)) {
    throw std::invalid_argument(
        "calibrate_bias_from_replicates: sigma must be > 0");
  }
  const int g = static_cast<int>(grid.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(g, g);
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(g, g);
  const Kernel kernel;
  for (int r = 0; r < replicates; ++r) {
    const Dataset null_data = make_null_dataset(r);
    const CovSurfaceRaw surf =
        local_constant_covariance(null_data, h, scheme, sigma, grid, kernel);
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j < g; ++j) {
        if (surf.estimable(i, j)) {
          sum(i, j) += surf.values(i, j);
          count(i, j) += 1.0;
        }
      }
    }
  }
  BiasCorrection correction;
  correction.tag = BiasCorrection::Tag::kMonteCarlo;
  correction.surface = Eigen::MatrixXd::Zero(g, g);
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      if (count(i, j) > 0.0) {
        correction.surface(i, j) = sum(i, j) / count(i, j) / (sigma * sigma);
      }
    }
  }
  return correction;
}

Eigen::MatrixXd resample_surface(const Grid& from,
                                 const Eigen::MatrixXd& values,
                                 const Grid& to) {
  if (values.rows() != static_cast<int>(from.size()) ||
      values.cols() != static_cast<int>(from.size())) {
    throw std::invalid_argument("resample_surface: values/grid mismatch");
  }
  const int g_to = static_cast<int>(to.size());
  auto bracket = [&from](double t, int& lo, int& hi, double& frac) {
    const auto& pts = from.points;
    if (t <= pts.front()) {
      lo = hi = 0;
      frac = 0.0;
    } else if (t >= pts.back()) {
      lo = hi = static_cast<int>(pts.size()) - 1;
      frac = 0.0;
    } else {
      const auto it = std::upper_bound(pts.begin(), pts.end(), t);
      hi = static_cast<int>(it - pts.begin());
      lo = hi - 1;
      frac = (t - pts[static_cast<std::size_t>(lo)]) /
             (pts[static_cast<std::size_t>(hi)] - pts[static_cast<std::size_t>(lo)]);
    }
  };
  Eigen::MatrixXd out(g_to, g_to);
  for (int i = 0; i < g_to; ++i) {
    int ilo, ihi;
    double fi;
    bracket(to.points[static_cast<std::size_t>(i)], ilo, ihi, fi);
    for (int j = 0; j < g_to; ++j) {
      int jlo, jhi;
      double fj;
      bracket(to.points[static_cast<std::size_t>(j)], jlo, jhi, fj);
      out(i, j) = (1.0 - fi) * ((1.0 - fj) * values(ilo, jlo) +
                                fj * values(ilo, jhi)) +
                  fi * ((1.0 - fj) * values(ihi, jlo) + fj * values(ihi, jhi));
    }
  }
  return out;
}

EigenSystem eigen_decompose(const Eigen::MatrixXd& surface, const Grid& grid) {
  const int g = static_cast<int>(grid.size());
  if (surface.rows() != g || surface.cols() != g) {
    throw std::invalid_argument("eigen_decompose: surface/grid size mismatch");
  }
  if (!surface.allFinite()) {
    throw std::invalid_argument(
        "eigen_decompose: surface contains non-estimable cells");
  }
  const double asym = (surface - surface.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) {
    throw std::invalid_argument("eigen_decompose: surface is asymmetric");
  }

  // Discretize the operator as W^{1/2} C W^{1/2}; its eigenvectors map back
  // to quadrature-orthonormal functions via W^{-1/2}.
  Eigen::VectorXd sqrt_w(g);
  for (int i = 0; i < g; ++i) sqrt_w(i) = std::sqrt(grid.quad_weights[i]);
  Eigen::MatrixXd m = sqrt_w.asDiagonal() * surface * sqrt_w.asDiagonal();
  m = 0.5 * (m + m.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigen_decompose: eigensolver failed");
  }

  EigenSystem sys;
  sys.grid = grid;
  sys.raw_trace = solver.eigenvalues().sum();
  sys.eigenvalues.resize(g);
  sys.eigenfunctions.resize(g, g);
  // Solver returns ascending order; flip to descending and clamp.
  for (int l = 0; l < g; ++l) {
    const int src = g - 1 - l;
    sys.eigenvalues(l) = std::max(0.0, solver.eigenvalues()(src));
    Eigen::VectorXd psi =
        solver.eigenvectors().col(src).cwiseQuotient(sqrt_w);
    int arg_max = 0;
    double best = -1.0;
    for (int i = 0; i < g; ++i) {
      const double mag = std::abs(psi(i));
      if (mag > best) {
        best = mag;
        arg_max = i;
      }
    }
    if (psi(arg_max) < 0.0) psi = -psi;
    sys.eigenfunctions.col(l) = psi;
  }
  return sys;
}

std::vector<std::function<double(double)>> EigenSystem::interpolators(
    int num) const {
  if (num < 1 || num > size()) {
    throw std::invalid_argument("EigenSystem: bad component count");
  }
  std::vector<std::function<double(double)>> out;
  out.reserve(static_cast<std::size_t>(num));
  for (int l = 0; l < num; ++l) {
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      values[i] = eigenfunctions(static_cast<int>(i), l);
    }
    out.push_back([grid = grid, values = std::move(values)](double t) {
      return interpolate(grid, values, t);
    });
  }
  return out;
}

int select_num_components(std::span<const double> eigenvalues,
                          double fve_threshold) {
  if (!(fve_threshold > 0.0 && fve_threshold <= 1.0)) {
    throw std::invalid_argument("select_num_components: threshold not in (0,1]");
  }
  double total = 0.0;
  for (const double lambda : eigenvalues) total += std::max(0.0, lambda);
  if (!(total > 0.0)) {
    throw std::runtime_error("select_num_components: no positive eigenvalue");
  }
  double cum = 0.0;
  for (std::size_t l = 0; l < eigenvalues.size(); ++l) {
    cum += std::max(0.0, eigenvalues[l]);
    if (cum / total >= fve_threshold) return static_cast<int>(l) + 1;
  }
  return static_cast<int>(eigenvalues.size());
}

int select_num_components(const Eigen::VectorXd& eigenvalues,
                          double fve_threshold) {
  return select_num_components(
      std::span<const double>(eigenvalues.data(),
                              static_cast<std::size_t>(eigenvalues.size())),
      fve_threshold);
}

}  // namespace dlfpca
