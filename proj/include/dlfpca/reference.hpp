#ifndef DLFPCA_REFERENCE_HPP
#define DLFPCA_REFERENCE_HPP

#include "dlfpca/mean_cov.hpp"

namespace dlfpca::reference {

// Serial direct-sum implementations of the local-constant estimators,
// evaluating the defining formulas term by term (the covariance walks every
// ordered pair j != l per cell). Quadratic in the per-subject observation
// count, so only fit for small inputs: they exist as independent oracles for
// the production kernels and as the baseline in bench_kernels.
MeanEstimate local_constant_mean_direct(const Dataset& data, double h,
                                        WeightScheme scheme, double sigma,
                                        const Grid& grid,
                                        const Kernel& kernel);

CovSurfaceRaw local_constant_covariance_direct(const Dataset& data, double h,
                                               WeightScheme scheme,
                                               double sigma, const Grid& grid,
                                               const Kernel& kernel);

}  // namespace dlfpca::reference

#endif
