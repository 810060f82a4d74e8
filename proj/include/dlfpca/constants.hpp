#ifndef DLFPCA_CONSTANTS_HPP
#define DLFPCA_CONSTANTS_HPP

#include <cstdint>

namespace dlfpca::approx {

// Quadratic approximation of log(Phi(x)) on [-1, 2]:
//   log(Phi(x)) ~ c0 + c1*x - c2*x^2
// The same constants drive the censored-likelihood pseudo-values of the
// mean, covariance and score estimators, so they live in one place.
inline constexpr double kLogPhiC0 = -0.7127;
inline constexpr double kLogPhiC1 = 0.8194;
inline constexpr double kLogPhiC2 = 0.251;
inline constexpr double kTwoC2 = 0.502;           // 2 * kLogPhiC2
inline constexpr double kOneMinusTwoC2 = 0.498;   // 1 - kTwoC2

// Censored observations enter the score equations through a shifted
// constant instead of the recorded value, uncensored ones as-is.
inline constexpr double pseudo_value(double value, bool censored, double limit,
                                     double sigma) {
  return censored ? kTwoC2 * limit - kLogPhiC1 * sigma : value;
}

// Weight multiplier (1 - 0.498*delta): 1 for observed, 0.502 for censored.
inline constexpr double pseudo_weight(bool censored) {
  return censored ? kTwoC2 : 1.0;
}

}  // namespace dlfpca::approx

#endif
