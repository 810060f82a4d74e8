#ifndef DLFPCA_NORMAL_HPP
#define DLFPCA_NORMAL_HPP

#include <cmath>
#include <numbers>

namespace dlfpca {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// log Phi(x), stable far into the left tail where erfc underflows.
inline double normal_log_cdf(double x) {
  if (x > -20.0) {
    return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  }
  // Asymptotic expansion: Phi(x) ~ phi(x)/(-x) * (1 - 1/x^2 + 3/x^4 - ...)
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log(series);
}

}  // namespace dlfpca

#endif
