#ifndef DLFPCA_ERRORS_HPP
#define DLFPCA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dlfpca {

// The local-likelihood denominator vanished at a point the caller needs.
// Carrying the location lets the CLI name the offending time.
class NonEstimableError : public std::runtime_error {
 public:
  NonEstimableError(const std::string& what, double location)
      : std::runtime_error(what), location_(location) {}
  double location() const { return location_; }

 private:
  double location_;
};

// Ill-conditioned score system T. No silent truncation: the caller decides
// whether to retry with fewer components.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, double condition,
                      int suggested_components)
      : std::runtime_error(what),
        condition_(condition),
        suggested_components_(suggested_components) {}
  double condition() const { return condition_; }
  int suggested_components() const { return suggested_components_; }

 private:
  double condition_;
  int suggested_components_;
};

}  // namespace dlfpca

#endif
