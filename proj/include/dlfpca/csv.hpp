#ifndef DLFPCA_CSV_HPP
#define DLFPCA_CSV_HPP

#include <optional>
#include <string>

#include "dlfpca/core.hpp"

namespace dlfpca {

// Shortest representation that round-trips the double exactly.
std::string format_double(double value);

// Reads `subject_id,time,value,censored` rows into a Dataset: trajectories
// grouped in first-appearance order, times sorted within subject, domain
// defaulting to the observed time range. The detection limit may be given or
// is inferred from the censored rows; errors name the offending line.
Dataset ingest_csv(const std::string& path,
                   std::optional<double> detection_limit = std::nullopt);

void export_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace dlfpca

#endif
