#include "dlfpca/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace dlfpca {

std::string format_double(double value) {
  char buf[40];
  // %.17g always round-trips; prefer the shorter %.15g when it does too.
  std::snprintf(buf, sizeof(buf), "%.15g", value);
  if (std::strtod(buf, nullptr) != value) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
  }
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, const char* what, long line_no) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0') || !std::isfinite(value)) {
    throw std::runtime_error("line " + std::to_string(line_no) +
                             ": cannot parse " + what + " '" + text + "'");
  }
  return value;
}

}  // namespace

Dataset ingest_csv(const std::string& path,
                   std::optional<double> detection_limit) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) {
    throw std::runtime_error("'" + path + "' is empty");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "subject_id,time,value,censored") {
    throw std::runtime_error(
        "line 1: expected header 'subject_id,time,value,censored'");
  }

  struct Row {
    double time, value;
    bool censored;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> by_subject;
  std::optional<double> inferred_limit;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": expected 4 fields, got " +
                               std::to_string(fields.size()));
    }
    if (fields[0].empty()) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": empty subject_id");
    }
    Row row;
    row.time = parse_number(fields[1], "time", line_no);
    row.value = parse_number(fields[2], "value", line_no);
    if (fields[3] == "0") {
      row.censored = false;
    } else if (fields[3] == "1") {
      row.censored = true;
    } else {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": censored must be 0 or 1, got '" + fields[3] +
                               "'");
    }
    if (row.censored && !detection_limit && !inferred_limit) {
      inferred_limit = row.value;
    }
    auto [it, inserted] = by_subject.try_emplace(fields[0]);
    if (inserted) order.push_back(fields[0]);
    it->second.push_back(row);
  }
  if (order.empty()) {
    throw std::runtime_error("'" + path + "' has no data rows");
  }

  Dataset data;
  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -std::numeric_limits<double>::infinity();
  bool any_censored = false;
  for (const auto& id : order) {
    auto& rows = by_subject[id];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.time < b.time; });
    Trajectory traj;
    traj.subject_id = id;
    for (const Row& row : rows) {
      traj.times.push_back(row.time);
      traj.values.push_back(row.value);
      traj.censored.push_back(row.censored ? 1 : 0);
      any_censored |= row.censored;
      t_min = std::min(t_min, row.time);
      t_max = std::max(t_max, row.time);
    }
    data.trajectories.push_back(std::move(traj));
  }
  data.domain_lo = t_min;
  data.domain_hi = t_max;
  if (any_censored) {
    data.detection_limit = detection_limit ? detection_limit : inferred_limit;
  }
  data.validate();
  return data;
}

void export_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  out << "subject_id,time,value,censored\n";
  for (const auto& traj : data.trajectories) {
    for (std::size_t j = 0; j < traj.size(); ++j) {
      out << traj.subject_id << ',' << format_double(traj.times[j]) << ','
          << format_double(traj.values[j]) << ','
          << (traj.censored[j] ? '1' : '0') << '\n';
    }
  }
  if (!out) {
    throw std::runtime_error("write failed for '" + path + "'");
  }
}

}  // namespace dlfpca
