#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace slat {

// One metric observation. File format: one record per line, tab-separated:
// config_hash  seed  coordinate  metric_name  metric_value  unix_millis
struct ResultRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string coordinate;  // e.g. "lambda=0.5" or "-" for plain runs
  std::string metric;
  double value = 0.0;
  std::uint64_t unix_millis = 0;
};

void write_records(std::ostream& os, const std::vector<ResultRecord>& records);
void append_records_file(const std::string& path, const std::vector<ResultRecord>& records);
std::vector<ResultRecord> read_records_file(const std::string& path);

struct Aggregate {
  double mean = 0.0, median = 0.0, min = 0.0, max = 0.0;
  long count = 0;
};

// Aggregates over seeds, keyed by (coordinate, metric).
std::map<std::pair<std::string, std::string>, Aggregate> aggregate_records(
    const std::vector<ResultRecord>& records);

std::uint64_t now_millis();

}  // namespace slat
