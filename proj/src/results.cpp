#include "slat/results.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace slat {

std::uint64_t now_millis() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
}

void write_records(std::ostream& os, const std::vector<ResultRecord>& records) {
  for (const ResultRecord& r : records) {
    char val[64];
    std::snprintf(val, sizeof(val), "%.17g", r.value);
    os << r.config_hash << '\t' << r.seed << '\t' << r.coordinate << '\t' << r.metric << '\t'
       << val << '\t' << r.unix_millis << '\n';
  }
}

void append_records_file(const std::string& path, const std::vector<ResultRecord>& records) {
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("results: cannot open " + path + " for append");
  write_records(os, records);
  if (!os) throw std::runtime_error("results: write failed for " + path);
}

std::vector<ResultRecord> read_records_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("results: cannot open " + path);
  std::vector<ResultRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ResultRecord r;
    std::string value_str, millis_str;
    if (!std::getline(ls, r.config_hash, '\t') || !ls) goto bad;
    {
      std::string seed_str, coord, metric;
      if (!std::getline(ls, seed_str, '\t') || !std::getline(ls, coord, '\t') ||
          !std::getline(ls, metric, '\t') || !std::getline(ls, value_str, '\t') ||
          !std::getline(ls, millis_str))
        goto bad;
      try {
        r.seed = std::stoull(seed_str);
        r.coordinate = coord;
        r.metric = metric;
        r.value = std::stod(value_str);
        r.unix_millis = std::stoull(millis_str);
      } catch (const std::exception&) {
        goto bad;
      }
    }
    out.push_back(std::move(r));
    continue;
  bad:
    throw std::runtime_error("results: parse error at line " + std::to_string(line_no) + " of " +
                             path);
  }
  return out;
}

std::map<std::pair<std::string, std::string>, Aggregate> aggregate_records(
    const std::vector<ResultRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const ResultRecord& r : records) groups[{r.coordinate, r.metric}].push_back(r.value);

  std::map<std::pair<std::string, std::string>, Aggregate> out;
  for (auto& [key, values] : groups) {
    std::sort(values.begin(), values.end());
    Aggregate a;
    a.count = static_cast<long>(values.size());
    a.min = values.front();
    a.max = values.back();
    double sum = 0.0;
    for (double v : values) sum += v;
    a.mean = sum / static_cast<double>(values.size());
    std::size_t n = values.size();
    a.median = (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    out.emplace(key, a);
  }
  return out;
}

}  // namespace slat
