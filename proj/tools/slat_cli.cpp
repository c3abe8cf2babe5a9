// Command-line harness: single training runs, lambda/noise sweeps,
// report aggregation, and the gradient-check release gate.
//
// Exit codes: 0 success, 1 config error, 2 runtime/divergence error,
// 3 gradcheck failure.

#include "slat/gradcheck_suite.hpp"
#include "slat/runner.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace slat;

void apply_overrides(ExperimentConfig& config, const std::string& seeds_csv) {
  if (!seeds_csv.empty()) {
    config.seeds.clear();
    std::istringstream is(seeds_csv);
    std::string item;
    while (std::getline(is, item, ',')) config.seeds.push_back(std::stoull(item));
  }
}

int cmd_train(const ExperimentConfig& config, const std::string& out_path) {
  std::vector<ResultRecord> all;
  for (std::uint64_t seed : config.seeds) {
    RunOutput run;
    try {
      run = run_single(config, seed, "-");
    } catch (const DivergenceError& e) {
      std::cerr << "error: seed " << seed << ": " << e.what() << "\n";
      return 2;
    }
    for (const ResultRecord& r : run.records) all.push_back(r);

    std::printf("seed %llu:\n", static_cast<unsigned long long>(seed));
    for (const ResultRecord& r : run.records)
      if (r.metric.rfind("val_acc", 0) == 0 || r.metric == "param_ratio_soft" ||
          r.metric == "mean_gate")
        std::printf("  %-24s %.4f\n", r.metric.c_str(), r.value);
    const EpochMetrics& last = run.report.epochs.back();
    std::printf("  gate activations:");
    for (double g : last.gate_activations) std::printf(" %.3f", g);
    std::printf("\n");
  }
  if (!out_path.empty()) append_records_file(out_path, all);
  return 0;
}

int cmd_sweep(const ExperimentConfig& base, const std::string& param,
              std::vector<double> values, const std::string& out_path, int workers) {
  if (values.empty()) {
    if (param == "lambda") values = {0.0, 0.5, 1.0, 2.0, 5.0};
    else values = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25};
  }

  struct Cell {
    ExperimentConfig config;
    std::uint64_t seed;
    std::string coordinate;
  };
  std::vector<Cell> cells;
  for (double v : values) {
    ExperimentConfig c = base;
    std::string coord;
    if (param == "lambda") {
      c.lambda = v;
      coord = "lambda=" + std::to_string(v);
    } else {
      c.noise_p = v;
      coord = "noise=" + std::to_string(v);
    }
    c.validate();
    for (std::uint64_t seed : c.seeds) cells.push_back({c, seed, coord});
  }

  // cells are pure functions of (config, seed); run them concurrently and
  // merge in cell order so output is deterministic
  std::vector<std::vector<ResultRecord>> results(cells.size());
  std::vector<std::string> failures(cells.size());
  std::atomic<std::size_t> cursor{0};
  auto work = [&]() {
    for (;;) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        results[i] = run_single(cells[i].config, cells[i].seed, cells[i].coordinate).records;
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(work);
  for (auto& th : pool) th.join();

  std::vector<ResultRecord> all;
  bool any_failed = false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!failures[i].empty()) {
      any_failed = true;
      std::cerr << "cell " << cells[i].coordinate << " seed " << cells[i].seed
                << " failed: " << failures[i] << "\n";
      all.push_back({cells[i].config.hash(), cells[i].seed, cells[i].coordinate, "failed", 1.0,
                     now_millis()});
      continue;
    }
    for (const ResultRecord& r : results[i]) all.push_back(r);
  }
  if (!out_path.empty()) append_records_file(out_path, all);
  else write_records(std::cout, all);
  std::printf("sweep complete: %zu cells, %zu records%s\n", cells.size(), all.size(),
              any_failed ? " (with failures)" : "");
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& csv_path) {
  std::vector<ResultRecord> records;
  try {
    records = read_records_file(in_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  auto aggs = aggregate_records(records);

  std::printf("%-18s %-28s %10s %10s %10s %10s %6s\n", "coordinate", "metric", "mean", "median",
              "min", "max", "n");
  for (const auto& [key, a] : aggs)
    std::printf("%-18s %-28s %10.4f %10.4f %10.4f %10.4f %6ld\n", key.first.c_str(),
                key.second.c_str(), a.mean, a.median, a.min, a.max, a.count);

  // params-vs-accuracy table over the model variants when present
  const char* variants[] = {"acc_gates_off", "acc_gates_on", "acc_soft", "acc_discretized"};
  bool have_variant = false;
  for (const auto& [key, a] : aggs)
    for (const char* v : variants)
      if (key.second.rfind(v, 0) == 0) have_variant = true;
  if (have_variant) {
    std::printf("\nvariant accuracy (mean over seeds):\n");
    std::printf("%-18s %-20s %10s\n", "coordinate", "variant", "accuracy");
    for (const auto& [key, a] : aggs)
      for (const char* v : variants)
        if (key.second.rfind(v, 0) == 0)
          std::printf("%-18s %-20s %10.4f\n", key.first.c_str(), key.second.c_str(), a.mean);
  }

  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    if (!csv) {
      std::cerr << "error: cannot open " << csv_path << "\n";
      return 2;
    }
    csv << "coordinate,metric,mean,median,min,max,count\n";
    for (const auto& [key, a] : aggs)
      csv << key.first << ',' << key.second << ',' << a.mean << ',' << a.median << ',' << a.min
          << ',' << a.max << ',' << a.count << '\n';
  }
  return 0;
}

int cmd_gradcheck() {
  auto results = run_gradcheck_suite();
  bool all_passed = true;
  for (const SuiteResult& r : results) {
    std::printf("%-28s max_rel_err=%.3e %s\n", r.name.c_str(), r.max_rel_error,
                r.passed ? "pass" : "FAIL");
    if (!r.passed) {
      all_passed = false;
      std::printf("  worst parameter: %s[%ld]\n", r.worst_param.c_str(), r.worst_index);
    }
  }
  return all_passed ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structure-learnable adapter fine-tuning harness"};
  app.require_subcommand(1);

  std::string config_path, out_path, seeds_csv;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--seed", seeds_csv, "comma-separated seed list (overrides config)");
  app.add_option("--out", out_path, "results file (appended)");

  auto* train = app.add_subcommand("train", "train per seed and report metrics");

  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  std::string sweep_param = "lambda";
  std::string values_csv;
  int workers = static_cast<int>(std::max(1u, std::min(4u, std::thread::hardware_concurrency())));
  sweep->add_option("--param", sweep_param, "lambda or noise")
      ->check(CLI::IsMember({"lambda", "noise"}));
  sweep->add_option("--values", values_csv, "comma-separated sweep values");
  sweep->add_option("--workers", workers, "concurrent cells");

  auto* report = app.add_subcommand("report", "aggregate a results file");
  std::string in_path, csv_path;
  report->add_option("--in", in_path, "results file")->required();
  report->add_option("--csv", csv_path, "write aggregate CSV here");

  auto* gradcheck = app.add_subcommand("gradcheck", "run the finite-difference gradient suite");
  (void)gradcheck;

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("gradcheck")) return cmd_gradcheck();
    if (app.got_subcommand("report")) return cmd_report(in_path, csv_path);

    slat::ExperimentConfig config;
    if (!config_path.empty()) config = slat::load_config_file(config_path);
    apply_overrides(config, seeds_csv);
    config.validate();

    if (app.got_subcommand("train")) return cmd_train(config, out_path);
    if (app.got_subcommand("sweep")) {
      std::vector<double> values;
      if (!values_csv.empty()) {
        std::istringstream is(values_csv);
        std::string item;
        while (std::getline(is, item, ',')) values.push_back(std::stod(item));
      }
      return cmd_sweep(config, sweep_param, values, out_path, workers);
    }
  } catch (const slat::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  (void)train;
  return 0;
}
