#pragma once

#include "slat/config.hpp"
#include "slat/results.hpp"
#include "slat/train.hpp"

namespace slat {

struct RunOutput {
  std::vector<ResultRecord> records;
  TrainReport report;
};

// Synthetic task suite for this config; deterministic given (config, seed).
std::vector<TaskData> build_suite(const ExperimentConfig& config, std::uint64_t seed);

Model build_model_for(const ExperimentConfig& config, const std::vector<TaskData>& data,
                      std::uint64_t seed);

FitConfig fit_config_for(const ExperimentConfig& config, std::uint64_t seed);

// One full cell: generate data, build, fit, evaluate all variants, emit
// records tagged with `coordinate`. Pure function of (config, seed).
RunOutput run_single(const ExperimentConfig& config, std::uint64_t seed,
                     const std::string& coordinate);

}  // namespace slat
