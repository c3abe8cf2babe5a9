#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace slat {

// One canonical run description. Serializes to a flat key=value document;
// parse(serialize(c)) == c and unknown keys are rejected.
struct ExperimentConfig {
  int vocab_size = 200;
  int model_dim = 32;
  int num_layers = 2;
  int seq_len = 16;
  int rank = 8;
  std::string mode = "single_task";  // or "multitask"
  int pool_size = 2;
  int num_tasks = 1;
  double lambda = 0.0;
  double noise_p = 0.0;
  double tau = 0.5;
  std::vector<std::uint64_t> seeds = {0};
  int epochs = 20;
  int batch_size = 32;
  double lr = 1e-3;
  double gate_lr = 1e-3;
  int n_train = 2000;
  int n_val = 500;
  int n_test = 500;
  bool adapter_bias = true;
  bool single_insertion_layer = false;
  bool hard_retrain = false;
  bool eval_noise = true;
  double max_grad_norm = 0.0;

  void validate() const;
  std::string serialize() const;
  std::string hash() const;  // hex digest over the serialized form
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

}  // namespace slat
