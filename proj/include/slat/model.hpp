#pragma once

#include "slat/adapter.hpp"
#include "slat/data.hpp"
#include "slat/router.hpp"

#include <map>
#include <optional>

namespace slat {

enum class Mode { kSingleTask, kMultiTask };

// Forces every gate hard off or hard on at evaluation time; used for the
// internal gates-all-off / gates-all-on baselines.
enum class GateOverride { kNone, kAllOff, kAllOn };

struct Head {
  Variable w;  // d x C
  Variable b;  // 1 x C
};

struct ModelConfig {
  BackboneConfig backbone;
  int rank = 8;
  Mode mode = Mode::kSingleTask;
  int pool_size = 2;  // K, multitask routing only
  bool adapter_bias = true;
  bool single_insertion_layer = false;
  std::vector<std::pair<int, int>> tasks;  // (task id, num classes)
  std::uint64_t seed = 0;

  void validate() const;
};

// Frozen backbone plus the trainable structure around it. In single-task
// mode one adapter and one gate scalar per layer; in multi-task mode a
// shared per-layer pool routed by per-task gate matrices. After
// discretization the optional hard structure replaces the soft blends.
struct Model {
  ModelConfig config;
  BackboneWeights backbone;

  std::vector<AdapterParams> adapters;  // single-task, one per layer
  GateVector gates;                     // single-task

  AdapterPool pool;       // multitask
  TaskGates task_gates;   // multitask

  std::map<int, Head> heads;

  std::optional<std::set<int>> hard_active;  // single-task, post-discretize
  std::optional<std::map<int, std::vector<std::set<int>>>> hard_routes;  // task -> [layer] -> active k

  bool is_hard() const { return hard_active.has_value() || hard_routes.has_value(); }

  // Number of gate rows: 1 when routing is restricted to the final layer.
  int insertion_rows() const;

  Tensor logits(Tape& tape, const TaskBatch& batch, GateOverride ov = GateOverride::kNone);

  // Penalty term matching the current mode for the given task's batch.
  Tensor penalty(Tape& tape, int task_id, double lambda);

  // Parameters the optimizer may touch for a batch of this task.
  std::vector<Variable*> trainables(int task_id);
  std::vector<Variable*> all_trainables();
  std::vector<const Variable*> frozen_tensors() const;
  std::uint64_t frozen_checksum() const;

  // Freezes the soft structure into hard paths at threshold tau.
  void discretize_structure(double tau);

  double mean_gate_activation() const;
  long active_adapter_count(double tau) const;

  // Trainable / total parameter counts for the current (soft or hard)
  // structure; soft counts every adapter, hard counts survivors only.
  long trainable_param_count() const;
  long total_param_count() const;

  std::vector<std::pair<std::string, Variable*>> named_tensors();

  void save_checkpoint(const std::string& path);
  void load_checkpoint(const std::string& path);
};

Model build_model(const ModelConfig& config);

}  // namespace slat
