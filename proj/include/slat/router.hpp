#pragma once

#include "slat/adapter.hpp"

#include <map>

namespace slat {

// One shared pool of K adapters per insertion layer. All pool members share
// (d, r); every task routes over the same pool through its own gates.
struct AdapterPool {
  std::vector<std::vector<AdapterParams>> layers;  // [L][K]

  int layer_count() const { return static_cast<int>(layers.size()); }
  int pool_size() const { return layers.empty() ? 0 : static_cast<int>(layers[0].size()); }
  std::vector<Variable*> tensors();
};

AdapterPool make_pool(int num_layers, int pool_size, int d, int r, std::uint64_t seed,
                      bool use_bias = true);

// Per-task routing logits, one row per insertion layer, one column per pool
// member. Gradients for task t's gates arise only from task-t batches.
struct TaskGates {
  std::map<int, Variable> by_task;  // task id -> L x K logits

  Variable& require(int task_id);
  const Variable& require(int task_id) const;
};

TaskGates make_task_gates(const std::vector<int>& task_ids, int num_layers, int pool_size);

// h + sum_k sigmoid(a_k) * delta_k(h), where delta_k is adapter k's residual
// contribution. `gates_row` selects one layer's row of routing logits (1 x K).
Tensor routed_forward(Tape& tape, Tensor h, std::vector<AdapterParams>& pool_layer,
                      Tensor gates_row);

// lambda * sum over one task's L x K gate entries of sigmoid. Only the
// current batch's task is penalized per step.
Tensor multitask_penalty(Tape& tape, Variable& task_gate_logits, double lambda);

}  // namespace slat
