#include "slat/router.hpp"

#include <stdexcept>

namespace slat {

std::vector<Variable*> AdapterPool::tensors() {
  std::vector<Variable*> out;
  for (auto& layer : layers)
    for (AdapterParams& a : layer)
      for (Variable* v : a.tensors()) out.push_back(v);
  return out;
}

AdapterPool make_pool(int num_layers, int pool_size, int d, int r, std::uint64_t seed,
                      bool use_bias) {
  if (pool_size < 1) throw std::invalid_argument("pool: K must be >= 1");
  AdapterPool pool;
  std::uint64_t s = seed;
  for (int l = 0; l < num_layers; ++l) {
    std::vector<AdapterParams> layer;
    for (int k = 0; k < pool_size; ++k)
      layer.push_back(make_adapter(d, r, s++, use_bias,
                                   "pool.l" + std::to_string(l) + ".k" + std::to_string(k)));
    pool.layers.push_back(std::move(layer));
  }
  return pool;
}

Variable& TaskGates::require(int task_id) {
  auto it = by_task.find(task_id);
  if (it == by_task.end())
    throw std::invalid_argument("router: unknown task id " + std::to_string(task_id));
  return it->second;
}

const Variable& TaskGates::require(int task_id) const {
  auto it = by_task.find(task_id);
  if (it == by_task.end())
    throw std::invalid_argument("router: unknown task id " + std::to_string(task_id));
  return it->second;
}

TaskGates make_task_gates(const std::vector<int>& task_ids, int num_layers, int pool_size) {
  TaskGates g;
  for (int t : task_ids)
    g.by_task.emplace(t, Variable(Mat::Zero(num_layers, pool_size), true,
                                  "task" + std::to_string(t) + ".gates"));
  return g;
}

Tensor routed_forward(Tape& tape, Tensor h, std::vector<AdapterParams>& pool_layer,
                      Tensor gates_row) {
  const long K = static_cast<long>(pool_layer.size());
  if (gates_row.rows() != 1 || gates_row.cols() != K)
    throw std::invalid_argument("routed_forward: expected 1x" + std::to_string(K) +
                                " gates row, got " + std::to_string(gates_row.rows()) + "x" +
                                std::to_string(gates_row.cols()));
  Tensor weights = sigmoid(gates_row);
  Tensor out = h;
  for (long k = 0; k < K; ++k) {
    Tensor delta = adapter_delta(tape, pool_layer[static_cast<std::size_t>(k)], h);
    out = add(out, scale_by(delta, index_entry(weights, 0, k)));
  }
  return out;
}

Tensor multitask_penalty(Tape& tape, Variable& task_gate_logits, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("multitask_penalty: lambda must be >= 0");
  return scale(sum_all(sigmoid(tape.param(task_gate_logits))), lambda);
}

}  // namespace slat
