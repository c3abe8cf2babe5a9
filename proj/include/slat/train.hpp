#pragma once

#include "slat/model.hpp"

#include <map>
#include <stdexcept>

namespace slat {

struct DivergenceError : std::runtime_error {
  double lambda;
  double lr;
  DivergenceError(double lambda_, double lr_)
      : std::runtime_error("training diverged (NaN loss) at lambda=" + std::to_string(lambda_) +
                           " lr=" + std::to_string(lr_)),
        lambda(lambda_),
        lr(lr_) {}
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables clipping
};

// Adaptive-moment optimizer with per-parameter step counts; frozen tensors
// never get an accumulator slot.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<Variable*>& params);
  bool has_slot(const Variable* v) const { return slots_.count(const_cast<Variable*>(v)) > 0; }
  void drop_slots_except(const std::vector<Variable*>& keep);
  void set_lr(Variable* v, double lr) { lr_override_[v] = lr; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Slot {
    Mat m, v;
    long t = 0;
  };
  AdamConfig config_;
  std::map<Variable*, Slot> slots_;
  std::map<Variable*, double> lr_override_;
};

struct StepMetrics {
  double task_loss = 0.0;
  double penalty = 0.0;
  double total_loss = 0.0;
};

struct EpochMetrics {
  int epoch = 0;
  double task_loss = 0.0;
  double penalty = 0.0;
  double total_loss = 0.0;
  std::map<int, double> val_accuracy;  // per task
  std::vector<double> gate_activations;
  double trainable_ratio = 0.0;
};

struct TrainReport {
  std::vector<EpochMetrics> epochs;  // index 0 = initial evaluation, no updates
  double ratio_before_prune = 0.0;   // hard_retrain only
  double ratio_after_prune = 0.0;
};

struct FitConfig {
  int epochs = 20;
  int batch_size = 32;
  double lambda = 0.0;
  double noise_p = 0.0;
  bool eval_noise = true;  // apply the same noise ratio to validation batches
  std::uint64_t seed = 0;
  double gate_lr = -1.0;  // < 0 means: use adam.lr for gates too
  AdamConfig adam;
};

// One forward/backward/update on a single batch; only requires_grad tensors
// owned by the batch's task move.
StepMetrics train_step(Model& model, const TaskBatch& batch, double lambda, Adam& optim);

// Round-robin over tasks, deterministic given seed. Early-stops only on NaN.
TrainReport fit(Model& model, std::vector<TaskData>& data, const FitConfig& config);

// Argmax accuracy; no parameter mutation.
double evaluate(Model& model, const TaskBatch& batch, GateOverride ov = GateOverride::kNone);

// Discretizes at tau, prunes inactive adapters, retrains survivors and heads
// with lambda = 0. An empty active set degenerates to head-only training.
TrainReport hard_retrain(Model& model, double tau, std::vector<TaskData>& data, FitConfig config);

}  // namespace slat
