#include "slat/runner.hpp"

#include <stdexcept>

namespace slat {

std::vector<TaskData> build_suite(const ExperimentConfig& config, std::uint64_t seed) {
  return make_multitask_suite(config.num_tasks, seed * 7919ull + 13ull, config.vocab_size,
                              config.seq_len, config.n_train, config.n_val, config.n_test);
}

Model build_model_for(const ExperimentConfig& config, const std::vector<TaskData>& data,
                      std::uint64_t seed) {
  ModelConfig mc;
  mc.backbone = {config.vocab_size, config.model_dim, config.num_layers, config.seq_len, seed};
  mc.rank = config.rank;
  mc.mode = (config.mode == "multitask") ? Mode::kMultiTask : Mode::kSingleTask;
  mc.pool_size = config.pool_size;
  mc.adapter_bias = config.adapter_bias;
  mc.single_insertion_layer = config.single_insertion_layer;
  mc.seed = seed;
  for (const TaskData& t : data) mc.tasks.emplace_back(t.spec.task_id, t.spec.num_classes);
  if (mc.mode == Mode::kSingleTask && mc.tasks.size() != 1)
    throw std::invalid_argument("runner: single_task mode requires exactly one task");
  return build_model(mc);
}

FitConfig fit_config_for(const ExperimentConfig& config, std::uint64_t seed) {
  FitConfig fc;
  fc.epochs = config.epochs;
  fc.batch_size = config.batch_size;
  fc.lambda = config.lambda;
  fc.noise_p = config.noise_p;
  fc.eval_noise = config.eval_noise;
  fc.seed = seed;
  fc.gate_lr = (config.gate_lr != config.lr) ? config.gate_lr : -1.0;
  fc.adam.lr = config.lr;
  fc.adam.max_grad_norm = config.max_grad_norm;
  return fc;
}

RunOutput run_single(const ExperimentConfig& config, std::uint64_t seed,
                     const std::string& coordinate) {
  config.validate();
  std::vector<TaskData> data = build_suite(config, seed);
  Model model = build_model_for(config, data, seed);
  FitConfig fc = fit_config_for(config, seed);

  RunOutput out;
  out.report = fit(model, data, fc);

  const std::string hash = config.hash();
  auto record = [&](const std::string& metric, double value) {
    out.records.push_back({hash, seed, coordinate, metric, value, now_millis()});
  };

  const EpochMetrics& last = out.report.epochs.back();
  record("final_task_loss", last.task_loss);
  record("final_penalty", last.penalty);
  record("final_total_loss", last.total_loss);
  record("mean_gate", model.mean_gate_activation());
  record("active_adapters", static_cast<double>(model.active_adapter_count(config.tau)));
  record("param_ratio_soft", static_cast<double>(model.trainable_param_count()) /
                                 static_cast<double>(model.total_param_count()));

  for (TaskData& task : data) {
    const int t = task.spec.task_id;
    std::string suffix = "_t" + std::to_string(t);
    record("val_acc" + suffix, last.val_accuracy.at(t));
    record("majority_baseline" + suffix, majority_fraction(task.val.labels));
    record("acc_gates_off" + suffix, evaluate(model, task.val, GateOverride::kAllOff));
    record("acc_gates_on" + suffix, evaluate(model, task.val, GateOverride::kAllOn));
    record("acc_soft" + suffix, evaluate(model, task.val));
  }

  {
    Model hard = model;
    hard.discretize_structure(config.tau);
    record("param_ratio_discretized", static_cast<double>(hard.trainable_param_count()) /
                                          static_cast<double>(hard.total_param_count()));
    for (TaskData& task : data)
      record("acc_discretized_t" + std::to_string(task.spec.task_id), evaluate(hard, task.val));
  }

  if (config.hard_retrain) {
    Model retrained = model;
    FitConfig rc = fc;
    rc.seed = seed ^ 0x9e3779b97f4a7c15ull;
    TrainReport rr = hard_retrain(retrained, config.tau, data, rc);
    record("param_ratio_retrained", rr.ratio_after_prune);
    for (TaskData& task : data)
      record("acc_retrained_t" + std::to_string(task.spec.task_id),
             rr.epochs.back().val_accuracy.at(task.spec.task_id));
  }

  return out;
}

}  // namespace slat
