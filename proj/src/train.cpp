#include "slat/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <set>

namespace slat {

void Adam::step(const std::vector<Variable*>& params) {
  if (config_.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (Variable* p : params) sq += p->grad.squaredNorm();
    double norm = std::sqrt(sq);
    if (norm > config_.max_grad_norm) {
      double s = config_.max_grad_norm / norm;
      for (Variable* p : params) p->grad *= s;
    }
  }
  for (Variable* p : params) {
    if (!p->requires_grad)
      throw std::invalid_argument("optimizer: frozen tensor " + p->name + " passed to step()");
    Slot& s = slots_[p];
    if (s.t == 0) {
      s.m = Mat::Zero(p->value.rows(), p->value.cols());
      s.v = Mat::Zero(p->value.rows(), p->value.cols());
    }
    ++s.t;
    s.m = config_.beta1 * s.m + (1.0 - config_.beta1) * p->grad;
    s.v = config_.beta2 * s.v + (1.0 - config_.beta2) * p->grad.cwiseProduct(p->grad);
    double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(s.t));
    double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(s.t));
    Mat m_hat = s.m / bc1;
    Mat v_hat = s.v / bc2;
    auto lr_it = lr_override_.find(p);
    double lr = (lr_it == lr_override_.end()) ? config_.lr : lr_it->second;
    p->value.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + config_.eps);
  }
}

void Adam::drop_slots_except(const std::vector<Variable*>& keep) {
  std::set<Variable*> keep_set(keep.begin(), keep.end());
  for (auto it = slots_.begin(); it != slots_.end();)
    it = keep_set.count(it->first) ? std::next(it) : slots_.erase(it);
}

StepMetrics train_step(Model& model, const TaskBatch& batch, double lambda, Adam& optim) {
  std::vector<Variable*> params = model.trainables(batch.task_id);
  for (Variable* p : params) p->zero_grad();

  Tape tape;
  Tensor logits = model.logits(tape, batch);
  Tensor task_loss = softmax_cross_entropy(logits, batch.labels);

  StepMetrics metrics;
  metrics.task_loss = task_loss.value()(0, 0);

  Tensor total = task_loss;
  if (!model.is_hard() && lambda > 0.0) {
    Tensor pen = model.penalty(tape, batch.task_id, lambda);
    metrics.penalty = pen.value()(0, 0);
    total = add(task_loss, pen);
  }
  metrics.total_loss = total.value()(0, 0);
  if (!std::isfinite(metrics.total_loss))
    throw DivergenceError(lambda, optim.config().lr);

  tape.backward(total);
  optim.step(params);
  return metrics;
}

double evaluate(Model& model, const TaskBatch& batch, GateOverride ov) {
  if (batch.size() == 0) throw std::invalid_argument("evaluate: empty split");
  const std::size_t chunk = 64;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < batch.size(); start += chunk) {
    std::size_t n = std::min(chunk, batch.size() - start);
    TaskBatch sub;
    sub.task_id = batch.task_id;
    sub.vocab_size = batch.vocab_size;
    sub.tokens.assign(batch.tokens.begin() + static_cast<long>(start),
                      batch.tokens.begin() + static_cast<long>(start + n));
    sub.labels.assign(batch.labels.begin() + static_cast<long>(start),
                      batch.labels.begin() + static_cast<long>(start + n));
    Tape tape;
    Tensor logits = model.logits(tape, sub, ov);
    const Mat& z = logits.value();
    for (long i = 0; i < z.rows(); ++i) {
      long arg = 0;
      z.row(i).maxCoeff(&arg);
      if (static_cast<int>(arg) == sub.labels[static_cast<std::size_t>(i)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

namespace {

std::vector<double> gate_snapshot(const Model& model) {
  std::vector<double> out;
  if (model.config.mode == Mode::kSingleTask) {
    for (int l = 0; l < model.gates.layer_count(); ++l) out.push_back(model.gates.activation(l));
  } else {
    for (const auto& [task, logits] : model.task_gates.by_task)
      for (long i = 0; i < logits.value.size(); ++i)
        out.push_back(sigmoid_scalar(logits.value.data()[i]));
  }
  return out;
}

EpochMetrics eval_epoch(Model& model, std::vector<TaskData>& data, const FitConfig& config,
                        int epoch) {
  EpochMetrics em;
  em.epoch = epoch;
  for (TaskData& task : data) {
    TaskBatch val = task.val;
    if (config.eval_noise && config.noise_p > 0.0)
      val = inject_noise(val, config.noise_p,
                         config.seed * 1000003ull + 77ull * static_cast<std::uint64_t>(epoch) +
                             static_cast<std::uint64_t>(task.spec.task_id));
    em.val_accuracy[task.spec.task_id] = evaluate(model, val);
  }
  em.gate_activations = gate_snapshot(model);
  em.trainable_ratio = static_cast<double>(model.trainable_param_count()) /
                       static_cast<double>(model.total_param_count());
  return em;
}

TaskBatch slice_batch(const TaskData& task, const std::vector<std::size_t>& order,
                      std::size_t start, std::size_t n) {
  TaskBatch b;
  b.task_id = task.spec.task_id;
  b.vocab_size = task.spec.vocab_size;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx = order[start + i];
    b.tokens.push_back(task.train.tokens[idx]);
    b.labels.push_back(task.train.labels[idx]);
  }
  return b;
}

}  // namespace

TrainReport fit(Model& model, std::vector<TaskData>& data, const FitConfig& config) {
  if (data.empty()) throw std::invalid_argument("fit: no tasks supplied");
  for (const TaskData& t : data)
    if (t.train.size() == 0 || t.val.size() == 0)
      throw std::invalid_argument("fit: empty split for task " + std::to_string(t.spec.task_id));

  Adam optim(config.adam);
  if (config.gate_lr > 0.0) {
    if (model.config.mode == Mode::kSingleTask) {
      optim.set_lr(&model.gates.logits, config.gate_lr);
    } else {
      for (auto& [task, logits] : model.task_gates.by_task) optim.set_lr(&logits, config.gate_lr);
    }
  }
  TrainReport report;
  report.epochs.push_back(eval_epoch(model, data, config, 0));

  std::mt19937_64 rng(config.seed);
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    // fresh shuffled order per task per epoch
    std::vector<std::vector<std::size_t>> orders;
    std::size_t max_batches = 0;
    for (const TaskData& task : data) {
      std::vector<std::size_t> order(task.train.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      max_batches = std::max(max_batches, (order.size() + bs - 1) / bs);
      orders.push_back(std::move(order));
    }

    double sum_task = 0.0, sum_pen = 0.0, sum_total = 0.0;
    long steps = 0;
    for (std::size_t b = 0; b < max_batches; ++b) {
      for (std::size_t t = 0; t < data.size(); ++t) {
        std::size_t start = b * bs;
        if (start >= orders[t].size()) continue;
        std::size_t n = std::min(bs, orders[t].size() - start);
        TaskBatch batch = slice_batch(data[t], orders[t], start, n);
        if (config.noise_p > 0.0) batch = inject_noise(batch, config.noise_p, rng());
        StepMetrics m = train_step(model, batch, config.lambda, optim);
        sum_task += m.task_loss;
        sum_pen += m.penalty;
        sum_total += m.total_loss;
        ++steps;
      }
    }

    EpochMetrics em = eval_epoch(model, data, config, epoch);
    em.task_loss = sum_task / static_cast<double>(steps);
    em.penalty = sum_pen / static_cast<double>(steps);
    em.total_loss = sum_total / static_cast<double>(steps);
    report.epochs.push_back(std::move(em));
  }
  return report;
}

TrainReport hard_retrain(Model& model, double tau, std::vector<TaskData>& data, FitConfig config) {
  double before = static_cast<double>(model.trainable_param_count()) /
                  static_cast<double>(model.total_param_count());
  model.discretize_structure(tau);
  bool any_active = false;
  if (model.hard_active) any_active = !model.hard_active->empty();
  if (model.hard_routes)
    for (const auto& [task, route] : *model.hard_routes)
      for (const auto& layer : route)
        if (!layer.empty()) any_active = true;
  if (!any_active)
    std::cerr << "warning: empty active set after discretization; continuing head-only\n";

  config.lambda = 0.0;
  TrainReport report = fit(model, data, config);
  report.ratio_before_prune = before;
  report.ratio_after_prune = static_cast<double>(model.trainable_param_count()) /
                             static_cast<double>(model.total_param_count());
  return report;
}

}  // namespace slat
