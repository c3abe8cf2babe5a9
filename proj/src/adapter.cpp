#include "slat/adapter.hpp"

#include <stdexcept>

namespace slat {

std::vector<Variable*> AdapterParams::tensors() {
  if (use_bias) return {&w_down, &b_down, &w_up, &b_up};
  return {&w_down, &w_up};
}

std::vector<const Variable*> AdapterParams::tensors() const {
  if (use_bias) return {&w_down, &b_down, &w_up, &b_up};
  return {&w_down, &w_up};
}

long AdapterParams::param_count() const {
  long n = 0;
  for (const Variable* v : tensors()) n += v->size();
  return n;
}

AdapterParams make_adapter(int d, int r, std::uint64_t seed, bool use_bias,
                           const std::string& name) {
  if (r < 1 || 2 * r > d)
    throw std::invalid_argument("adapter: rank must satisfy 1 <= r <= d/2, got r=" +
                                std::to_string(r) + " d=" + std::to_string(d));
  std::mt19937_64 rng(seed);
  Mat wd(d, r);
  fill_gaussian(wd, 0.02, rng);
  AdapterParams a{Variable(std::move(wd), true, name + ".w_down"),
                  Variable(Mat::Zero(1, r), true, name + ".b_down"),
                  Variable(Mat::Zero(r, d), true, name + ".w_up"),
                  Variable(Mat::Zero(1, d), true, name + ".b_up"),
                  r,
                  use_bias};
  return a;
}

GateVector make_gates(int num_layers, const std::string& name) {
  return GateVector{Variable(Mat::Zero(num_layers, 1), true, name)};
}

Tensor adapter_delta(Tape& tape, AdapterParams& a, Tensor h) {
  if (h.cols() != a.w_down.value.rows())
    throw std::invalid_argument("adapter: input width " + std::to_string(h.cols()) +
                                " != d " + std::to_string(a.w_down.value.rows()));
  Tensor mid = matmul(h, tape.param(a.w_down));
  if (a.use_bias) mid = add_rowvec(mid, tape.param(a.b_down));
  Tensor up = matmul(activation(mid), tape.param(a.w_up));
  if (a.use_bias) up = add_rowvec(up, tape.param(a.b_up));
  return up;
}

Tensor adapter_forward(Tape& tape, AdapterParams& a, Tensor h) {
  return add(h, adapter_delta(tape, a, h));
}

Tensor gated_layer_forward(Tape& tape, Tensor gate_logit, Tensor h, AdapterParams& a) {
  Tensor s = sigmoid(gate_logit);
  Tensor identity_path = scale_by(h, affine(s, -1.0, 1.0));
  Tensor adapter_path = scale_by(adapter_forward(tape, a, h), s);
  return add(identity_path, adapter_path);
}

Tensor sparsity_penalty(Tape& tape, GateVector& gates, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("sparsity_penalty: lambda must be >= 0");
  return scale(sum_all(sigmoid(tape.param(gates.logits))), lambda);
}

Tensor total_loss(Tape& tape, Tensor task_loss, GateVector& gates, double lambda) {
  return add(task_loss, sparsity_penalty(tape, gates, lambda));
}

std::set<int> discretize(const Mat& gate_logits, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("discretize: tau must lie in (0,1), got " + std::to_string(tau));
  std::set<int> active;
  for (long l = 0; l < gate_logits.rows(); ++l)
    if (sigmoid_scalar(gate_logits(l, 0)) >= tau) active.insert(static_cast<int>(l));
  return active;
}

std::set<int> discretize(const GateVector& gates, double tau) {
  return discretize(gates.logits.value, tau);
}

StructureReport structure_report(const GateVector& gates,
                                 const std::vector<AdapterParams>& adapters,
                                 const BackboneWeights& backbone,
                                 const std::vector<const Variable*>& head_tensors,
                                 double tau) {
  StructureReport r;
  for (int l = 0; l < gates.layer_count(); ++l) r.gate_activation.push_back(gates.activation(l));
  r.active_layers = discretize(gates, tau);

  long trainable = gates.logits.size();
  for (int l : r.active_layers) trainable += adapters[static_cast<std::size_t>(l)].param_count();
  for (const Variable* v : head_tensors) trainable += v->size();

  long frozen = 0;
  for (const Variable* v : backbone.all_tensors()) frozen += v->size();

  r.trainable_params = trainable;
  r.total_params = frozen + trainable;
  r.trainable_ratio = static_cast<double>(trainable) / static_cast<double>(r.total_params);
  return r;
}

}  // namespace slat
