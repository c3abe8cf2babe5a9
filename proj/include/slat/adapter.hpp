#pragma once

#include "slat/backbone.hpp"
#include "slat/tape.hpp"

#include <set>
#include <vector>

namespace slat {

// Bottleneck adapter: down-projection, nonlinearity, up-projection, residual.
// W_up starts at zero so a fresh adapter is an exact identity.
struct AdapterParams {
  Variable w_down;  // d x r
  Variable b_down;  // 1 x r
  Variable w_up;    // r x d
  Variable b_up;    // 1 x d
  int rank = 0;
  bool use_bias = true;

  std::vector<Variable*> tensors();
  std::vector<const Variable*> tensors() const;
  long param_count() const;
};

AdapterParams make_adapter(int d, int r, std::uint64_t seed, bool use_bias = true,
                           const std::string& name = "adapter");

// Per-layer insertion gate logits for single-task mode, stored as L x 1.
struct GateVector {
  Variable logits;

  int layer_count() const { return static_cast<int>(logits.value.rows()); }
  double activation(int l) const { return sigmoid_scalar(logits.value(l, 0)); }
};

GateVector make_gates(int num_layers, const std::string& name = "gates");

// The adapter's residual contribution only: f(h*W_down + b_down)*W_up + b_up.
Tensor adapter_delta(Tape& tape, AdapterParams& adapter, Tensor h);

// Full adapter transform h + delta(h).
Tensor adapter_forward(Tape& tape, AdapterParams& adapter, Tensor h);

// Convex blend (1 - sigmoid(gate))*h + sigmoid(gate)*adapter_forward(h).
// `gate_logit` must be a 1x1 tensor.
Tensor gated_layer_forward(Tape& tape, Tensor gate_logit, Tensor h, AdapterParams& adapter);

// lambda * sum_l sigmoid(a_l).
Tensor sparsity_penalty(Tape& tape, GateVector& gates, double lambda);

Tensor total_loss(Tape& tape, Tensor task_loss, GateVector& gates, double lambda);

// Hard structure selection: layer l is active iff sigmoid(a_l) >= tau.
std::set<int> discretize(const GateVector& gates, double tau);
std::set<int> discretize(const Mat& gate_logits, double tau);

struct StructureReport {
  std::vector<double> gate_activation;  // sigmoid(a_l) per layer
  std::set<int> active_layers;
  long trainable_params = 0;
  long total_params = 0;
  double trainable_ratio = 0.0;
};

// Trainable count = adapters at active layers + gate scalars + head params;
// total adds the frozen backbone.
StructureReport structure_report(const GateVector& gates,
                                 const std::vector<AdapterParams>& adapters,
                                 const BackboneWeights& backbone,
                                 const std::vector<const Variable*>& head_tensors,
                                 double tau);

}  // namespace slat
