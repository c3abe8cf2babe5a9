#pragma once

#include "slat/tape.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>

namespace slat {

struct BackboneConfig {
  int vocab_size = 200;
  int model_dim = 32;
  int num_layers = 2;
  int seq_len = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

// Hook applied to the hidden state after each full transformer block;
// this is where gated adapters plug in.
using AdapterHook = std::function<Tensor(Tape&, int layer, Tensor h)>;

// Frozen transformer-style encoder. All weights are frozen at build time;
// task heads live outside this struct and stay trainable.
struct BackboneWeights {
  struct Layer {
    Variable w_q, w_k, w_v, w_o;
    Variable b_q, b_k, b_v, b_o;
    Variable w_ffn1, b_ffn1, w_ffn2, b_ffn2;
  };

  BackboneConfig config;
  Variable embedding;  // V x d
  std::vector<Layer> layers;

  // Pre-norm attention + residual, then pre-norm FFN + residual.
  Tensor layer_forward(Tape& tape, int l, Tensor h) const;

  // Embeds one example's tokens, applies all layers (with the optional
  // adapter hook after each), mean-pools positions to a 1 x d vector.
  Tensor encode_one(Tape& tape, const std::vector<int>& tokens,
                    const AdapterHook& hook) const;

  // Batch version: n x d pooled representations.
  Tensor encode(Tape& tape, const std::vector<std::vector<int>>& tokens,
                const AdapterHook& hook) const;

  std::vector<const Variable*> all_tensors() const;
  std::vector<Variable*> all_tensors();
  std::uint64_t checksum() const;
};

BackboneWeights build_backbone(const BackboneConfig& config);

// FNV-1a over the raw bytes of a set of tensors, used by the freeze contract.
std::uint64_t bytes_checksum(const std::vector<const Variable*>& tensors);

// Seeded Gaussian fill shared by backbone and adapter initialization.
void fill_gaussian(Mat& m, double stddev, std::mt19937_64& rng);

}  // namespace slat
