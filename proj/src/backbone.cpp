#include "slat/backbone.hpp"

#include <cmath>
#include <stdexcept>

namespace slat {

void BackboneConfig::validate() const {
  if (vocab_size < 4) throw std::invalid_argument("backbone: vocab_size must be >= 4");
  if (model_dim < 4 || model_dim % 2 != 0)
    throw std::invalid_argument("backbone: model_dim must be >= 4 and even, got " + std::to_string(model_dim));
  if (num_layers < 1) throw std::invalid_argument("backbone: num_layers must be >= 1");
  if (seq_len < 2) throw std::invalid_argument("backbone: seq_len must be >= 2");
}

void fill_gaussian(Mat& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (long j = 0; j < m.cols(); ++j)
    for (long i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

BackboneWeights build_backbone(const BackboneConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const int d = config.model_dim;
  const int hidden = 4 * d;

  BackboneWeights bb;
  bb.config = config;

  auto gauss = [&](long r, long c, const std::string& name) {
    Mat m(r, c);
    fill_gaussian(m, 0.02, rng);
    return Variable(std::move(m), false, name);
  };
  auto zeros = [&](long r, long c, const std::string& name) {
    return Variable(Mat::Zero(r, c), false, name);
  };

  bb.embedding = gauss(config.vocab_size, d, "embedding");
  for (int l = 0; l < config.num_layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    BackboneWeights::Layer layer{
        gauss(d, d, p + "w_q"),       gauss(d, d, p + "w_k"),
        gauss(d, d, p + "w_v"),       gauss(d, d, p + "w_o"),
        zeros(1, d, p + "b_q"),       zeros(1, d, p + "b_k"),
        zeros(1, d, p + "b_v"),       zeros(1, d, p + "b_o"),
        gauss(d, hidden, p + "w_ffn1"), zeros(1, hidden, p + "b_ffn1"),
        gauss(hidden, d, p + "w_ffn2"), zeros(1, d, p + "b_ffn2")};
    bb.layers.push_back(std::move(layer));
  }
  return bb;
}

Tensor BackboneWeights::layer_forward(Tape& tape, int l, Tensor h) const {
  if (l < 0 || l >= static_cast<int>(layers.size()))
    throw std::invalid_argument("layer_forward: layer index " + std::to_string(l) + " out of range");
  auto& L = const_cast<BackboneWeights::Layer&>(layers[static_cast<std::size_t>(l)]);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(config.model_dim));

  Tensor n1 = layer_norm_rows(h);
  Tensor q = add_rowvec(matmul(n1, tape.param(L.w_q)), tape.param(L.b_q));
  Tensor k = add_rowvec(matmul(n1, tape.param(L.w_k)), tape.param(L.b_k));
  Tensor v = add_rowvec(matmul(n1, tape.param(L.w_v)), tape.param(L.b_v));
  Tensor attn = row_softmax(scale(matmul_nt(q, k), inv_sqrt_d));
  Tensor ctx = add_rowvec(matmul(matmul(attn, v), tape.param(L.w_o)), tape.param(L.b_o));
  Tensor h1 = add(h, ctx);

  Tensor n2 = layer_norm_rows(h1);
  Tensor ffn = add_rowvec(
      matmul(activation(add_rowvec(matmul(n2, tape.param(L.w_ffn1)), tape.param(L.b_ffn1))),
             tape.param(L.w_ffn2)),
      tape.param(L.b_ffn2));
  return add(h1, ffn);
}

Tensor BackboneWeights::encode_one(Tape& tape, const std::vector<int>& tokens,
                                   const AdapterHook& hook) const {
  Tensor emb_table = tape.param(const_cast<Variable&>(embedding));
  Tensor h = embed_rows(emb_table, tokens);
  for (int l = 0; l < static_cast<int>(layers.size()); ++l) {
    h = layer_forward(tape, l, h);
    if (hook) h = hook(tape, l, h);
  }
  return mean_rows(h);
}

Tensor BackboneWeights::encode(Tape& tape, const std::vector<std::vector<int>>& tokens,
                               const AdapterHook& hook) const {
  std::vector<Tensor> pooled;
  pooled.reserve(tokens.size());
  for (const auto& seq : tokens) pooled.push_back(encode_one(tape, seq, hook));
  return concat_rows(pooled);
}

std::vector<const Variable*> BackboneWeights::all_tensors() const {
  std::vector<const Variable*> out{&embedding};
  for (const auto& l : layers)
    for (const Variable* v : {&l.w_q, &l.w_k, &l.w_v, &l.w_o, &l.b_q, &l.b_k, &l.b_v, &l.b_o,
                              &l.w_ffn1, &l.b_ffn1, &l.w_ffn2, &l.b_ffn2})
      out.push_back(v);
  return out;
}

std::vector<Variable*> BackboneWeights::all_tensors() {
  std::vector<Variable*> out;
  for (const Variable* v : static_cast<const BackboneWeights*>(this)->all_tensors())
    out.push_back(const_cast<Variable*>(v));
  return out;
}

std::uint64_t BackboneWeights::checksum() const { return bytes_checksum(all_tensors()); }

std::uint64_t bytes_checksum(const std::vector<const Variable*>& tensors) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const Variable* v : tensors)
    mix(v->value.data(), sizeof(double) * static_cast<std::size_t>(v->value.size()));
  return h;
}

}  // namespace slat
