#include <doctest.h>

#include "slat/adapter.hpp"
#include "slat/backbone.hpp"
#include "support/oracles.hpp"

#include <random>

using namespace slat;

namespace {
BackboneConfig tiny_config(std::uint64_t seed = 3) { return {16, 8, 2, 4, seed}; }
}  // namespace

TEST_CASE("build is deterministic per seed") {
  BackboneWeights a = build_backbone(tiny_config(1));
  BackboneWeights b = build_backbone(tiny_config(1));
  CHECK(a.checksum() == b.checksum());
  BackboneWeights c = build_backbone(tiny_config(2));
  CHECK(a.checksum() != c.checksum());
}

TEST_CASE("all backbone tensors are frozen") {
  BackboneWeights bb = build_backbone(tiny_config());
  for (const Variable* v : bb.all_tensors()) CHECK_FALSE(v->requires_grad);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(build_backbone({16, 7, 2, 4, 0}), std::invalid_argument);  // odd d
  CHECK_THROWS_AS(build_backbone({3, 8, 2, 4, 0}), std::invalid_argument);   // tiny vocab
  CHECK_THROWS_AS(build_backbone({16, 8, 0, 4, 0}), std::invalid_argument);
  CHECK_THROWS_AS(build_backbone({16, 8, 2, 1, 0}), std::invalid_argument);
}

TEST_CASE("layer_forward preserves shape and checks bounds") {
  BackboneWeights bb = build_backbone(tiny_config());
  Tape t;
  Mat h = Mat::Random(4, 8);
  Tensor out = bb.layer_forward(t, 0, t.constant(h));
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 8);
  CHECK_THROWS_AS(bb.layer_forward(t, 2, t.constant(h)), std::invalid_argument);
}

TEST_CASE("zero output projections reduce the layer to identity") {
  BackboneWeights bb = build_backbone(tiny_config());
  bb.layers[0].w_o.value.setZero();
  bb.layers[0].b_o.value.setZero();
  bb.layers[0].w_ffn2.value.setZero();
  bb.layers[0].b_ffn2.value.setZero();
  Tape t;
  Mat h = Mat::Random(4, 8);
  Tensor out = bb.layer_forward(t, 0, t.constant(h));
  CHECK((out.value() - h).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("layer_forward matches the straight-line oracle") {
  BackboneWeights bb = build_backbone(tiny_config(9));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat h(4, 8);
  for (long j = 0; j < 8; ++j)
    for (long i = 0; i < 4; ++i) h(i, j) = dist(rng);
  Tape t;
  Tensor out = bb.layer_forward(t, 1, t.constant(h));
  Mat expect = oracle::transformer_layer(bb.layers[1], h, 8);
  CHECK((out.value() - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encode") {
  BackboneWeights bb = build_backbone(tiny_config(5));

  SUBCASE("rejects out-of-vocab tokens") {
    Tape t;
    CHECK_THROWS_AS(bb.encode(t, {{0, 1, 16, 2}}, nullptr), std::invalid_argument);
  }

  SUBCASE("identical sequences pool identically") {
    Tape t;
    Tensor out = bb.encode(t, {{1, 2, 3, 4}, {1, 2, 3, 4}}, nullptr);
    CHECK((out.value().row(0) - out.value().row(1)).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("no hook equals hook with gates at -1e9") {
    AdapterParams adapter = make_adapter(8, 2, 77);
    adapter.w_up.value.setRandom();
    Variable gate((Mat(1, 1) << -1e9).finished(), true, "gate");
    AdapterHook hook = [&](Tape& t, int, Tensor h) {
      return gated_layer_forward(t, t.param(gate), h, adapter);
    };
    Tape t1, t2;
    Tensor plain = bb.encode(t1, {{0, 1, 2, 3}}, nullptr);
    Tensor gated = bb.encode(t2, {{0, 1, 2, 3}}, hook);
    CHECK((plain.value() - gated.value()).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("single example matches independent recomputation") {
    std::vector<int> tokens{3, 7, 1, 0};
    Tape t;
    Tensor out = bb.encode(t, {tokens}, nullptr);
    Mat h(4, 8);
    for (int i = 0; i < 4; ++i) h.row(i) = bb.embedding.value.row(tokens[static_cast<std::size_t>(i)]);
    for (int l = 0; l < 2; ++l) h = oracle::transformer_layer(bb.layers[static_cast<std::size_t>(l)], h, 8);
    Mat pooled = h.colwise().mean();
    CHECK((out.value() - pooled).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("pooling a one-position sequence is that position's state") {
    BackboneConfig cfg = tiny_config();
    cfg.seq_len = 2;
    BackboneWeights small = build_backbone(cfg);
    Tape t;
    // pooling is linear: a single row pools to itself
    Tensor emb = t.param(small.embedding);
    Tensor h = embed_rows(emb, {5});
    Tensor pooled = mean_rows(h);
    CHECK(pooled.value() == h.value());
  }
}
