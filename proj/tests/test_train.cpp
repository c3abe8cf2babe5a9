#include <doctest.h>

#include "slat/runner.hpp"
#include "slat/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace slat;

namespace {

// small single-task setup that trains in well under a second
std::vector<TaskData> small_data(std::uint64_t seed, int n_train = 400) {
  TaskSpec spec = default_task_spec(0, 2, 0.25, 0, 8, 16, 50, 8, seed);
  spec.n_train = n_train;
  spec.n_val = 200;
  spec.n_test = 200;
  return {generate(spec)};
}

Model small_model(std::uint64_t seed, Mode mode = Mode::kSingleTask) {
  ModelConfig mc;
  mc.backbone = {50, 16, 2, 8, seed};
  mc.rank = 4;
  mc.mode = mode;
  mc.tasks = {{0, 2}};
  mc.seed = seed;
  return build_model(mc);
}

FitConfig quick_fit(std::uint64_t seed, int epochs = 3) {
  FitConfig fc;
  fc.epochs = epochs;
  fc.batch_size = 32;
  fc.seed = seed;
  return fc;
}

}  // namespace

TEST_CASE("optimizer matches the closed-form update on a one-parameter quadratic") {
  // L = 0.5 x^2 at x = 1: first step has m_hat = v_hat = g = 1 exactly
  Variable x((Mat(1, 1) << 1.0).finished(), true, "x");
  AdamConfig ac;
  Adam optim(ac);
  x.grad(0, 0) = 1.0;
  optim.step({&x});
  double expect = 1.0 - ac.lr * 1.0 / (1.0 + ac.eps);
  CHECK(x.value(0, 0) == expect);

  // second step with the same gradient, applied by hand
  double m = 0.9 * 0.1 + 0.1 * 1.0;
  double v = 0.999 * 0.001 + 0.001 * 1.0;
  double m_hat = m / (1.0 - 0.9 * 0.9);
  double v_hat = v / (1.0 - 0.999 * 0.999);
  double expect2 = expect - ac.lr * m_hat / (std::sqrt(v_hat) + ac.eps);
  x.grad(0, 0) = 1.0;
  optim.step({&x});
  CHECK(x.value(0, 0) == doctest::Approx(expect2).epsilon(1e-15));
}

TEST_CASE("optimizer rejects frozen tensors") {
  Variable x(Mat::Ones(1, 1), false, "x");
  Adam optim;
  CHECK_THROWS_AS(optim.step({&x}), std::invalid_argument);
}

TEST_CASE("train_step matches a finite-difference + hand-applied update oracle") {
  Model model = small_model(2);
  for (auto& a : model.adapters) a.w_up.value.setRandom();
  auto data = small_data(2, 64);
  TaskBatch batch;
  batch.task_id = 0;
  batch.vocab_size = 50;
  for (int i = 0; i < 4; ++i) {
    batch.tokens.push_back(data[0].train.tokens[static_cast<std::size_t>(i)]);
    batch.labels.push_back(data[0].train.labels[static_cast<std::size_t>(i)]);
  }
  const double lambda = 0.5;

  auto loss_value = [&]() {
    Tape t;
    Tensor task = softmax_cross_entropy(model.logits(t, batch), batch.labels);
    return add(task, model.penalty(t, 0, lambda)).value()(0, 0);
  };

  // finite-difference gradients for every trainable entry
  std::vector<Variable*> params = model.trainables(0);
  std::vector<Mat> fd_grads;
  const double eps = 1e-5;
  for (Variable* p : params) {
    Mat g(p->value.rows(), p->value.cols());
    for (long i = 0; i < p->value.size(); ++i) {
      double saved = p->value.data()[i];
      p->value.data()[i] = saved + eps;
      double lp = loss_value();
      p->value.data()[i] = saved - eps;
      double lm = loss_value();
      p->value.data()[i] = saved;
      g.data()[i] = (lp - lm) / (2.0 * eps);
    }
    fd_grads.push_back(std::move(g));
  }

  // hand-applied first Adam step on the FD gradients
  AdamConfig ac;
  std::vector<Mat> expect;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const Mat& g = fd_grads[pi];
    Mat m_hat = g;  // first step: m_hat = g, v_hat = g.^2
    Mat upd = params[pi]->value.array() -
              ac.lr * m_hat.array() / (g.array().square().sqrt() + ac.eps);
    expect.push_back(upd);
  }

  Adam optim(ac);
  train_step(model, batch, lambda, optim);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    double err = (params[pi]->value - expect[pi]).cwiseAbs().maxCoeff();
    CHECK_MESSAGE(err < 1e-4, params[pi]->name, " moved off the oracle by ", err);
  }
}

TEST_CASE("backbone bytes never change during training") {
  Model model = small_model(3);
  auto data = small_data(3);
  std::uint64_t before = model.frozen_checksum();
  fit(model, data, quick_fit(3, 2));
  CHECK(model.frozen_checksum() == before);
}

TEST_CASE("gates saturated off block adapter motion") {
  Model model = small_model(4);
  for (auto& a : model.adapters) a.w_up.value.setRandom();
  model.gates.logits.value.setConstant(-1e9);
  std::vector<Mat> before;
  for (auto& a : model.adapters) before.push_back(a.w_down.value);
  auto data = small_data(4, 64);
  Adam optim;
  TaskBatch batch = data[0].train;
  train_step(model, batch, 0.0, optim);
  for (std::size_t l = 0; l < model.adapters.size(); ++l)
    CHECK((model.adapters[l].w_down.value - before[l]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("divergence raises a dedicated error naming the hyperparameters") {
  Model model = small_model(5);
  model.heads.at(0).w.value(0, 0) = std::nan("");
  auto data = small_data(5, 64);
  Adam optim;
  CHECK_THROWS_AS(train_step(model, data[0].train, 1.0, optim), DivergenceError);
}

TEST_CASE("fit") {
  SUBCASE("zero epochs leaves the model untouched and reports one evaluation") {
    Model model = small_model(6);
    Mat head_before = model.heads.at(0).w.value;
    auto data = small_data(6);
    TrainReport r = fit(model, data, quick_fit(6, 0));
    CHECK(r.epochs.size() == 1);
    CHECK(model.heads.at(0).w.value == head_before);
  }
  SUBCASE("same seed twice is bitwise identical") {
    auto run = [] {
      Model model = small_model(7);
      auto data = small_data(7);
      return fit(model, data, quick_fit(7, 2));
    };
    TrainReport a = run(), b = run();
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
      CHECK(a.epochs[i].task_loss == b.epochs[i].task_loss);
      CHECK(a.epochs[i].val_accuracy == b.epochs[i].val_accuracy);
      CHECK(a.epochs[i].gate_activations == b.epochs[i].gate_activations);
    }
  }
  SUBCASE("total equals task plus penalty at logging time") {
    Model model = small_model(8);
    auto data = small_data(8);
    FitConfig fc = quick_fit(8, 2);
    fc.lambda = 1.5;
    TrainReport r = fit(model, data, fc);
    for (std::size_t i = 1; i < r.epochs.size(); ++i)
      CHECK(std::abs(r.epochs[i].total_loss - r.epochs[i].task_loss - r.epochs[i].penalty) < 1e-9);
  }
  SUBCASE("loss decreases within 5 epochs for at least 9 of 10 seeds") {
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Model model = small_model(seed);
      auto data = small_data(seed);
      TrainReport r = fit(model, data, quick_fit(seed, 5));
      if (r.epochs.back().task_loss < r.epochs[1].task_loss) ++improved;
    }
    CHECK(improved >= 9);
  }
  SUBCASE("heavy sparsity pressure drives gates below the unregularized run") {
    Model a = small_model(9);
    Model b = small_model(9);
    auto data = small_data(9);
    FitConfig free = quick_fit(9, 3);
    FitConfig heavy = quick_fit(9, 3);
    heavy.lambda = 50.0;
    fit(a, data, free);
    fit(b, data, heavy);
    CHECK(b.mean_gate_activation() < a.mean_gate_activation());
  }
}

TEST_CASE("evaluate") {
  Model model = small_model(10);
  auto data = small_data(10);
  SUBCASE("labels replaced by predictions give accuracy 1") {
    TaskBatch relabeled = data[0].val;
    Tape t;
    const Mat z = model.logits(t, relabeled).value();
    for (long i = 0; i < z.rows(); ++i) {
      long arg = 0;
      z.row(i).maxCoeff(&arg);
      relabeled.labels[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    CHECK(evaluate(model, relabeled) == 1.0);
  }
  SUBCASE("a constant head predicts one class, scoring its frequency") {
    model.heads.at(0).w.value.setZero();
    model.heads.at(0).b.value << 10.0, 0.0;
    double freq0 = 0.0;
    for (int lab : data[0].val.labels)
      if (lab == 0) freq0 += 1.0;
    freq0 /= static_cast<double>(data[0].val.size());
    CHECK(evaluate(model, data[0].val) == doctest::Approx(freq0).epsilon(1e-12));
  }
  SUBCASE("repeat evaluation is identical and mutation-free") {
    std::uint64_t sum_before = model.frozen_checksum();
    double a = evaluate(model, data[0].val);
    double b = evaluate(model, data[0].val);
    CHECK(a == b);
    CHECK(model.frozen_checksum() == sum_before);
  }
}

TEST_CASE("hard_retrain") {
  Model model = small_model(11);
  auto data = small_data(11);
  fit(model, data, quick_fit(11, 2));

  SUBCASE("pruning never raises the parameter ratio") {
    Model m = model;
    TrainReport r = hard_retrain(m, 0.5, data, quick_fit(11, 1));
    CHECK(r.ratio_after_prune <= r.ratio_before_prune);
  }
  SUBCASE("all layers surviving reproduces the gates-on path at epoch zero") {
    Model m = model;
    m.gates.logits.value.setConstant(5.0);
    double on_acc = evaluate(m, data[0].val, GateOverride::kAllOn);
    TrainReport r = hard_retrain(m, 0.5, data, quick_fit(11, 0));
    CHECK(r.epochs[0].val_accuracy.at(0) == on_acc);
  }
  SUBCASE("no survivors degenerates to head-only training") {
    Model m = model;
    m.gates.logits.value.setConstant(-5.0);
    std::vector<Mat> adapters_before;
    for (auto& a : m.adapters) adapters_before.push_back(a.w_down.value);
    TrainReport r = hard_retrain(m, 0.5, data, quick_fit(11, 1));
    for (std::size_t l = 0; l < m.adapters.size(); ++l)
      CHECK(m.adapters[l].w_down.value == adapters_before[l]);
    CHECK(r.ratio_after_prune < r.ratio_before_prune);
  }
}

TEST_CASE("checkpoint round trip") {
  namespace fs = std::filesystem;
  Model model = small_model(12);
  auto data = small_data(12, 64);
  Adam optim;
  train_step(model, data[0].train, 0.3, optim);

  fs::path path = fs::temp_directory_path() / "slat_ckpt_test.bin";
  model.save_checkpoint(path.string());

  Model other = small_model(12);
  Mat perturbed = other.heads.at(0).w.value;
  other.heads.at(0).w.value.setConstant(9.0);
  other.load_checkpoint(path.string());
  CHECK(other.heads.at(0).w.value == model.heads.at(0).w.value);
  CHECK(other.gates.logits.value == model.gates.logits.value);
  CHECK(other.frozen_checksum() == model.frozen_checksum());
  (void)perturbed;

  std::remove(path.string().c_str());
  CHECK_THROWS_AS(model.load_checkpoint(path.string()), std::runtime_error);
}
