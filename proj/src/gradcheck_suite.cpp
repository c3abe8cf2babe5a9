#include "slat/gradcheck_suite.hpp"

#include "slat/model.hpp"
#include "slat/router.hpp"
#include "slat/train.hpp"

#include <random>

namespace slat {

namespace {

Mat random_mat(long r, long c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Mat m(r, c);
  for (long j = 0; j < c; ++j)
    for (long i = 0; i < r; ++i) m(i, j) = dist(rng);
  return m;
}

struct Case {
  std::string name;
  // Builds variables and a loss function for one random instance.
  std::function<GradCheckReport(std::mt19937_64&, double, double)> run;
};

GradCheckReport check(const std::function<Tensor(Tape&)>& fn, std::vector<Variable*> params,
                      double eps, double tol) {
  return grad_check(fn, params, eps, tol);
}

}  // namespace

std::vector<SuiteResult> run_gradcheck_suite(int instances, double eps, double tol) {
  std::vector<Case> cases;

  cases.push_back({"matmul", [](std::mt19937_64& rng, double eps, double tol) {
    Variable a(random_mat(3, 4, rng), true, "A");
    Variable b(random_mat(4, 2, rng), true, "B");
    Mat proj = random_mat(2, 3, rng);
    return check([&](Tape& t) {
      Tensor c = matmul(t.param(a), t.param(b));
      return sum_all(matmul(c, t.constant(proj)));
    }, {&a, &b}, eps, tol);
  }});

  cases.push_back({"sigmoid", [](std::mt19937_64& rng, double eps, double tol) {
    Variable x(random_mat(3, 3, rng, 2.0), true, "x");
    Mat proj = random_mat(3, 2, rng);
    return check([&](Tape& t) { return sum_all(matmul(sigmoid(t.param(x)), t.constant(proj))); },
                 {&x}, eps, tol);
  }});

  cases.push_back({"activation", [](std::mt19937_64& rng, double eps, double tol) {
    Variable x(random_mat(3, 3, rng, 2.0), true, "x");
    Mat proj = random_mat(3, 2, rng);
    return check([&](Tape& t) { return sum_all(matmul(activation(t.param(x)), t.constant(proj))); },
                 {&x}, eps, tol);
  }});

  cases.push_back({"add_scale_mean", [](std::mt19937_64& rng, double eps, double tol) {
    Variable x(random_mat(4, 3, rng), true, "x");
    Variable y(random_mat(4, 3, rng), true, "y");
    Variable bias(random_mat(1, 3, rng), true, "bias");
    return check([&](Tape& t) {
      Tensor s = scale(add(t.param(x), t.param(y)), 1.7);
      return mean_all(add_rowvec(s, t.param(bias)));
    }, {&x, &y, &bias}, eps, tol);
  }});

  cases.push_back({"softmax_cross_entropy", [](std::mt19937_64& rng, double eps, double tol) {
    Variable logits(random_mat(5, 4, rng, 2.0), true, "logits");
    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<int> labels;
    for (int i = 0; i < 5; ++i) labels.push_back(lab(rng));
    return check([&](Tape& t) { return softmax_cross_entropy(t.param(logits), labels); },
                 {&logits}, eps, tol);
  }});

  cases.push_back({"row_softmax", [](std::mt19937_64& rng, double eps, double tol) {
    Variable x(random_mat(3, 4, rng, 2.0), true, "x");
    Mat proj = random_mat(4, 2, rng);
    return check([&](Tape& t) { return sum_all(matmul(row_softmax(t.param(x)), t.constant(proj))); },
                 {&x}, eps, tol);
  }});

  cases.push_back({"layer_norm", [](std::mt19937_64& rng, double eps, double tol) {
    Variable x(random_mat(3, 6, rng), true, "x");
    Mat proj = random_mat(6, 2, rng);
    return check([&](Tape& t) {
      return sum_all(matmul(layer_norm_rows(t.param(x)), t.constant(proj)));
    }, {&x}, eps, tol);
  }});

  cases.push_back({"adapter_forward", [](std::mt19937_64& rng, double eps, double tol) {
    AdapterParams a = make_adapter(4, 2, rng(), true);
    a.w_up.value = random_mat(2, 4, rng, 0.5);
    a.b_down.value = random_mat(1, 2, rng, 0.5);
    a.b_up.value = random_mat(1, 4, rng, 0.5);
    Variable h(random_mat(3, 4, rng), true, "h");
    Mat proj = random_mat(4, 2, rng);
    std::vector<Variable*> params = a.tensors();
    params.push_back(&h);
    return check([&](Tape& t) {
      return sum_all(matmul(adapter_forward(t, a, t.param(h)), t.constant(proj)));
    }, params, eps, tol);
  }});

  cases.push_back({"gated_layer_wrt_gate", [](std::mt19937_64& rng, double eps, double tol) {
    AdapterParams a = make_adapter(4, 2, rng(), true);
    a.w_up.value = random_mat(2, 4, rng, 0.5);
    Variable gate(random_mat(1, 1, rng), true, "gate");
    Variable h(random_mat(3, 4, rng), true, "h");
    Mat proj = random_mat(4, 2, rng);
    return check([&](Tape& t) {
      Tensor out = gated_layer_forward(t, t.param(gate), t.param(h), a);
      return sum_all(matmul(out, t.constant(proj)));
    }, {&gate, &h}, eps, tol);
  }});

  cases.push_back({"gated_layer_wrt_weights", [](std::mt19937_64& rng, double eps, double tol) {
    AdapterParams a = make_adapter(4, 2, rng(), true);
    a.w_up.value = random_mat(2, 4, rng, 0.5);
    Variable gate(random_mat(1, 1, rng), true, "gate");
    Variable h(random_mat(3, 4, rng), false, "h");
    Mat proj = random_mat(4, 2, rng);
    return check([&](Tape& t) {
      Tensor out = gated_layer_forward(t, t.param(gate), t.param(h), a);
      return sum_all(matmul(out, t.constant(proj)));
    }, a.tensors(), eps, tol);
  }});

  cases.push_back({"total_loss_single_task", [](std::mt19937_64& rng, double eps, double tol) {
    ModelConfig mc;
    mc.backbone = {8, 4, 2, 3, rng()};
    mc.rank = 2;
    mc.mode = Mode::kSingleTask;
    mc.tasks = {{0, 2}};
    mc.seed = rng();
    Model model = build_model(mc);
    for (auto& a : model.adapters) a.w_up.value = random_mat(2, 4, rng, 0.3);
    model.gates.logits.value = random_mat(2, 1, rng);

    TaskBatch batch;
    batch.task_id = 0;
    batch.vocab_size = 8;
    std::uniform_int_distribution<int> tok(0, 7), lab(0, 1);
    for (int i = 0; i < 2; ++i) {
      batch.tokens.push_back({tok(rng), tok(rng), tok(rng)});
      batch.labels.push_back(lab(rng));
    }
    std::vector<Variable*> params = model.trainables(0);
    return check([&](Tape& t) {
      Tensor task_loss = softmax_cross_entropy(model.logits(t, batch), batch.labels);
      return total_loss(t, task_loss, model.gates, 0.7);
    }, params, eps, tol);
  }});

  cases.push_back({"routed_forward_wrt_gates", [](std::mt19937_64& rng, double eps, double tol) {
    const int K = 2;
    AdapterPool pool = make_pool(1, K, 4, 2, rng(), true);
    for (auto& a : pool.layers[0]) a.w_up.value = random_mat(2, 4, rng, 0.5);
    Variable gates(random_mat(1, K, rng), true, "gates");
    Variable h(random_mat(3, 4, rng), true, "h");
    Mat proj = random_mat(4, 2, rng);
    return check([&](Tape& t) {
      Tensor out = routed_forward(t, t.param(h), pool.layers[0], t.param(gates));
      return sum_all(matmul(out, t.constant(proj)));
    }, {&gates, &h}, eps, tol);
  }});

  cases.push_back({"multitask_total_loss", [](std::mt19937_64& rng, double eps, double tol) {
    ModelConfig mc;
    mc.backbone = {8, 4, 2, 3, rng()};
    mc.rank = 2;
    mc.mode = Mode::kMultiTask;
    mc.pool_size = 2;
    mc.tasks = {{0, 2}, {1, 3}};
    mc.seed = rng();
    Model model = build_model(mc);
    for (auto& layer : model.pool.layers)
      for (auto& a : layer) a.w_up.value = random_mat(2, 4, rng, 0.3);
    for (auto& [task, logits] : model.task_gates.by_task) logits.value = random_mat(2, 2, rng);

    TaskBatch batch;
    batch.task_id = 1;
    batch.vocab_size = 8;
    std::uniform_int_distribution<int> tok(0, 7), lab(0, 2);
    for (int i = 0; i < 2; ++i) {
      batch.tokens.push_back({tok(rng), tok(rng), tok(rng)});
      batch.labels.push_back(lab(rng));
    }
    std::vector<Variable*> params = model.trainables(1);
    return check([&](Tape& t) {
      Tensor task_loss = softmax_cross_entropy(model.logits(t, batch), batch.labels);
      return add(task_loss, model.penalty(t, 1, 0.7));
    }, params, eps, tol);
  }});

  std::vector<SuiteResult> results;
  for (const Case& c : cases) {
    std::mt19937_64 rng(0xc0ffee ^ std::hash<std::string>{}(c.name));
    SuiteResult res;
    res.name = c.name;
    res.passed = true;
    for (int i = 0; i < instances; ++i) {
      GradCheckReport rep = c.run(rng, eps, tol);
      if (rep.max_rel_error > res.max_rel_error) {
        res.max_rel_error = rep.max_rel_error;
        res.worst_param = rep.worst.param;
        res.worst_index = rep.worst.index;
      }
      if (!rep.passed) res.passed = false;
    }
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace slat
