#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace slat {

using Mat = Eigen::MatrixXd;

// A named parameter that persists across tapes. Gradients accumulate into
// `grad` during backward(); frozen variables keep requires_grad = false and
// are never touched by the optimizer.
struct Variable {
  Mat value;
  Mat grad;
  bool requires_grad = true;
  std::string name;

  Variable() = default;
  Variable(Mat v, bool rg, std::string n)
      : value(std::move(v)),
        grad(Mat::Zero(value.rows(), value.cols())),
        requires_grad(rg),
        name(std::move(n)) {}

  void zero_grad() { grad.setZero(); }
  long size() const { return value.size(); }
};

class Tape;

// Lightweight handle to a node on a tape.
struct Tensor {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  long rows() const { return value().rows(); }
  long cols() const { return value().cols(); }
};

// Define-by-run record of one forward computation. Node order is topological
// by construction; backward() walks it in reverse. A tape is single-threaded
// and freed (or reset) after each backward pass.
class Tape {
 public:
  struct Node {
    Mat value;
    Mat grad;  // allocated lazily at backward() time
    std::function<void(Tape&)> backward;
    Variable* source = nullptr;
  };

  Tensor constant(const Mat& v);
  Tensor param(Variable& v);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node and,
  // for param leaves with requires_grad, into Variable::grad. The loss must
  // be a 1x1 tensor.
  void backward(Tensor loss);

  void reset() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  Tensor emplace(Mat value, std::function<void(Tape&)> backward);

 private:
  std::vector<Node> nodes_;
};

inline const Mat& Tensor::value() const { return tape->node(id).value; }

// --- ops ------------------------------------------------------------------

Tensor matmul(Tensor a, Tensor b);      // A * B
Tensor matmul_nt(Tensor a, Tensor b);   // A * B^T
Tensor add(Tensor a, Tensor b);         // same-shape elementwise
Tensor add_rowvec(Tensor a, Tensor b);  // (n x d) + (1 x d), broadcast over rows
Tensor scale(Tensor a, double c);
Tensor affine(Tensor a, double k, double b);  // k*x + b elementwise
Tensor scale_by(Tensor a, Tensor s);          // matrix times 1x1 scalar tensor
Tensor sigmoid(Tensor a);
Tensor activation(Tensor a);  // GELU, tanh approximation
Tensor row_softmax(Tensor a);
Tensor layer_norm_rows(Tensor a, double eps = 1e-5);
Tensor mean_rows(Tensor a);  // (S x d) -> (1 x d)
Tensor sum_all(Tensor a);    // -> 1x1
Tensor mean_all(Tensor a);   // -> 1x1
Tensor index_entry(Tensor a, long i, long j);  // -> 1x1
Tensor slice_row(Tensor a, long i);            // -> 1 x cols
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor embed_rows(Tensor table, const std::vector<int>& ids);

// Mean negative log-likelihood over rows of `logits` (n x C).
Tensor softmax_cross_entropy(Tensor logits, const std::vector<int>& labels);

// Scalar helpers used by gate math and GELU, shared with oracle code paths.
double sigmoid_scalar(double x);
double gelu_scalar(double x);

// --- gradient checking ----------------------------------------------------

struct GradCheckEntry {
  std::string param;
  long index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool passed = false;
  GradCheckEntry worst;
  long checked = 0;
};

// Central finite differences against the analytic gradient of a
// deterministic scalar-valued build function. Frozen variables are skipped.
// Relative error is |g - g_fd| / max(1, |g|, |g_fd|).
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& build_fn,
                           const std::vector<Variable*>& params,
                           double epsilon = 1e-4, double tolerance = 1e-4);

}  // namespace slat
