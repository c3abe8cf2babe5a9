#include "slat/tape.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace slat {

namespace {

std::string shape_str(const Mat& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

Mat& grad_of(Tape& t, int id) { return t.node(id).grad; }

}  // namespace

Tensor Tape::emplace(Mat value, std::function<void(Tape&)> backward) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Tensor{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor Tape::constant(const Mat& v) { return emplace(v, nullptr); }

Tensor Tape::param(Variable& v) {
  Tensor t = emplace(v.value, nullptr);
  nodes_.back().source = &v;
  return t;
}

void Tape::backward(Tensor loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss belongs to a different tape");
  const Node& ln = node(loss.id);
  if (ln.value.rows() != 1 || ln.value.cols() != 1)
    throw std::invalid_argument("backward: loss must be a 1x1 scalar, got " + shape_str(ln.value));
  for (Node& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  node(loss.id).grad(0, 0) = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = node(i);
    if (n.backward) n.backward(*this);
    if (n.source && n.source->requires_grad) n.source->grad += n.grad;
  }
}

// --- ops ------------------------------------------------------------------

Tensor matmul(Tensor a, Tensor b) {
  const Mat& A = a.value();
  const Mat& B = b.value();
  if (A.cols() != B.rows())
    throw std::invalid_argument("matmul: inner dimensions differ, " + shape_str(A) + " * " + shape_str(B));
  Tensor out = a.tape->emplace(A * B, nullptr);
  int ai = a.id, bi = b.id, oi = out.id;
  a.tape->node(oi).backward = [ai, bi, oi](Tape& t) {
    const Mat& g = t.node(oi).grad;
    grad_of(t, ai).noalias() += g * t.node(bi).value.transpose();
    grad_of(t, bi).noalias() += t.node(ai).value.transpose() * g;
  };
  return out;
}

Tensor matmul_nt(Tensor a, Tensor b) {
  const Mat& A = a.value();
  const Mat& B = b.value();
  if (A.cols() != B.cols())
    throw std::invalid_argument("matmul_nt: inner dimensions differ, " + shape_str(A) + " * " + shape_str(B) + "^T");
  Tensor out = a.tape->emplace(A * B.transpose(), nullptr);
  int ai = a.id, bi = b.id, oi = out.id;
  a.tape->node(oi).backward = [ai, bi, oi](Tape& t) {
    const Mat& g = t.node(oi).grad;
    grad_of(t, ai).noalias() += g * t.node(bi).value;
    grad_of(t, bi).noalias() += g.transpose() * t.node(ai).value;
  };
  return out;
}

Tensor add(Tensor a, Tensor b) {
  const Mat& A = a.value();
  const Mat& B = b.value();
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw std::invalid_argument("add: shape mismatch, " + shape_str(A) + " vs " + shape_str(B));
  Tensor out = a.tape->emplace(A + B, nullptr);
  int ai = a.id, bi = b.id, oi = out.id;
  a.tape->node(oi).backward = [ai, bi, oi](Tape& t) {
    grad_of(t, ai) += t.node(oi).grad;
    grad_of(t, bi) += t.node(oi).grad;
  };
  return out;
}

Tensor add_rowvec(Tensor a, Tensor b) {
  const Mat& A = a.value();
  const Mat& B = b.value();
  if (B.rows() != 1 || A.cols() != B.cols())
    throw std::invalid_argument("add_rowvec: expected (n x d) + (1 x d), got " + shape_str(A) + " + " + shape_str(B));
  Tensor out = a.tape->emplace(A.rowwise() + B.row(0), nullptr);
  int ai = a.id, bi = b.id, oi = out.id;
  a.tape->node(oi).backward = [ai, bi, oi](Tape& t) {
    const Mat& g = t.node(oi).grad;
    grad_of(t, ai) += g;
    grad_of(t, bi).row(0) += g.colwise().sum();
  };
  return out;
}

Tensor scale(Tensor a, double c) { return affine(a, c, 0.0); }

Tensor affine(Tensor a, double k, double b) {
  Tensor out = a.tape->emplace((a.value().array() * k + b).matrix(), nullptr);
  int ai = a.id, oi = out.id;
  a.tape->node(oi).backward = [ai, oi, k](Tape& t) { grad_of(t, ai) += k * t.node(oi).grad; };
  return out;
}

Tensor scale_by(Tensor a, Tensor s) {
  const Mat& S = s.value();
  if (S.rows() != 1 || S.cols() != 1)
    throw std::invalid_argument("scale_by: scale must be 1x1, got " + shape_str(S));
  Tensor out = a.tape->emplace(a.value() * S(0, 0), nullptr);
  int ai = a.id, si = s.id, oi = out.id;
  a.tape->node(oi).backward = [ai, si, oi](Tape& t) {
    const Mat& g = t.node(oi).grad;
    grad_of(t, ai) += g * t.node(si).value(0, 0);
    grad_of(t, si)(0, 0) += g.cwiseProduct(t.node(ai).value).sum();
  };
  return out;
}

double sigmoid_scalar(double x) {
  double v;
  if (x >= 0.0) {
    v = 1.0 / (1.0 + std::exp(-x));
  } else {
    double e = std::exp(x);
    v = e / (1.0 + e);
  }
  // keep the open-interval contract even where rounding saturates
  if (v >= 1.0) v = std::nextafter(1.0, 0.0);
  if (v <= 0.0) v = std::numeric_limits<double>::min();
  return v;
}

Tensor sigmoid(Tensor a) {
  Mat y = a.value().unaryExpr([](double x) { return sigmoid_scalar(x); });
  Tensor out = a.tape->emplace(std::move(y), nullptr);
  int ai = a.id, oi = out.id;
  a.tape->node(oi).backward = [ai, oi](Tape& t) {
    const Mat& y = t.node(oi).value;
    grad_of(t, ai).array() += t.node(oi).grad.array() * y.array() * (1.0 - y.array());
  };
  return out;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu_scalar(double x) {
  double u = kGeluC * (x + kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

Tensor activation(Tensor a) {
  Mat y = a.value().unaryExpr([](double x) { return gelu_scalar(x); });
  Tensor out = a.tape->emplace(std::move(y), nullptr);
  int ai = a.id, oi = out.id;
  a.tape->node(oi).backward = [ai, oi](Tape& t) {
    const Mat& x = t.node(ai).value;
    Mat d = x.unaryExpr([](double v) {
      double u = kGeluC * (v + kGeluA * v * v * v);
      double th = std::tanh(u);
      double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
    });
    grad_of(t, ai).array() += t.node(oi).grad.array() * d.array();
  };
  return out;
}

Tensor row_softmax(Tensor a) {
  const Mat& X = a.value();
  Mat y(X.rows(), X.cols());
  for (long i = 0; i < X.rows(); ++i) {
    double m = X.row(i).maxCoeff();
    Eigen::ArrayXd e = (X.row(i).array() - m).exp();
    y.row(i) = (e / e.sum()).matrix();
  }
  Tensor out = a.tape->emplace(std::move(y), nullptr);
  int ai = a.id, oi = out.id;
  a.tape->node(oi).backward = [ai, oi](Tape& t) {
    const Mat& y = t.node(oi).value;
    const Mat& g = t.node(oi).grad;
    Mat& ga = grad_of(t, ai);
    for (long i = 0; i < y.rows(); ++i) {
      double dot = g.row(i).dot(y.row(i));
      ga.row(i).array() += y.row(i).array() * (g.row(i).array() - dot);
    }
  };
  return out;
}

Tensor layer_norm_rows(Tensor a, double eps) {
  const Mat& X = a.value();
  long d = X.cols();
  Mat y(X.rows(), d);
  Eigen::VectorXd inv_std(X.rows());
  for (long i = 0; i < X.rows(); ++i) {
    double mu = X.row(i).mean();
    double var = (X.row(i).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_std(i) = is;
    y.row(i) = ((X.row(i).array() - mu) * is).matrix();
  }
  Tensor out = a.tape->emplace(std::move(y), nullptr);
  int ai = a.id, oi = out.id;
  a.tape->node(oi).backward = [ai, oi, d, inv_std](Tape& t) {
    const Mat& y = t.node(oi).value;
    const Mat& g = t.node(oi).grad;
    Mat& ga = grad_of(t, ai);
    for (long i = 0; i < y.rows(); ++i) {
      double mg = g.row(i).mean();
      double myg = (g.row(i).array() * y.row(i).array()).mean();
      ga.row(i).array() += inv_std(i) * (g.row(i).array() - mg - y.row(i).array() * myg);
    }
    (void)d;
  };
  return out;
}

Tensor mean_rows(Tensor a) {
  const Mat& X = a.value();
  Mat y = X.colwise().mean();
  Tensor out = a.tape->emplace(std::move(y), nullptr);
  int ai = a.id, oi = out.id;
  long n = X.rows();
  a.tape->node(oi).backward = [ai, oi, n](Tape& t) {
    const Mat& g = t.node(oi).grad;
    grad_of(t, ai).rowwise() += (g.row(0) / static_cast<double>(n)).eval();
  };
  return out;
}

Tensor sum_all(Tensor a) {
  Mat y(1, 1);
  y(0, 0) = a.value().sum();
  Tensor out = a.tape->emplace(std::move(y), nullptr);
  int ai = a.id, oi = out.id;
  a.tape->node(oi).backward = [ai, oi](Tape& t) {
    grad_of(t, ai).array() += t.node(oi).grad(0, 0);
  };
  return out;
}

Tensor mean_all(Tensor a) {
  double n = static_cast<double>(a.value().size());
  return scale(sum_all(a), 1.0 / n);
}

Tensor index_entry(Tensor a, long i, long j) {
  const Mat& X = a.value();
  if (i < 0 || i >= X.rows() || j < 0 || j >= X.cols())
    throw std::invalid_argument("index_entry: (" + std::to_string(i) + "," + std::to_string(j) +
                                ") out of range for " + shape_str(X));
  Mat y(1, 1);
  y(0, 0) = X(i, j);
  Tensor out = a.tape->emplace(std::move(y), nullptr);
  int ai = a.id, oi = out.id;
  a.tape->node(oi).backward = [ai, oi, i, j](Tape& t) {
    grad_of(t, ai)(i, j) += t.node(oi).grad(0, 0);
  };
  return out;
}

Tensor slice_row(Tensor a, long i) {
  const Mat& X = a.value();
  if (i < 0 || i >= X.rows())
    throw std::invalid_argument("slice_row: row " + std::to_string(i) + " out of range for " + shape_str(X));
  Tensor out = a.tape->emplace(X.row(i), nullptr);
  int ai = a.id, oi = out.id;
  a.tape->node(oi).backward = [ai, oi, i](Tape& t) {
    grad_of(t, ai).row(i) += t.node(oi).grad.row(0);
  };
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
  long cols = parts[0].value().cols();
  long rows = 0;
  for (const Tensor& p : parts) {
    if (p.value().cols() != cols)
      throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.value().rows();
  }
  Mat y(rows, cols);
  std::vector<int> ids;
  std::vector<long> offsets;
  long off = 0;
  for (const Tensor& p : parts) {
    y.middleRows(off, p.value().rows()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(off);
    off += p.value().rows();
  }
  Tensor out = parts[0].tape->emplace(std::move(y), nullptr);
  int oi = out.id;
  parts[0].tape->node(oi).backward = [ids, offsets, oi](Tape& t) {
    const Mat& g = t.node(oi).grad;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Mat& gk = grad_of(t, ids[k]);
      gk += g.middleRows(offsets[k], gk.rows());
    }
  };
  return out;
}

Tensor embed_rows(Tensor table, const std::vector<int>& ids) {
  const Mat& E = table.value();
  Mat y(static_cast<long>(ids.size()), E.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= E.rows())
      throw std::invalid_argument("embed_rows: token id " + std::to_string(ids[i]) +
                                  " out of range for vocab " + std::to_string(E.rows()));
    y.row(static_cast<long>(i)) = E.row(ids[i]);
  }
  Tensor out = table.tape->emplace(std::move(y), nullptr);
  int ti = table.id, oi = out.id;
  table.tape->node(oi).backward = [ti, oi, ids](Tape& t) {
    const Mat& g = t.node(oi).grad;
    Mat& gt = grad_of(t, ti);
    for (std::size_t i = 0; i < ids.size(); ++i) gt.row(ids[i]) += g.row(static_cast<long>(i));
  };
  return out;
}

Tensor softmax_cross_entropy(Tensor logits, const std::vector<int>& labels) {
  const Mat& X = logits.value();
  if (static_cast<long>(labels.size()) != X.rows())
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(X.rows()) + " rows");
  long C = X.cols();
  Mat probs(X.rows(), C);
  double loss = 0.0;
  for (long i = 0; i < X.rows(); ++i) {
    int lab = labels[static_cast<std::size_t>(i)];
    if (lab < 0 || lab >= C)
      throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(lab) +
                                  " out of range [0," + std::to_string(C) + ")");
    double m = X.row(i).maxCoeff();
    Eigen::ArrayXd e = (X.row(i).array() - m).exp();
    double z = e.sum();
    probs.row(i) = (e / z).matrix();
    loss += m + std::log(z) - X(i, lab);
  }
  double n = static_cast<double>(X.rows());
  Mat y(1, 1);
  y(0, 0) = loss / n;
  Tensor out = logits.tape->emplace(std::move(y), nullptr);
  int li = logits.id, oi = out.id;
  logits.tape->node(oi).backward = [li, oi, probs, labels, n](Tape& t) {
    double g = t.node(oi).grad(0, 0);
    Mat d = probs;
    for (long i = 0; i < d.rows(); ++i) d(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    grad_of(t, li) += (g / n) * d;
  };
  return out;
}

// --- gradient checking ----------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& build_fn,
                           const std::vector<Variable*>& params,
                           double epsilon, double tolerance) {
  if (epsilon <= 0.0) throw std::invalid_argument("grad_check: epsilon must be positive");

  auto eval = [&](void) -> double {
    Tape t;
    Tensor loss = build_fn(t);
    const Mat& v = loss.value();
    if (v.rows() != 1 || v.cols() != 1)
      throw std::invalid_argument("grad_check: build_fn must produce a scalar loss");
    return v(0, 0);
  };

  double l0 = eval();
  double l1 = eval();
  if (l0 != l1)
    throw std::runtime_error("grad_check: build_fn is not deterministic (forward values differ)");

  for (Variable* p : params) p->zero_grad();
  {
    Tape t;
    Tensor loss = build_fn(t);
    t.backward(loss);
  }

  GradCheckReport report;
  for (Variable* p : params) {
    if (!p->requires_grad) continue;
    for (long i = 0; i < p->value.size(); ++i) {
      double saved = p->value.data()[i];
      p->value.data()[i] = saved + epsilon;
      double lp = eval();
      p->value.data()[i] = saved - epsilon;
      double lm = eval();
      p->value.data()[i] = saved;
      double fd = (lp - lm) / (2.0 * epsilon);
      double an = p->grad.data()[i];
      double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = GradCheckEntry{p->name, i, an, fd, rel};
      }
    }
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace slat
