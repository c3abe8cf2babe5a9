#include "slat/data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace slat {

void TaskSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("task spec: num_classes must be >= 2");
  if (static_cast<int>(signal_tokens.size()) != num_classes)
    throw std::invalid_argument("task spec: one signal set per class required");
  if (!(signal_density > 0.0 && signal_density <= 1.0))
    throw std::invalid_argument("task spec: signal density must lie in (0,1]");
  if (signal_density * seq_len < 1.0)
    throw std::invalid_argument("task spec: rho * seq_len must be >= 1");
  std::set<int> seen;
  for (const auto& cls : signal_tokens) {
    if (cls.empty()) throw std::invalid_argument("task spec: empty signal set");
    for (int tok : cls) {
      if (tok < 0 || tok >= vocab_size)
        throw std::invalid_argument("task spec: signal token out of vocab");
      if (!seen.insert(tok).second)
        throw std::invalid_argument("task spec: signal sets overlap at token " + std::to_string(tok));
    }
  }
  if (non_signal_tokens.empty())
    throw std::invalid_argument("task spec: non-signal vocabulary is empty");
  for (int tok : non_signal_tokens) {
    if (tok < 0 || tok >= vocab_size)
      throw std::invalid_argument("task spec: non-signal token out of vocab");
    if (seen.count(tok))
      throw std::invalid_argument("task spec: non-signal token overlaps a signal set");
  }
}

TaskData generate(const TaskSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> label_dist(0, spec.num_classes - 1);
  std::uniform_int_distribution<std::size_t> nonsig_dist(0, spec.non_signal_tokens.size() - 1);
  const int n_signal = static_cast<int>(std::ceil(spec.signal_density * spec.seq_len));

  std::set<std::vector<int>> seen;
  auto draw_example = [&](std::vector<int>& tokens, int& label) {
    for (;;) {
      label = label_dist(rng);
      const auto& sig = spec.signal_tokens[static_cast<std::size_t>(label)];
      std::uniform_int_distribution<std::size_t> sig_dist(0, sig.size() - 1);
      // choose signal positions without replacement
      std::vector<int> pos(static_cast<std::size_t>(spec.seq_len));
      for (int i = 0; i < spec.seq_len; ++i) pos[static_cast<std::size_t>(i)] = i;
      for (int i = 0; i < n_signal; ++i) {
        std::uniform_int_distribution<int> d(i, spec.seq_len - 1);
        std::swap(pos[static_cast<std::size_t>(i)], pos[static_cast<std::size_t>(d(rng))]);
      }
      std::vector<bool> is_signal(static_cast<std::size_t>(spec.seq_len), false);
      for (int i = 0; i < n_signal; ++i) is_signal[static_cast<std::size_t>(pos[static_cast<std::size_t>(i)])] = true;

      tokens.assign(static_cast<std::size_t>(spec.seq_len), 0);
      for (int i = 0; i < spec.seq_len; ++i) {
        if (is_signal[static_cast<std::size_t>(i)])
          tokens[static_cast<std::size_t>(i)] = sig[sig_dist(rng)];
        else
          tokens[static_cast<std::size_t>(i)] = spec.non_signal_tokens[nonsig_dist(rng)];
      }
      if (seen.insert(tokens).second) return;  // splits stay disjoint
    }
  };

  TaskData data;
  data.spec = spec;
  auto fill = [&](TaskBatch& batch, int n) {
    batch.task_id = spec.task_id;
    batch.vocab_size = spec.vocab_size;
    batch.tokens.resize(static_cast<std::size_t>(n));
    batch.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      draw_example(batch.tokens[static_cast<std::size_t>(i)], batch.labels[static_cast<std::size_t>(i)]);
  };
  fill(data.train, spec.n_train);
  fill(data.val, spec.n_val);
  fill(data.test, spec.n_test);
  return data;
}

TaskBatch inject_noise(const TaskBatch& batch, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("inject_noise: p must lie in [0,1]");
  TaskBatch out = batch;
  if (p == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> repl(0, batch.vocab_size - 2);
  for (auto& seq : out.tokens)
    for (int& tok : seq)
      if (coin(rng) < p) {
        int r = repl(rng);
        tok = (r >= tok) ? r + 1 : r;  // uniform over vocab minus the current value
      }
  return out;
}

TaskSpec default_task_spec(int task_id, int num_classes, double signal_density,
                           int signal_offset, int signal_tokens_per_class, int shared_vocab_start,
                           int vocab_size, int seq_len, std::uint64_t seed) {
  TaskSpec spec;
  spec.task_id = task_id;
  spec.num_classes = num_classes;
  spec.signal_density = signal_density;
  spec.vocab_size = vocab_size;
  spec.seq_len = seq_len;
  spec.seed = seed;
  int next = signal_offset;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> cls;
    for (int i = 0; i < signal_tokens_per_class; ++i) cls.push_back(next++);
    spec.signal_tokens.push_back(std::move(cls));
  }
  if (next > shared_vocab_start || shared_vocab_start >= vocab_size)
    throw std::invalid_argument("task spec: vocab too small for disjoint signal regions");
  for (int tok = shared_vocab_start; tok < vocab_size; ++tok) spec.non_signal_tokens.push_back(tok);
  return spec;
}

std::vector<TaskData> make_multitask_suite(int num_tasks, std::uint64_t base_seed,
                                           int vocab_size, int seq_len, int n_train, int n_val,
                                           int n_test) {
  if (num_tasks < 1) throw std::invalid_argument("suite: need at least one task");
  const int per_class = 8;
  // reserve signal regions first so the shared region starts after all of them
  int offset = 0;
  std::vector<int> classes, offsets;
  for (int t = 0; t < num_tasks; ++t) {
    int c = (t % 2 == 0) ? 2 : 3;
    classes.push_back(c);
    offsets.push_back(offset);
    offset += c * per_class;
  }
  if (offset >= vocab_size)
    throw std::invalid_argument("suite: vocab too small for " + std::to_string(num_tasks) +
                                " disjoint signal regions");
  std::vector<TaskData> out;
  for (int t = 0; t < num_tasks; ++t) {
    double rho = (t % 2 == 0) ? 0.25 : 0.3125;
    TaskSpec spec = default_task_spec(t, classes[static_cast<std::size_t>(t)], rho,
                                      offsets[static_cast<std::size_t>(t)], per_class, offset,
                                      vocab_size, seq_len, base_seed + 1000ull * static_cast<std::uint64_t>(t));
    spec.n_train = n_train;
    spec.n_val = n_val;
    spec.n_test = n_test;
    out.push_back(generate(spec));
  }
  return out;
}

void export_batch(std::ostream& os, const TaskBatch& batch) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    os << batch.task_id << '\t' << batch.labels[i] << '\t';
    const auto& seq = batch.tokens[i];
    for (std::size_t j = 0; j < seq.size(); ++j) {
      if (j) os << ' ';
      os << seq[j];
    }
    os << '\n';
  }
}

TaskBatch import_batch(std::istream& is, int vocab_size) {
  TaskBatch batch;
  batch.vocab_size = vocab_size;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int task_id = 0, label = 0;
    if (!(ls >> task_id >> label))
      throw std::runtime_error("import: malformed record at line " + std::to_string(line_no));
    std::vector<int> seq;
    int tok;
    while (ls >> tok) {
      if (tok < 0 || tok >= vocab_size)
        throw std::runtime_error("import: token out of vocab at line " + std::to_string(line_no));
      seq.push_back(tok);
    }
    if (seq.empty())
      throw std::runtime_error("import: empty sequence at line " + std::to_string(line_no));
    batch.task_id = task_id;
    batch.labels.push_back(label);
    batch.tokens.push_back(std::move(seq));
  }
  return batch;
}

double majority_fraction(const std::vector<int>& labels) {
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  int best = 0;
  for (const auto& [label, n] : counts) best = std::max(best, n);
  return labels.empty() ? 0.0 : static_cast<double>(best) / static_cast<double>(labels.size());
}

}  // namespace slat
