#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace slat {

// Planted-signal sequence classification task. Each class owns a disjoint
// set of signal tokens; a fraction rho of every sequence's positions carry
// tokens from the label's signal set, the rest come from the shared
// non-signal vocabulary.
struct TaskSpec {
  int task_id = 0;
  int num_classes = 2;
  std::vector<std::vector<int>> signal_tokens;  // per class, pairwise disjoint
  std::vector<int> non_signal_tokens;
  double signal_density = 0.25;
  int vocab_size = 200;
  int seq_len = 16;
  int n_train = 2000;
  int n_val = 500;
  int n_test = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TaskBatch {
  std::vector<std::vector<int>> tokens;
  std::vector<int> labels;
  int task_id = 0;
  int vocab_size = 0;

  std::size_t size() const { return tokens.size(); }
};

struct TaskData {
  TaskSpec spec;
  TaskBatch train, val, test;
};

// Deterministic given (spec, seed); sequences are unique across splits.
TaskData generate(const TaskSpec& spec);

// Independently replaces each token with probability p by a uniform draw
// from the vocabulary excluding its current value. Labels untouched.
TaskBatch inject_noise(const TaskBatch& batch, double p, std::uint64_t seed);

// Simple default spec with contiguous signal regions starting at
// `signal_offset`; used both standalone and by the multitask suite.
TaskSpec default_task_spec(int task_id, int num_classes, double signal_density,
                           int signal_offset, int signal_tokens_per_class, int shared_vocab_start,
                           int vocab_size, int seq_len, std::uint64_t seed);

// T tasks with disjoint signal regions, shared non-signal vocabulary,
// alternating 2/3 classes and varying density.
std::vector<TaskData> make_multitask_suite(int num_tasks, std::uint64_t base_seed,
                                           int vocab_size = 200, int seq_len = 16,
                                           int n_train = 2000, int n_val = 500, int n_test = 500);

// Line format: task_id<TAB>label<TAB>space-separated token ids.
void export_batch(std::ostream& os, const TaskBatch& batch);
TaskBatch import_batch(std::istream& is, int vocab_size);

// Per-class majority frequency of a label vector, the chance baseline.
double majority_fraction(const std::vector<int>& labels);

}  // namespace slat
