#include <doctest.h>

#include "slat/data.hpp"
#include "support/oracles.hpp"

#include <set>
#include <sstream>

using namespace slat;

namespace {
TaskSpec small_spec(std::uint64_t seed = 0) {
  TaskSpec s = default_task_spec(0, 2, 0.25, 0, 8, 16, 100, 16, seed);
  s.n_train = 2000;
  s.n_val = 500;
  s.n_test = 500;
  return s;
}
}  // namespace

TEST_CASE("spec validation") {
  TaskSpec s = small_spec();
  SUBCASE("overlapping signal sets") {
    s.signal_tokens[1][0] = s.signal_tokens[0][0];
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }
  SUBCASE("density too low for one signal position") {
    s.signal_density = 0.01;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }
  SUBCASE("non-signal overlap") {
    s.non_signal_tokens.push_back(s.signal_tokens[0][0]);
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }
}

TEST_CASE("generation determinism and disjoint splits") {
  TaskData a = generate(small_spec(7));
  TaskData b = generate(small_spec(7));
  CHECK(a.train.tokens == b.train.tokens);
  CHECK(a.val.labels == b.val.labels);
  CHECK(a.test.tokens == b.test.tokens);

  std::set<std::vector<int>> seen;
  for (const auto* split : {&a.train, &a.val, &a.test})
    for (const auto& seq : split->tokens) CHECK(seen.insert(seq).second);
}

TEST_CASE("full signal density is perfectly separable by token counting") {
  TaskSpec s = small_spec(3);
  s.signal_density = 1.0;
  s.n_train = 400;
  s.n_val = 100;
  s.n_test = 100;
  TaskData d = generate(s);
  oracle::NaiveBayes nb;
  nb.fit(d.train, s.num_classes);
  CHECK(nb.accuracy(d.test) == 1.0);
}

TEST_CASE("naive-Bayes ceiling on the default spec") {
  TaskData d = generate(small_spec(11));
  oracle::NaiveBayes nb;
  nb.fit(d.train, 2);
  CHECK(nb.accuracy(d.test) >= 0.95);
}

TEST_CASE("noise injection") {
  TaskData d = generate(small_spec(5));
  SUBCASE("p=0 is the identity") {
    TaskBatch noisy = inject_noise(d.val, 0.0, 9);
    CHECK(noisy.tokens == d.val.tokens);
  }
  SUBCASE("p=1 changes every token") {
    TaskBatch noisy = inject_noise(d.val, 1.0, 9);
    for (std::size_t i = 0; i < noisy.size(); ++i)
      for (std::size_t j = 0; j < noisy.tokens[i].size(); ++j) {
        CHECK(noisy.tokens[i][j] != d.val.tokens[i][j]);
        CHECK(noisy.tokens[i][j] >= 0);
        CHECK(noisy.tokens[i][j] < d.val.vocab_size);
      }
  }
  SUBCASE("original batch is unmodified and labels survive") {
    TaskBatch before = d.val;
    TaskBatch noisy = inject_noise(d.val, 0.7, 9);
    CHECK(d.val.tokens == before.tokens);
    CHECK(noisy.labels == d.val.labels);
  }
  SUBCASE("replacement fraction concentrates near p") {
    TaskData big = generate([] {
      TaskSpec s = small_spec(13);
      s.n_train = 2000;
      return s;
    }());
    TaskBatch noisy = inject_noise(big.train, 0.5, 21);
    long changed = 0, total = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i)
      for (std::size_t j = 0; j < noisy.tokens[i].size(); ++j, ++total)
        if (noisy.tokens[i][j] != big.train.tokens[i][j]) ++changed;
    double frac = static_cast<double>(changed) / static_cast<double>(total);
    CHECK(frac > 0.48);
    CHECK(frac < 0.52);
  }
}

TEST_CASE("oracle accuracy degrades monotonically with noise") {
  TaskData d = generate(small_spec(17));
  oracle::NaiveBayes nb;
  nb.fit(d.train, 2);
  double prev = 1.1;
  for (double p : {0.0, 0.1, 0.2, 0.3}) {
    double acc = nb.accuracy(inject_noise(d.test, p, 33));
    CHECK(acc <= prev + 0.02);
    prev = acc;
  }
}

TEST_CASE("multitask suite") {
  SUBCASE("one task reduces to a single generate call") {
    auto suite = make_multitask_suite(1, 4);
    CHECK(suite.size() == 1);
    CHECK(suite[0].spec.num_classes == 2);
    CHECK(suite[0].train.size() == 2000);
  }
  SUBCASE("signal regions are disjoint across tasks") {
    auto suite = make_multitask_suite(2, 4, 200, 16, 200, 50, 50);
    std::set<int> all;
    for (const TaskData& t : suite)
      for (const auto& cls : t.spec.signal_tokens)
        for (int tok : cls) CHECK(all.insert(tok).second);
  }
  SUBCASE("cross-task transfer is near chance") {
    auto suite = make_multitask_suite(2, 19);
    oracle::NaiveBayes nb;
    nb.fit(suite[0].train, suite[0].spec.num_classes);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < suite[1].test.size(); ++i)
      if (nb.predict(suite[1].test.tokens[i]) == suite[1].test.labels[i]) ++correct;
    double acc = static_cast<double>(correct) / static_cast<double>(suite[1].test.size());
    CHECK(acc == doctest::Approx(1.0 / 3.0).epsilon(0.3));  // within 0.1 absolute of chance
    CHECK(std::abs(acc - 1.0 / 3.0) <= 0.1);
  }
  SUBCASE("vocab too small") {
    CHECK_THROWS_AS(make_multitask_suite(4, 0, 60, 16, 10, 5, 5), std::invalid_argument);
  }
}

TEST_CASE("export/import round trip") {
  TaskSpec s = small_spec(23);
  s.n_train = 50;
  s.n_val = 10;
  s.n_test = 10;
  TaskData d = generate(s);
  std::stringstream ss;
  export_batch(ss, d.train);
  TaskBatch back = import_batch(ss, s.vocab_size);
  CHECK(back.tokens == d.train.tokens);
  CHECK(back.labels == d.train.labels);
  CHECK(back.task_id == d.train.task_id);

  std::stringstream bad("0\tnotanumber\t1 2 3\n");
  CHECK_THROWS_AS(import_batch(bad, 100), std::runtime_error);
}

TEST_CASE("majority fraction") {
  CHECK(majority_fraction({0, 0, 1}) == doctest::Approx(2.0 / 3.0));
  CHECK(majority_fraction({1, 1, 1, 1}) == 1.0);
}
