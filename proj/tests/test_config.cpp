#include <doctest.h>

#include "slat/config.hpp"
#include "slat/results.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace slat;

TEST_CASE("config serialization round trip") {
  ExperimentConfig c;
  c.model_dim = 64;
  c.lambda = 0.3333333333333333;
  c.lr = 7.25e-4;
  c.seeds = {3, 17, 41};
  c.mode = "multitask";
  c.num_tasks = 2;
  c.adapter_bias = false;

  ExperimentConfig back = parse_config(c.serialize());
  CHECK(back.serialize() == c.serialize());
  CHECK(back.model_dim == 64);
  CHECK(back.lambda == c.lambda);
  CHECK(back.lr == c.lr);
  CHECK(back.seeds == c.seeds);
  CHECK(back.adapter_bias == false);
  CHECK(back.hash() == c.hash());
}

TEST_CASE("default config serializes every field explicitly") {
  ExperimentConfig c;
  std::string text = c.serialize();
  for (const char* key : {"vocab_size", "model_dim", "num_layers", "seq_len", "rank", "mode",
                          "pool_size", "num_tasks", "lambda", "noise_p", "tau", "seeds", "epochs",
                          "batch_size", "lr", "gate_lr", "n_train", "n_val", "n_test",
                          "adapter_bias", "single_insertion_layer", "hard_retrain", "eval_noise",
                          "max_grad_norm"})
    CHECK_MESSAGE(text.find(std::string(key) + "=") != std::string::npos, key, " missing");
}

TEST_CASE("parser rejects bad input") {
  CHECK_THROWS_AS(parse_config("no_such_key=3\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("model_dim=notanumber\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("model_dim\n"), std::invalid_argument);
}

TEST_CASE("parser tolerates comments, blank lines, and partial overrides") {
  ExperimentConfig c = parse_config("# comment line\n\nmodel_dim=48\nlambda=2.5\n");
  CHECK(c.model_dim == 48);
  CHECK(c.lambda == 2.5);
  CHECK(c.vocab_size == 200);  // untouched default
}

TEST_CASE("config validation") {
  ExperimentConfig c;
  SUBCASE("single task mode with several tasks") {
    c.num_tasks = 3;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
  SUBCASE("unknown mode string") {
    c.mode = "dual_task";
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
  SUBCASE("tau outside the open unit interval") {
    c.tau = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
  SUBCASE("empty seed list") {
    c.seeds.clear();
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
  SUBCASE("negative lambda") {
    c.lambda = -0.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
  SUBCASE("defaults pass") { CHECK_NOTHROW(c.validate()); }
}

TEST_CASE("hash changes with content") {
  ExperimentConfig a, b;
  b.lambda = 0.75;
  CHECK(a.hash() != b.hash());
  CHECK(a.hash() == ExperimentConfig{}.hash());
}

TEST_CASE("result records") {
  std::vector<ResultRecord> records{
      {"abc", 0, "lambda=0", "val_acc_t0", 0.9, 123},
      {"abc", 1, "lambda=0", "val_acc_t0", 0.7, 124},
      {"abc", 2, "lambda=0", "val_acc_t0", 0.8, 125},
      {"abc", 0, "lambda=5", "val_acc_t0", 0.6, 126},
  };

  SUBCASE("stream round trip") {
    std::stringstream ss;
    write_records(ss, records);
    namespace fs = std::filesystem;
    fs::path path = fs::temp_directory_path() / "slat_results_test.tsv";
    {
      std::ofstream out(path);
      out << ss.str();
    }
    std::vector<ResultRecord> back = read_records_file(path.string());
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].config_hash == records[i].config_hash);
      CHECK(back[i].seed == records[i].seed);
      CHECK(back[i].coordinate == records[i].coordinate);
      CHECK(back[i].metric == records[i].metric);
      CHECK(back[i].value == records[i].value);
      CHECK(back[i].unix_millis == records[i].unix_millis);
    }
    std::remove(path.string().c_str());
  }

  SUBCASE("append accumulates instead of overwriting") {
    namespace fs = std::filesystem;
    fs::path path = fs::temp_directory_path() / "slat_results_append.tsv";
    std::remove(path.string().c_str());
    append_records_file(path.string(), {records[0]});
    append_records_file(path.string(), {records[1], records[2]});
    CHECK(read_records_file(path.string()).size() == 3);
    std::remove(path.string().c_str());
  }

  SUBCASE("aggregation keys by coordinate and metric") {
    auto agg = aggregate_records(records);
    REQUIRE(agg.count({"lambda=0", "val_acc_t0"}) == 1);
    const Aggregate& a = agg.at({"lambda=0", "val_acc_t0"});
    CHECK(a.count == 3);
    CHECK(a.mean == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(a.median == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(a.min == 0.7);
    CHECK(a.max == 0.9);
    CHECK(agg.at({"lambda=5", "val_acc_t0"}).count == 1);
  }

  SUBCASE("aggregation is idempotent over re-reads") {
    std::stringstream ss;
    write_records(ss, records);
    namespace fs = std::filesystem;
    fs::path path = fs::temp_directory_path() / "slat_results_idem.tsv";
    {
      std::ofstream out(path);
      out << ss.str();
    }
    auto a = aggregate_records(read_records_file(path.string()));
    auto b = aggregate_records(read_records_file(path.string()));
    CHECK(a.size() == b.size());
    for (const auto& [key, agg_a] : a) {
      CHECK(agg_a.mean == b.at(key).mean);
      CHECK(agg_a.count == b.at(key).count);
    }
    std::remove(path.string().c_str());
  }

  SUBCASE("malformed line is an error") {
    namespace fs = std::filesystem;
    fs::path path = fs::temp_directory_path() / "slat_results_bad.tsv";
    {
      std::ofstream out(path);
      out << "abc\t0\tonly_three_fields\n";
    }
    CHECK_THROWS_AS(read_records_file(path.string()), std::runtime_error);
    std::remove(path.string().c_str());
  }
}
