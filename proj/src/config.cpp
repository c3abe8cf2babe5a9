#include "slat/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace slat {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: field '" + key + "' expects a number, got '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    int i = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: field '" + key + "' expects an integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("config: field '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<std::uint64_t> parse_seeds(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("config: field '" + key + "' expects comma-separated integers");
    }
  }
  if (out.empty()) throw std::invalid_argument("config: field '" + key + "' must be nonempty");
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (mode != "single_task" && mode != "multitask")
    throw std::invalid_argument("config: mode must be single_task or multitask");
  if (num_tasks < 1) throw std::invalid_argument("config: num_tasks must be >= 1");
  if (mode == "single_task" && num_tasks != 1)
    throw std::invalid_argument("config: single_task mode requires num_tasks=1");
  if (lambda < 0.0) throw std::invalid_argument("config: lambda must be >= 0");
  if (!(noise_p >= 0.0 && noise_p <= 1.0))
    throw std::invalid_argument("config: noise_p must lie in [0,1]");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("config: tau must lie in (0,1)");
  if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (lr <= 0.0 || gate_lr <= 0.0) throw std::invalid_argument("config: learning rates must be > 0");
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::invalid_argument("config: split sizes must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("config: at least one seed required");
  if (vocab_size < 4) throw std::invalid_argument("config: vocab_size must be >= 4");
  if (model_dim < 4 || model_dim % 2 != 0)
    throw std::invalid_argument("config: model_dim must be >= 4 and even");
  if (num_layers < 1) throw std::invalid_argument("config: num_layers must be >= 1");
  if (seq_len < 2) throw std::invalid_argument("config: seq_len must be >= 2");
  if (rank < 1 || 2 * rank > model_dim)
    throw std::invalid_argument("config: rank must satisfy 1 <= r <= model_dim/2");
  if (pool_size < 1) throw std::invalid_argument("config: pool_size must be >= 1");
  if (max_grad_norm < 0.0) throw std::invalid_argument("config: max_grad_norm must be >= 0");
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os << "vocab_size=" << vocab_size << '\n';
  os << "model_dim=" << model_dim << '\n';
  os << "num_layers=" << num_layers << '\n';
  os << "seq_len=" << seq_len << '\n';
  os << "rank=" << rank << '\n';
  os << "mode=" << mode << '\n';
  os << "pool_size=" << pool_size << '\n';
  os << "num_tasks=" << num_tasks << '\n';
  os << "lambda=" << fmt_double(lambda) << '\n';
  os << "noise_p=" << fmt_double(noise_p) << '\n';
  os << "tau=" << fmt_double(tau) << '\n';
  os << "seeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
  os << '\n';
  os << "epochs=" << epochs << '\n';
  os << "batch_size=" << batch_size << '\n';
  os << "lr=" << fmt_double(lr) << '\n';
  os << "gate_lr=" << fmt_double(gate_lr) << '\n';
  os << "n_train=" << n_train << '\n';
  os << "n_val=" << n_val << '\n';
  os << "n_test=" << n_test << '\n';
  os << "adapter_bias=" << fmt_bool(adapter_bias) << '\n';
  os << "single_insertion_layer=" << fmt_bool(single_insertion_layer) << '\n';
  os << "hard_retrain=" << fmt_bool(hard_retrain) << '\n';
  os << "eval_noise=" << fmt_bool(eval_noise) << '\n';
  os << "max_grad_norm=" << fmt_double(max_grad_norm) << '\n';
  return os.str();
}

std::string ExperimentConfig::hash() const {
  std::string s = serialize();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) + " is not key=value");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);

    if (key == "vocab_size") c.vocab_size = parse_int(key, val);
    else if (key == "model_dim") c.model_dim = parse_int(key, val);
    else if (key == "num_layers") c.num_layers = parse_int(key, val);
    else if (key == "seq_len") c.seq_len = parse_int(key, val);
    else if (key == "rank") c.rank = parse_int(key, val);
    else if (key == "mode") c.mode = val;
    else if (key == "pool_size") c.pool_size = parse_int(key, val);
    else if (key == "num_tasks") c.num_tasks = parse_int(key, val);
    else if (key == "lambda") c.lambda = parse_double(key, val);
    else if (key == "noise_p") c.noise_p = parse_double(key, val);
    else if (key == "tau") c.tau = parse_double(key, val);
    else if (key == "seeds") c.seeds = parse_seeds(key, val);
    else if (key == "epochs") c.epochs = parse_int(key, val);
    else if (key == "batch_size") c.batch_size = parse_int(key, val);
    else if (key == "lr") c.lr = parse_double(key, val);
    else if (key == "gate_lr") c.gate_lr = parse_double(key, val);
    else if (key == "n_train") c.n_train = parse_int(key, val);
    else if (key == "n_val") c.n_val = parse_int(key, val);
    else if (key == "n_test") c.n_test = parse_int(key, val);
    else if (key == "adapter_bias") c.adapter_bias = parse_bool(key, val);
    else if (key == "single_insertion_layer") c.single_insertion_layer = parse_bool(key, val);
    else if (key == "hard_retrain") c.hard_retrain = parse_bool(key, val);
    else if (key == "eval_noise") c.eval_noise = parse_bool(key, val);
    else if (key == "max_grad_norm") c.max_grad_norm = parse_double(key, val);
    else
      throw std::invalid_argument("config: unknown key '" + key + "' at line " +
                                  std::to_string(line_no));
  }
  c.validate();
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config: cannot open file " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

}  // namespace slat
