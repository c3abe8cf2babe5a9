#include "slat/model.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace slat {

void ModelConfig::validate() const {
  backbone.validate();
  if (rank < 1 || 2 * rank > backbone.model_dim)
    throw std::invalid_argument("model: rank must satisfy 1 <= r <= d/2");
  if (mode == Mode::kMultiTask && pool_size < 1)
    throw std::invalid_argument("model: pool size K must be >= 1");
  if (tasks.empty()) throw std::invalid_argument("model: at least one task required");
  for (const auto& [id, classes] : tasks)
    if (classes < 2) throw std::invalid_argument("model: each task needs >= 2 classes");
}

int Model::insertion_rows() const {
  return (config.mode == Mode::kMultiTask && config.single_insertion_layer)
             ? 1
             : config.backbone.num_layers;
}

Model build_model(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config = config;
  m.backbone = build_backbone(config.backbone);

  const int d = config.backbone.model_dim;
  const int L = config.backbone.num_layers;
  std::mt19937_64 rng(config.seed + 0x5eedull);

  if (config.mode == Mode::kSingleTask) {
    for (int l = 0; l < L; ++l)
      m.adapters.push_back(make_adapter(d, config.rank, rng(), config.adapter_bias,
                                        "adapter.l" + std::to_string(l)));
    m.gates = make_gates(L);
  } else {
    const int rows = (config.single_insertion_layer) ? 1 : L;
    m.pool = make_pool(rows, config.pool_size, d, config.rank, rng(), config.adapter_bias);
    std::vector<int> ids;
    for (const auto& [id, classes] : config.tasks) ids.push_back(id);
    m.task_gates = make_task_gates(ids, rows, config.pool_size);
  }

  for (const auto& [id, classes] : config.tasks) {
    Mat w(d, classes);
    fill_gaussian(w, 0.02, rng);
    m.heads.emplace(id, Head{Variable(std::move(w), true, "head.t" + std::to_string(id) + ".w"),
                             Variable(Mat::Zero(1, classes), true,
                                      "head.t" + std::to_string(id) + ".b")});
  }
  return m;
}

Tensor Model::logits(Tape& tape, const TaskBatch& batch, GateOverride ov) {
  auto head_it = heads.find(batch.task_id);
  if (head_it == heads.end())
    throw std::invalid_argument("model: unknown task id " + std::to_string(batch.task_id));

  const int L = config.backbone.num_layers;
  AdapterHook hook;

  if (config.mode == Mode::kSingleTask) {
    if (hard_active) {
      const std::set<int>& active = *hard_active;
      hook = [this, &active](Tape& t, int l, Tensor h) -> Tensor {
        if (!active.count(l)) return h;
        return adapter_forward(t, adapters[static_cast<std::size_t>(l)], h);
      };
    } else if (ov == GateOverride::kAllOff) {
      hook = nullptr;
    } else if (ov == GateOverride::kAllOn) {
      hook = [this](Tape& t, int l, Tensor h) -> Tensor {
        return adapter_forward(t, adapters[static_cast<std::size_t>(l)], h);
      };
    } else {
      hook = [this](Tape& t, int l, Tensor h) -> Tensor {
        Tensor gate = index_entry(t.param(gates.logits), l, 0);
        return gated_layer_forward(t, gate, h, adapters[static_cast<std::size_t>(l)]);
      };
    }
  } else {
    const int last = L - 1;
    const int task = batch.task_id;
    Variable& tg = task_gates.require(task);
    hook = [this, ov, last, task, &tg](Tape& t, int l, Tensor h) -> Tensor {
      int row = config.single_insertion_layer ? 0 : l;
      if (config.single_insertion_layer && l != last) return h;
      auto& pool_layer = pool.layers[static_cast<std::size_t>(row)];
      if (hard_routes) {
        const auto& route = hard_routes->at(task);
        Tensor out = h;
        for (int k : route[static_cast<std::size_t>(row)])
          out = add(out, adapter_delta(t, pool_layer[static_cast<std::size_t>(k)], h));
        return out;
      }
      if (ov == GateOverride::kAllOff) return h;
      if (ov == GateOverride::kAllOn) {
        Tensor out = h;
        for (auto& a : pool_layer) out = add(out, adapter_delta(t, a, h));
        return out;
      }
      Tensor row_logits = slice_row(t.param(tg), row);
      return routed_forward(t, h, pool_layer, row_logits);
    };
  }

  Tensor pooled = backbone.encode(tape, batch.tokens, hook);
  Head& head = head_it->second;
  return add_rowvec(matmul(pooled, tape.param(head.w)), tape.param(head.b));
}

Tensor Model::penalty(Tape& tape, int task_id, double lambda) {
  if (config.mode == Mode::kSingleTask) return sparsity_penalty(tape, gates, lambda);
  return multitask_penalty(tape, task_gates.require(task_id), lambda);
}

std::vector<Variable*> Model::trainables(int task_id) {
  std::vector<Variable*> out;
  if (config.mode == Mode::kSingleTask) {
    if (hard_active) {
      for (int l : *hard_active)
        for (Variable* v : adapters[static_cast<std::size_t>(l)].tensors()) out.push_back(v);
    } else {
      for (auto& a : adapters)
        for (Variable* v : a.tensors()) out.push_back(v);
      out.push_back(&gates.logits);
    }
  } else {
    if (hard_routes) {
      const auto& route = hard_routes->at(task_id);
      std::set<Variable*> uniq;
      for (std::size_t row = 0; row < route.size(); ++row)
        for (int k : route[row])
          for (Variable* v : pool.layers[row][static_cast<std::size_t>(k)].tensors()) uniq.insert(v);
      out.assign(uniq.begin(), uniq.end());
    } else {
      for (Variable* v : pool.tensors()) out.push_back(v);
      out.push_back(&task_gates.require(task_id));
    }
  }
  Head& head = heads.at(task_id);
  out.push_back(&head.w);
  out.push_back(&head.b);
  return out;
}

std::vector<Variable*> Model::all_trainables() {
  std::vector<Variable*> out;
  std::set<Variable*> seen;
  for (const auto& [id, classes] : config.tasks)
    for (Variable* v : trainables(id))
      if (seen.insert(v).second) out.push_back(v);
  return out;
}

std::vector<const Variable*> Model::frozen_tensors() const { return backbone.all_tensors(); }

std::uint64_t Model::frozen_checksum() const { return bytes_checksum(frozen_tensors()); }

void Model::discretize_structure(double tau) {
  if (config.mode == Mode::kSingleTask) {
    hard_active = discretize(gates, tau);
  } else {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("discretize: tau must lie in (0,1)");
    std::map<int, std::vector<std::set<int>>> routes;
    for (auto& [task, logits] : task_gates.by_task) {
      std::vector<std::set<int>> per_layer;
      for (long l = 0; l < logits.value.rows(); ++l) {
        std::set<int> active;
        for (long k = 0; k < logits.value.cols(); ++k)
          if (sigmoid_scalar(logits.value(l, k)) >= tau) active.insert(static_cast<int>(k));
        per_layer.push_back(std::move(active));
      }
      routes.emplace(task, std::move(per_layer));
    }
    hard_routes = std::move(routes);
  }
}

double Model::mean_gate_activation() const {
  double sum = 0.0;
  long n = 0;
  if (config.mode == Mode::kSingleTask) {
    for (long l = 0; l < gates.logits.value.rows(); ++l, ++n)
      sum += sigmoid_scalar(gates.logits.value(l, 0));
  } else {
    for (const auto& [task, logits] : task_gates.by_task)
      for (long i = 0; i < logits.value.size(); ++i, ++n)
        sum += sigmoid_scalar(logits.value.data()[i]);
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

long Model::active_adapter_count(double tau) const {
  long count = 0;
  if (config.mode == Mode::kSingleTask) {
    count = static_cast<long>(discretize(gates, tau).size());
  } else {
    for (const auto& [task, logits] : task_gates.by_task)
      for (long i = 0; i < logits.value.size(); ++i)
        if (sigmoid_scalar(logits.value.data()[i]) >= tau) ++count;
  }
  return count;
}

long Model::trainable_param_count() const {
  long n = 0;
  auto count_adapter = [](const AdapterParams& a) { return a.param_count(); };
  if (config.mode == Mode::kSingleTask) {
    if (hard_active) {
      for (int l : *hard_active) n += count_adapter(adapters[static_cast<std::size_t>(l)]);
    } else {
      for (const auto& a : adapters) n += count_adapter(a);
      n += gates.logits.size();
    }
  } else {
    if (hard_routes) {
      std::set<const Variable*> uniq;
      for (const auto& [task, route] : *hard_routes)
        for (std::size_t row = 0; row < route.size(); ++row)
          for (int k : route[row])
            for (const Variable* v : pool.layers[row][static_cast<std::size_t>(k)].tensors())
              uniq.insert(v);
      for (const Variable* v : uniq) n += v->size();
    } else {
      for (const auto& layer : pool.layers)
        for (const auto& a : layer) n += count_adapter(a);
      for (const auto& [task, logits] : task_gates.by_task) n += logits.size();
    }
  }
  for (const auto& [id, head] : heads) n += head.w.size() + head.b.size();
  return n;
}

long Model::total_param_count() const {
  long frozen = 0;
  for (const Variable* v : frozen_tensors()) frozen += v->size();
  return frozen + trainable_param_count();
}

std::vector<std::pair<std::string, Variable*>> Model::named_tensors() {
  std::vector<std::pair<std::string, Variable*>> out;
  for (Variable* v : backbone.all_tensors()) out.emplace_back("backbone." + v->name, v);
  if (config.mode == Mode::kSingleTask) {
    for (auto& a : adapters)
      for (Variable* v : a.tensors()) out.emplace_back(v->name, v);
    out.emplace_back("gates", &gates.logits);
  } else {
    for (Variable* v : pool.tensors()) out.emplace_back(v->name, v);
    for (auto& [task, logits] : task_gates.by_task) out.emplace_back(logits.name, &logits);
  }
  for (auto& [id, head] : heads) {
    out.emplace_back(head.w.name, &head.w);
    out.emplace_back(head.b.name, &head.b);
  }
  return out;
}

// --- checkpoint -----------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'S', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
}  // namespace

void Model::save_checkpoint(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  auto tensors = named_tensors();
  write_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (auto& [name, v] : tensors) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(v->value.rows()));
    write_u32(os, static_cast<std::uint32_t>(v->value.cols()));
    os.put(static_cast<char>(v->requires_grad ? 1 : 0));
    os.put(0);  // dtype tag: f64
    os.write(reinterpret_cast<const char*>(v->value.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v->value.size())));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

void Model::load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::uint32_t version = read_u32(is);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  std::uint32_t count = read_u32(is);

  std::map<std::string, Variable*> by_name;
  for (auto& [name, v] : named_tensors()) by_name.emplace(name, v);

  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    std::uint32_t rows = read_u32(is);
    std::uint32_t cols = read_u32(is);
    char rg = 0, dtype = 0;
    is.get(rg);
    is.get(dtype);
    if (dtype != 0) throw std::runtime_error("checkpoint: unsupported dtype tag");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: unknown tensor " + name);
    Variable* v = it->second;
    if (v->value.rows() != static_cast<long>(rows) || v->value.cols() != static_cast<long>(cols))
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    is.read(reinterpret_cast<char*>(v->value.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v->value.size())));
    v->requires_grad = (rg != 0);
    v->zero_grad();
  }
  if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
}

}  // namespace slat
