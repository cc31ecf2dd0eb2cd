#include "listreader/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "listreader/errors.hpp"

namespace listreader {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  if (name.empty()) throw ContractError("ParamStore::add: empty name");
  if (!t.defined()) throw ContractError("ParamStore::add: undefined tensor for '" + name + "'");
  if (params_.count(name))
    throw ContractError("ParamStore::add: parameter '" + name + "' registered twice");
  t.set_requires_grad(true);
  names_.push_back(name);
  params_.emplace(name, t);
  return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw ContractError("ParamStore::get: unknown parameter '" + name + "'");
  return it->second;
}

bool ParamStore::has(const std::string& name) const { return params_.count(name) != 0; }

std::size_t ParamStore::total_parameters() const {
  std::size_t n = 0;
  for (const auto& name : names_) n += params_.at(name).size();
  return n;
}

void ParamStore::zero_grad() {
  for (const auto& name : names_) params_.at(name).impl()->grad.assign(params_.at(name).size(), 0.0);
}

void adam_step(AdamState& state, ParamStore& store) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& name : store.names()) {
    const Tensor& p = store.get(name);
    detail::TensorNode* node = p.impl();
    if (node->grad.size() != node->data.size())
      throw ContractError("adam_step: parameter '" + name +
                          "' has no gradient; run zero_grad and backward first");
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != node->data.size()) m.assign(node->data.size(), 0.0);
    if (v.size() != node->data.size()) v.assign(node->data.size(), 0.0);
    for (std::size_t i = 0; i < node->data.size(); ++i) {
      const double g = node->grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      node->data[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
    node->grad.assign(node->data.size(), 0.0);
  }
}

// --- checkpoint serialization ---------------------------------------------

namespace {

constexpr char kMagic[4] = {'L', 'R', 'C', 'K'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double d) { write_u64(os, std::bit_cast<std::uint64_t>(d)); }

void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  for (double d : v) write_f64(os, d);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw IoError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

std::string read_string(std::istream& is) {
  std::uint64_t n = read_u64(is);
  if (n > (1ull << 32)) throw IoError("checkpoint: unreasonable string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw IoError("checkpoint: truncated file");
  return s;
}

std::vector<double> read_doubles(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = read_f64(is);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store, const AdamState* adam,
                     const std::string& meta_json) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  write_u32(os, 1);
  write_string(os, meta_json);
  write_u64(os, store.names().size());
  for (const auto& name : store.names()) {
    const Tensor& t = store.get(name);
    write_string(os, name);
    write_u64(os, t.shape().size());
    for (int d : t.shape()) write_u64(os, static_cast<std::uint64_t>(d));
    write_doubles(os, t.data());
  }
  os.put(adam ? 1 : 0);
  if (adam) {
    write_f64(os, adam->learning_rate);
    write_f64(os, adam->beta1);
    write_f64(os, adam->beta2);
    write_f64(os, adam->epsilon);
    write_u64(os, adam->step);
    for (const auto& name : store.names()) {
      const std::size_t n = store.get(name).size();
      auto mit = adam->m.find(name);
      auto vit = adam->v.find(name);
      write_doubles(os, mit != adam->m.end() ? mit->second : std::vector<double>(n, 0.0));
      write_doubles(os, vit != adam->v.end() ? vit->second : std::vector<double>(n, 0.0));
    }
  }
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("not a checkpoint file: " + path);
  CheckpointData out;
  out.version = read_u32(is);
  if (out.version != 1)
    throw ValidationError("unsupported checkpoint format version " + std::to_string(out.version));
  out.meta_json = read_string(is);
  const std::uint64_t n_params = read_u64(is);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    std::string name = read_string(is);
    const std::uint64_t rank = read_u64(is);
    if (rank == 0 || rank > 8) throw ValidationError("checkpoint: bad rank for '" + name + "'");
    std::vector<int> shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = static_cast<int>(read_u64(is));
      if (d <= 0) throw ValidationError("checkpoint: bad dimension for '" + name + "'");
      count *= static_cast<std::size_t>(d);
    }
    Tensor t = Tensor::from(shape, read_doubles(is, count));
    out.params.emplace_back(std::move(name), std::move(t));
  }
  const int has_adam = is.get();
  if (has_adam == 1) {
    out.has_adam = true;
    out.adam.learning_rate = read_f64(is);
    out.adam.beta1 = read_f64(is);
    out.adam.beta2 = read_f64(is);
    out.adam.epsilon = read_f64(is);
    out.adam.step = read_u64(is);
    for (const auto& [name, t] : out.params) {
      out.adam.m[name] = read_doubles(is, t.size());
      out.adam.v[name] = read_doubles(is, t.size());
    }
  } else if (has_adam != 0) {
    throw ValidationError("checkpoint: corrupt optimizer flag");
  }
  return out;
}

void load_checkpoint_into(const CheckpointData& ckpt, ParamStore& store, AdamState* adam_out) {
  if (ckpt.params.size() != store.names().size())
    throw ValidationError("checkpoint has " + std::to_string(ckpt.params.size()) +
                          " parameters, model expects " + std::to_string(store.names().size()));
  for (const auto& [name, t] : ckpt.params) {
    if (!store.has(name))
      throw ValidationError("checkpoint contains unknown parameter '" + name + "'");
    const Tensor& dst = store.get(name);
    if (dst.shape() != t.shape())
      throw ValidationError("checkpoint parameter '" + name + "' has shape " + t.shape_str() +
                            ", model expects " + dst.shape_str());
    dst.impl()->data = t.data();
  }
  if (adam_out) {
    if (!ckpt.has_adam) throw ValidationError("checkpoint carries no optimizer state");
    *adam_out = ckpt.adam;
  }
}

}  // namespace listreader
