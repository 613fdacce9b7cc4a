#include "hibert/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hibert {

namespace {

constexpr char kMagic[4] = {'H', 'B', 'T', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_i64(std::ostream& out, int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_array(std::ostream& out, const ArrayX& a) {
  write_u64(out, static_cast<uint64_t>(a.size()));
  out.write(reinterpret_cast<const char*>(a.data()), a.size() * 8);
}

uint32_t read_u32(std::istream& in) {
  uint32_t v;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
int64_t read_i64(std::istream& in) {
  int64_t v;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
uint64_t read_u64(std::istream& in) {
  uint64_t v;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
double read_f64(std::istream& in) {
  double v;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

std::string read_string(std::istream& in) {
  uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

ArrayX read_array(std::istream& in) {
  uint64_t n = read_u64(in);
  ArrayX a(static_cast<Index>(n));
  in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(n * 8));
  return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const AdamState& adam,
                     const TrainerState& trainer, uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);

  const ModelConfig& c = params.config;
  write_u32(out, static_cast<uint32_t>(c.layers));
  write_u32(out, static_cast<uint32_t>(c.hidden));
  write_u32(out, static_cast<uint32_t>(c.heads));
  write_u32(out, static_cast<uint32_t>(c.ff));
  write_u32(out, static_cast<uint32_t>(c.vocab_size));
  write_f64(out, c.dropout);

  write_u64(out, seed);
  write_i64(out, trainer.step);
  write_i64(out, trainer.stage_index);
  write_i64(out, trainer.epoch);
  write_i64(out, trainer.epoch_pos);
  write_i64(out, trainer.bad_evals);
  write_f64(out, trainer.best_ppl);

  ParamMap named = params.named();
  write_u64(out, static_cast<uint64_t>(named.count()));
  for (const auto& [name, t] : named) {
    write_string(out, name);
    write_u32(out, static_cast<uint32_t>(t.rank()));
    for (Index d : t.shape()) write_i64(out, d);
    write_array(out, t.data());
  }

  write_i64(out, adam.step);
  write_u64(out, static_cast<uint64_t>(adam.m.size()));
  for (const auto& [name, m] : adam.m) {
    write_string(out, name);
    write_array(out, m);
    auto it = adam.v.find(name);
    if (it == adam.v.end()) throw std::runtime_error("save_checkpoint: missing v for " + name);
    write_array(out, it->second);
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint");
  uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.config.layers = static_cast<int>(read_u32(in));
  ckpt.config.hidden = static_cast<int>(read_u32(in));
  ckpt.config.heads = static_cast<int>(read_u32(in));
  ckpt.config.ff = static_cast<int>(read_u32(in));
  ckpt.config.vocab_size = static_cast<int>(read_u32(in));
  ckpt.config.dropout = read_f64(in);

  ckpt.seed = read_u64(in);
  ckpt.trainer.step = read_i64(in);
  ckpt.trainer.stage_index = read_i64(in);
  ckpt.trainer.epoch = read_i64(in);
  ckpt.trainer.epoch_pos = read_i64(in);
  ckpt.trainer.bad_evals = read_i64(in);
  ckpt.trainer.best_ppl = read_f64(in);

  // Zero-initialized skeleton filled in place through the named view.
  Rng dummy(0);
  ckpt.params = ModelParams::init(ckpt.config, dummy);
  ParamMap named = ckpt.params.named();
  uint64_t n_tensors = read_u64(in);
  if (n_tensors != named.count())
    throw std::runtime_error("load_checkpoint: expected " + std::to_string(named.count()) +
                             " tensors, file has " + std::to_string(n_tensors));
  for (uint64_t i = 0; i < n_tensors; ++i) {
    std::string name = read_string(in);
    uint32_t rank = read_u32(in);
    Shape shape;
    for (uint32_t d = 0; d < rank; ++d) shape.push_back(read_i64(in));
    ArrayX data = read_array(in);
    Tensor& t = named.at(name);
    if (t.shape() != shape || t.size() != data.size())
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    t.data() = data;
  }

  ckpt.adam.step = read_i64(in);
  uint64_t n_adam = read_u64(in);
  for (uint64_t i = 0; i < n_adam; ++i) {
    std::string name = read_string(in);
    ckpt.adam.m[name] = read_array(in);
    ckpt.adam.v[name] = read_array(in);
  }
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  const ModelConfig& c = ckpt.config;
  if (c.layers != expected.layers || c.hidden != expected.hidden || c.heads != expected.heads ||
      c.ff != expected.ff || c.vocab_size != expected.vocab_size)
    throw std::runtime_error("load_checkpoint: config mismatch for " + path);
  return ckpt;
}

}  // namespace hibert
