#include "droute/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "droute/error.hpp"

namespace droute {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ParseError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

constexpr std::uint64_t kMaxNameLength = 4096;
constexpr std::uint64_t kMaxRank = 8;

// Integer-valued architecture fields stored exactly as doubles.
nn::Tensor encode_config(const PolicyConfig& c) {
  return nn::Tensor::vector({c.problem == ProblemType::tsp ? 0.0 : 1.0, static_cast<double>(c.embed_dim),
                             static_cast<double>(c.kernel_size), static_cast<double>(c.neighbors),
                             static_cast<double>(c.layers), static_cast<double>(c.heads),
                             static_cast<double>(c.ff_dim), c.logit_clip});
}

PolicyConfig decode_config(const nn::Tensor& t) {
  if (t.shape() != nn::Shape{8}) throw ShapeError("policy.config must have shape [8]");
  PolicyConfig c;
  c.problem = t[0] == 0.0 ? ProblemType::tsp : ProblemType::cvrp;
  c.embed_dim = static_cast<std::size_t>(t[1]);
  c.kernel_size = static_cast<std::size_t>(t[2]);
  c.neighbors = static_cast<std::size_t>(t[3]);
  c.layers = static_cast<std::size_t>(t[4]);
  c.heads = static_cast<std::size_t>(t[5]);
  c.ff_dim = static_cast<std::size_t>(t[6]);
  c.logit_clip = t[7];
  return c;
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& entries) {
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  put_u64(out, entries.size());
  for (const auto& e : entries) {
    put_u64(out, e.name.size());
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_u64(out, e.value.rank());
    for (const auto d : e.value.shape()) put_u64(out, d);
  }
  for (const auto& e : entries)
    for (const double v : e.value.data()) put_f64(out, v);
  if (!out) throw Error("checkpoint write failed");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  std::string magic(kCheckpointMagic.size(), '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kCheckpointMagic) {
    throw ParseError("not a checkpoint (bad magic)");
  }
  const std::uint64_t count = get_u64(in);
  std::vector<NamedTensor> entries;
  std::vector<nn::Shape> shapes;
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t len = get_u64(in);
    if (len > kMaxNameLength) throw ParseError("checkpoint entry name too long");
    std::string name(len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(len))) throw ParseError("checkpoint truncated");
    const std::uint64_t rank = get_u64(in);
    if (rank > kMaxRank) throw ParseError("checkpoint tensor rank too large");
    nn::Shape shape(rank);
    for (auto& d : shape) d = get_u64(in);
    entries.push_back({std::move(name), {}});
    shapes.push_back(std::move(shape));
  }
  for (std::size_t k = 0; k < entries.size(); ++k) {
    std::vector<double> data(nn::shape_size(shapes[k]));
    for (auto& v : data) v = get_f64(in);
    entries[k].value = nn::Tensor(shapes[k], std::move(data));
  }
  return entries;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + tmp.string());
    write_checkpoint(out, entries);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

const NamedTensor* find_entry(const std::vector<NamedTensor>& entries, std::string_view name) noexcept {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::vector<NamedTensor> policy_entries(const PolicyParams& params) {
  std::vector<NamedTensor> out;
  out.push_back({"policy.config", encode_config(params.config())});
  for (std::size_t i = 0; i < params.tensors().size(); ++i) {
    out.push_back({params.names()[i], params.tensors()[i]});
  }
  return out;
}

PolicyParams policy_from_entries(const std::vector<NamedTensor>& entries) {
  const NamedTensor* cfg = find_entry(entries, "policy.config");
  if (cfg == nullptr) throw ShapeError("checkpoint has no policy.config entry");
  PolicyParams params = PolicyParams::zeros(decode_config(cfg->value));
  for (std::size_t i = 0; i < params.tensors().size(); ++i) {
    const NamedTensor* e = find_entry(entries, params.names()[i]);
    if (e == nullptr) throw ShapeError("checkpoint is missing tensor " + params.names()[i]);
    if (e->value.shape() != params.tensors()[i].shape()) {
      throw ShapeError("checkpoint tensor " + e->name + " has shape " + nn::shape_string(e->value.shape()) +
                       ", expected " + nn::shape_string(params.tensors()[i].shape()));
    }
    params.tensors()[i] = e->value;
  }
  return params;
}

void save_policy(const std::filesystem::path& path, const PolicyParams& params) {
  save_checkpoint(path, policy_entries(params));
}

PolicyParams load_policy(const std::filesystem::path& path) { return policy_from_entries(load_checkpoint(path)); }

}  // namespace droute
