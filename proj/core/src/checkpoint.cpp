#include "kgrec/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "kgrec/error.hpp"

namespace kgrec {

namespace {

constexpr std::array<char, 8> kMagic = {'K', 'G', 'R', 'E', 'C', 'K', 'P', 'T'};

template <typename UInt>
void put(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

void put_f64(std::ostream& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

template <typename UInt>
UInt get(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw DataError("checkpoint is truncated");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get<std::uint64_t>(in)); }

}  // namespace

Checkpoint make_checkpoint(const HyperParams& hp, const ParameterSet& params) {
  Checkpoint c;
  c.hp = hp;
  c.num_users = params.users.rows();
  c.num_entities = params.entities.rows();
  c.num_relations = params.relations.rows();
  c.ext_dim = params.has_projection() ? params.proj_weight.rows() : 0;
  c.params = params;
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  const auto& hp = ckpt.hp;
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, hp.aggregator == Aggregator::concat ? 1u : 0u);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(hp.neighbor_size));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(hp.layers));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(hp.dim));
  put<std::uint64_t>(out, ckpt.num_users);
  put<std::uint64_t>(out, ckpt.num_entities);
  put<std::uint64_t>(out, ckpt.num_relations);
  put<std::uint64_t>(out, ckpt.ext_dim);
  put_f64(out, hp.gamma);
  put_f64(out, hp.l2);
  put_f64(out, hp.lr);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(hp.batch_size));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(hp.epochs));
  put<std::uint64_t>(out, hp.seed);

  std::uint32_t count = 0;
  ckpt.params.for_each([&](std::string_view, const Matrix&) { ++count; });
  put<std::uint32_t>(out, count);
  ckpt.params.for_each([&](std::string_view name, const Matrix& m) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, m.rows());
    put<std::uint64_t>(out, m.cols());
    for (double v : m.values()) put_f64(out, v);
  });
  if (!out) throw DataError("failed writing checkpoint");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  save_checkpoint(ckpt, out);
}

Checkpoint load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError("not a checkpoint file");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint c;
  auto& hp = c.hp;
  hp.aggregator = get<std::uint32_t>(in) == 1 ? Aggregator::concat : Aggregator::sum;
  hp.neighbor_size = static_cast<int>(get<std::uint32_t>(in));
  hp.layers = static_cast<int>(get<std::uint32_t>(in));
  hp.dim = static_cast<int>(get<std::uint32_t>(in));
  c.num_users = get<std::uint64_t>(in);
  c.num_entities = get<std::uint64_t>(in);
  c.num_relations = get<std::uint64_t>(in);
  c.ext_dim = get<std::uint64_t>(in);
  hp.gamma = get_f64(in);
  hp.l2 = get_f64(in);
  hp.lr = get_f64(in);
  hp.batch_size = static_cast<int>(get<std::uint64_t>(in));
  hp.epochs = static_cast<int>(get<std::uint64_t>(in));
  hp.seed = get<std::uint64_t>(in);
  hp.validate();

  // Expected shapes follow from the header; tensors must match them.
  c.params = ParameterSet{};
  const auto d = static_cast<std::size_t>(hp.dim);
  const std::size_t in_dim = hp.aggregator == Aggregator::concat ? 2 * d : d;
  c.params.users = Matrix(c.num_users, d);
  c.params.entities = Matrix(c.num_entities, d);
  c.params.relations = Matrix(c.num_relations, d);
  for (int i = 0; i < hp.layers; ++i) {
    c.params.layer_weights.emplace_back(in_dim, d);
    c.params.layer_biases.emplace_back(1, d);
  }
  if (c.ext_dim) {
    c.params.proj_weight = Matrix(c.ext_dim, d);
    c.params.proj_bias = Matrix(1, d);
  }

  const auto count = get<std::uint32_t>(in);
  std::uint32_t expected = 0;
  c.params.for_each([&](std::string_view, const Matrix&) { ++expected; });
  if (count != expected) throw DataError("checkpoint tensor count does not match its header");
  c.params.for_each([&](std::string_view name, Matrix& m) {
    const auto len = get<std::uint32_t>(in);
    std::string stored(len, '\0');
    in.read(stored.data(), len);
    if (!in || stored != name) throw DataError("checkpoint tensor '" + stored + "' where '" + std::string(name) + "' expected");
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows != m.rows() || cols != m.cols()) throw DataError("checkpoint tensor " + std::string(name) + " has wrong shape");
    for (double& v : m.values()) v = get_f64(in);
  });
  return c;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  try {
    return load_checkpoint(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace kgrec
