#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "kgrec/kgcn.hpp"

namespace kgrec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  HyperParams hp;
  std::uint64_t num_users = 0;
  std::uint64_t num_entities = 0;
  std::uint64_t num_relations = 0;
  std::uint64_t ext_dim = 0;  // 0 without a projection layer
  ParameterSet params;

  bool operator==(const Checkpoint&) const = default;
};

Checkpoint make_checkpoint(const HyperParams& hp, const ParameterSet& params);

// Binary layout, all integers and doubles little endian:
//   "KGRECKPT" u32 version
//   u32 aggregator  u32 K  u32 L  u32 d
//   u64 users  u64 entities  u64 relations  u64 ext_dim
//   f64 gamma  f64 lambda  f64 lr  u64 batch_size  u64 epochs  u64 seed
//   u32 tensor_count, then per tensor:
//     u32 name_len, name, u64 rows, u64 cols, rows*cols f64 row major
void save_checkpoint(const Checkpoint& ckpt, std::ostream& out);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kgrec
