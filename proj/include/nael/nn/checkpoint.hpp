#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nael/nn/layers.hpp"
#include "nael/nn/tensor.hpp"

namespace nael::nn {

// Checkpoint layout (little-endian):
//   "NAELCK1\0", u32 version, u32 tensor count,
//   per tensor: u16 name length, UTF-8 name, u8 rank, u32 dims[rank],
//               float32 data[prod(dims)].
inline constexpr char kCheckpointMagic[8] = {'N', 'A', 'E', 'L', 'C', 'K', '1', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const Registry& registry);
// Every registry entry must be present with a matching shape.
void load_checkpoint(const std::string& path, Registry& registry);
void load_tensors(const std::vector<NamedTensor>& tensors, Registry& registry);
std::vector<NamedTensor> snapshot(const Registry& registry);

// Rounds every registered tensor to float32 so in-memory weights equal what
// a checkpoint round trip yields.
void round_to_storage_precision(Registry& registry);

}  // namespace nael::nn
