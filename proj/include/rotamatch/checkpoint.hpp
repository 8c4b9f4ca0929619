#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rotamatch/tensor.hpp"

namespace rotamatch {

// Flat binary parameter file. Layout:
//   magic "RMT1"
//   per tensor: u64 name length, UTF-8 name, u64 rank, u64 dims[rank],
//               f64 data (row-major)
// All integers and floats little-endian. Round-trips bit-exactly.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& params);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace rotamatch
