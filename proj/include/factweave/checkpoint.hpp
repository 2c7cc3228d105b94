#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "factweave/tensor.hpp"

namespace factweave {

// Flat binary tensor container.
//
//   magic "DCKR" | version u32 | count u32
//   per tensor: name_len u32 | name bytes | rank u32 | dims u64[rank] | f64 payload
//
// All integers and doubles little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path,
                     const std::map<std::string, Tensor>& tensors);

std::map<std::string, Tensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace factweave
