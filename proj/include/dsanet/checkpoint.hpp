#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dsanet/parameters.hpp"

namespace dsanet {

inline constexpr unsigned kCheckpointVersion = 1;

// Binary container: magic "DSANETCK", u32 version, u32-length-prefixed
// key=value header text, u32 tensor count, then per tensor a
// length-prefixed name, u32 rank, i32 dims and raw little-endian doubles.
struct Checkpoint {
  unsigned version = kCheckpointVersion;
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<std::pair<std::string, Tensor>> tensors;

  std::string header_value(const std::string& key, const std::string& fallback = "") const;
};

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const std::vector<std::pair<std::string, std::string>>& header);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies tensors into matching parameters. VersionError when the parameter
// names or shapes differ from the store's.
void restore_parameters(ParameterStore& params, const Checkpoint& checkpoint);

}  // namespace dsanet
