#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace recdiff {

// Versioned model file: magic line, JSON header (architecture, seed, schedule
// parameters, arch hash), then the flat float32 parameter array.
void write_checkpoint(const std::string& path, const nlohmann::json& header,
                      std::span<const float> params);

std::pair<nlohmann::json, std::vector<float>> read_checkpoint(const std::string& path);

// canonical architecture hash loaders compare before accepting parameters
uint64_t arch_hash(const nlohmann::json& architecture);

}  // namespace recdiff
