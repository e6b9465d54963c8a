#pragma once

#include <filesystem>
#include <vector>

#include "maskwave/nn.hpp"

namespace maskwave::nn {

// NNP1 container: "NNP1", u32 parameter count, then per parameter
// {u32 name length, name bytes, u32 rank, u32 dims..., f32 values...},
// all little-endian.
void save_params(const std::filesystem::path& path,
                 const std::vector<Param>& params);

// Loads values into the given parameters, matched by name. Every stored
// parameter must exist with the same shape and vice versa.
void load_params(const std::filesystem::path& path,
                 std::vector<Param>& params);

}  // namespace maskwave::nn
