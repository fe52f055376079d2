#pragma once

#include <filesystem>

#include "dirfocus/nn/layers.hpp"

namespace dirfocus::nn {

/// Writes `<stem>.f64` (every parameter and buffer, float64 little-endian, in
/// store order) and `<stem>.json` ({"entries": [{name, offset, shape,
/// trainable}], "total": n}).
void save_checkpoint(const ParameterStore& store, const std::filesystem::path& stem);

/// Loads values into a store whose names and shapes match the checkpoint.
void load_checkpoint(ParameterStore& store, const std::filesystem::path& stem);

}  // namespace dirfocus::nn
