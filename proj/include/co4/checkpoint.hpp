#pragma once

#include <string>

#include "co4/block.hpp"

namespace co4 {

// Versioned binary checkpoint: 8-byte magic, little-endian u64 header
// length, JSON header listing (name, shape) per tensor, then the raw
// float64 little-endian payloads in header order.
void save_checkpoint(const ParamStore& params, const std::string& path);

// Loads values into an existing store; any name or shape mismatch is an
// error, nothing is partially applied.
void load_checkpoint(ParamStore& params, const std::string& path);

}  // namespace co4
