#pragma once

#include <string>

#include "gram/params.hpp"

namespace gram {

// Flat binary map: parameter name -> shape + little-endian f64 values.
// Layout: magic "GRAMCKP1", u64 count, then per parameter
// u32 name_len, name bytes, u32 rank, u64 dims..., f64 data...
void save_checkpoint(const ParamRegistry& reg, const std::string& path);

// Loads into an existing registry; every name and shape must match.
void load_checkpoint(ParamRegistry& reg, const std::string& path);

}  // namespace gram
