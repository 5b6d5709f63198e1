#pragma once

#include <cstdint>
#include <string>

#include "fuselab/nn.hpp"

namespace fuselab {

/// Method tag stored in a weight file header. Local models carry `none`;
/// materialized fused models record how they were produced.
enum class FusionTag : uint8_t {
    none = 0,
    fedavg = 1,
    concat = 2,
};

/// Writes the FLW1 container (see docs/weight_format.md for the exact byte
/// layout). Round-trips are lossless: doubles are stored as raw IEEE-754
/// little-endian bits.
void save_model(const ModelWeights& model, const std::string& path,
                FusionTag tag = FusionTag::none);

/// Reads and fully validates an FLW1 file; any inconsistency (magic,
/// version, shape chain, truncation, trailing bytes, non-finite values)
/// raises FormatError.
ModelWeights load_model(const std::string& path, FusionTag* tag_out = nullptr);

} // namespace fuselab
