#pragma once

#include <cstdint>
#include <filesystem>

#include "ropepp/attention.hpp"

namespace ropepp {

// Deterministic N(0, 1/rows) weight draw. The same (seed, hidden) produces
// bit-identical w_q/w_k/w_v across layouts that share those shapes, so rope
// and ec layers built from one seed share the query projection exactly.
ProjectionSet generate_weights(const HeadLayout& layout, std::size_t hidden, std::uint64_t seed);

// Blob format: raw little-endian float64, matrices concatenated in the order
// w_q, w_k, w_v, w_o, each row-major. A JSON sidecar at <path>.json records
// the schema, shapes and byte offsets.
void save_weights(const std::filesystem::path& path, const ProjectionSet& proj,
                  const HeadLayout& layout, std::size_t hidden);

// Loads and validates against the expected layout; throws std::runtime_error
// on schema or shape mismatch.
ProjectionSet load_weights(const std::filesystem::path& path, const HeadLayout& layout,
                           std::size_t hidden);

} // namespace ropepp
