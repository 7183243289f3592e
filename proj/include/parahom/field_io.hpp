#pragma once

#include "parahom/grid.hpp"

#include <string>

namespace parahom {

/// Writes `path` (little-endian header: magic "PHFIELD1", dim, N[3], lo[3], h[3],
/// t0, dt, steps, stored levels, then f64 cell values and boundary values) and a
/// JSON sidecar `path + ".json"` with the grid, levels and field metadata.
/// Throws std::runtime_error on I/O failure.
void write_field(const ScalarField& u, const std::string& path);

/// Reads a field written by write_field (metadata from the sidecar when present).
/// Throws std::runtime_error on I/O failure or a malformed file.
ScalarField read_field(const std::string& path);

}  // namespace parahom
