#pragma once

#include <string>
#include <vector>

namespace edgepoint::ckpt {

// Flat keyed parameter container. Byte layout (all little-endian):
//   "EPCK"  u32 version  u32 entry_count
//   per entry: u32 name_len, name bytes, u32 rank, u32 extents[rank],
//              f32 values[product(extents)]
// Round-trips bit-exactly; entries keep their written order.

struct Entry {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

void save(const std::string& path, const std::vector<Entry>& entries);

/// Throws ArtifactError if the file does not exist, DomainError if corrupt.
std::vector<Entry> load(const std::string& path);

}  // namespace edgepoint::ckpt
