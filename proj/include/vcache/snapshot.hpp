#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vcache/policy.hpp"
#include "vcache/semantic_cache.hpp"

namespace vcache {

class SnapshotError : public Error {
 public:
  using Error::Error;
};

// Snapshot layout (all integers little-endian):
//
//   "VSCH" | u32 version | record* 
//   record = u32 type | u32 length | payload[length] | u32 crc32(type || payload)
//
// Record types: 1 config, 2 entry, 3 global observations, 4 end. The end
// record carries next_entry_id and the entry count; a file without it is
// treated as truncated.
inline constexpr char kSnapshotMagic[4] = {'V', 'S', 'C', 'H'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

std::vector<std::uint8_t> encode_snapshot(const CacheState& state);
CacheState decode_snapshot(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary file next to `path` and renames it into place.
/// Returns the number of bytes written.
std::size_t save_snapshot(const SemanticCache& cache, const std::string& path);
std::size_t save_snapshot(const CacheState& state, const std::string& path);

CacheState read_snapshot(const std::string& path);
std::unique_ptr<SemanticCache> load_snapshot(const std::string& path, const PolicyKind& policy);

}  // namespace vcache
