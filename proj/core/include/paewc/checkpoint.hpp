#pragma once

#include <string>

#include "paewc/fisher.hpp"
#include "paewc/model.hpp"

namespace paewc {

// Checkpoint container: one UTF-8 JSON header line
//   {"version":1,"kind":...,"blocks":[{"name","shape","group","offset"},...]}
// terminated by '\n', followed by the little-endian IEEE-754 values of every
// block concatenated in header order. Offsets are byte positions relative to
// the start of the payload. Round-trips are bitwise exact.

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const ParamStore& params, const std::string& path);

// Load errors are distinct: VersionError for a wrong version, TruncationError
// for a short payload, FormatError for a malformed header or a block/shape
// mismatch, ShapeError when the file disagrees with `expect`'s layout.
ParamStore load_checkpoint(const std::string& path, const ModelConfig& cfg);

// Same container for per-task Fisher snapshots (adaptive Fisher arrays plus
// anchors, group map, weights and scalar factors in the header).
void save_snapshot(const FisherSnapshot& snap, const std::string& path);
FisherSnapshot load_snapshot(const std::string& path);

// FNV-1a digest of a file's bytes, used by run manifests.
std::uint64_t file_digest(const std::string& path);

}  // namespace paewc
