#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include "causalstab/observer.hpp"

namespace causalstab
{

/// Middlebury .flo: "PIEH", int32 width, int32 height, then interleaved float32 (u, v).
FlowField read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const FlowField& flow);

/// CSV rows `frame_index,x,y,score,detector_id`. Blank lines and '#' lines are skipped,
/// as is a leading header row. Scores are normalised by their per-frame, per-detector maximum.
/// Result: frame index -> one set per detector id.
using ImportedKeypoints = std::map<int, std::vector<KeypointSet>>;
ImportedKeypoints read_keypoint_csv(const std::filesystem::path& path, int width, int height);

}  // namespace causalstab
