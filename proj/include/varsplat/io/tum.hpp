#pragma once

#include <string>
#include <vector>

#include "varsplat/core/types.hpp"
#include "varsplat/io/trajectory.hpp"

namespace varsplat {

inline constexpr double kTumDepthScale = 1.0 / 5000.0;
inline constexpr double kTumMaxAssocDt = 0.02;  // seconds

struct TumDataset {
    std::vector<Frame> frames;
    Trajectory ground_truth;   // empty when groundtruth.txt is absent
    size_t dropped_frames = 0; // rgb entries without a depth match
};

// Reads rgb.txt / depth.txt (and groundtruth.txt when present) from `dir`,
// associates color to depth by nearest timestamp within kTumMaxAssocDt, and
// loads up to max_frames associated pairs. `downscale` is an integer
// subsampling factor applied to images and intrinsics.
TumDataset load_tum_dataset(const std::string& dir, const CameraIntrinsics& intrinsics,
                            int max_frames, int downscale = 1);

}  // namespace varsplat
