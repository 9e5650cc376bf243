#pragma once

#include <string>
#include <vector>

#include "varsplat/core/types.hpp"

namespace varsplat {

// Binary container: magic "VSPL", version u32, splat count u64, then per
// splat 17 little-endian f32 in declaration order (mean, rotation wxyz,
// log_scale, opacity_logit, color, log_variance). A JSON sidecar at
// <base>.json carries the anchor pose, keyframe ids, and keyframe poses.
inline constexpr uint32_t kSubmapFormatVersion = 1;

struct SubmapSidecar {
    std::vector<SE3Pose> keyframe_poses;  // parallel to submap.keyframe_ids
};

void save_submap(const std::string& base_path, const Submap& submap,
                 const SubmapSidecar& sidecar = {});

// Loads <base>.vspl + <base>.json; reg targets are rebuilt from the stored
// scales. Sidecar output is optional.
Submap load_submap(const std::string& base_path, SubmapSidecar* sidecar = nullptr);

}  // namespace varsplat
