#pragma once

#include <vector>

#include "varsplat/core/types.hpp"
#include "varsplat/loop/descriptor.hpp"

namespace varsplat {

struct LoopCandidate {
    int query_submap = -1;
    int db_submap = -1;
    double raw_sim = 0.0;
    double rescored_sim = 0.0;  // raw_sim * r_q * r_db
    double overlap_ratio = 0.0;
    double r_q = 1.0, r_db = 1.0;
    bool accepted = false;
};

// Everything loop detection needs to know about a finalized submap.
struct LoopEntry {
    const Submap* submap = nullptr;
    SubmapDescriptor descriptor;
    std::vector<SE3Pose> keyframe_poses;   // world, front-end estimates
    std::vector<double> keyframe_depths;   // median valid depth per keyframe
    CameraIntrinsics intrinsics;
};

struct LoopDetectConfig {
    double percentile = 50.0;      // self-similarity rank
    double tau = 10.0;
    double overlap_threshold = 0.3;
    bool use_uncertainty = true;   // r == 1 when disabled
};

// Fraction of db keyframe view centers (camera center pushed to the median
// depth along the optical axis) that project inside any query keyframe
// frustum at the front-end poses.
double frustum_overlap(const LoopEntry& query, const LoopEntry& db);

// Candidates pass when rescored cross-similarity reaches the query's
// self-similarity threshold and the frustum overlap gate; sorted by
// rescored similarity, descending. Rejected pairs are returned too (with
// accepted = false) so reports can show them.
std::vector<LoopCandidate> detect_loops(const LoopEntry& query,
                                        const std::vector<LoopEntry>& database,
                                        const LoopDetectConfig& cfg);

}  // namespace varsplat
