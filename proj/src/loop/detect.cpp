#include "varsplat/loop/detect.hpp"

#include <algorithm>

#include "varsplat/uncertainty/weights.hpp"

namespace varsplat {

namespace {

bool point_in_frustum(const Vec3& world_point, const SE3Pose& view,
                      const CameraIntrinsics& intr) {
    const Vec3 cam = pose_inverse(view).apply(world_point);
    if (cam.z() < 0.05) return false;
    const double u = intr.fx * cam.x() / cam.z() + intr.cx;
    const double v = intr.fy * cam.y() / cam.z() + intr.cy;
    return u >= 0.0 && u < intr.width && v >= 0.0 && v < intr.height;
}

}  // namespace

double frustum_overlap(const LoopEntry& query, const LoopEntry& db) {
    if (db.keyframe_poses.empty() || query.keyframe_poses.empty()) return 0.0;
    size_t inside = 0;
    for (size_t i = 0; i < db.keyframe_poses.size(); ++i) {
        const double depth = db.keyframe_depths.empty() ? 1.5 : db.keyframe_depths[i];
        const Vec3 center = db.keyframe_poses[i].apply(Vec3(0.0, 0.0, depth));
        for (const SE3Pose& qpose : query.keyframe_poses) {
            if (point_in_frustum(center, qpose, query.intrinsics)) {
                ++inside;
                break;
            }
        }
    }
    return static_cast<double>(inside) / static_cast<double>(db.keyframe_poses.size());
}

std::vector<LoopCandidate> detect_loops(const LoopEntry& query,
                                        const std::vector<LoopEntry>& database,
                                        const LoopDetectConfig& cfg) {
    const double threshold = self_similarity(query.descriptor, cfg.percentile);
    const double r_q = cfg.use_uncertainty ? reliability_ratio(*query.submap, cfg.tau) : 1.0;

    std::vector<LoopCandidate> out;
    for (const LoopEntry& db : database) {
        LoopCandidate cand;
        cand.query_submap = query.submap->id;
        cand.db_submap = db.submap->id;
        cand.raw_sim = cross_similarity(query.descriptor, db.descriptor);
        cand.r_q = r_q;
        cand.r_db = cfg.use_uncertainty ? reliability_ratio(*db.submap, cfg.tau) : 1.0;
        cand.rescored_sim = cand.raw_sim * cand.r_q * cand.r_db;
        cand.overlap_ratio = frustum_overlap(query, db);
        cand.accepted =
            cand.rescored_sim >= threshold && cand.overlap_ratio >= cfg.overlap_threshold;
        out.push_back(cand);
    }
    std::sort(out.begin(), out.end(), [](const LoopCandidate& a, const LoopCandidate& b) {
        return a.rescored_sim > b.rescored_sim;
    });
    return out;
}

}  // namespace varsplat
