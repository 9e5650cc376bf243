#pragma once

#include <string>
#include <vector>

#include "varsplat/io/submap_io.hpp"
#include "varsplat/pipeline/config.hpp"
#include "varsplat/pipeline/metrics.hpp"

namespace varsplat {

struct TrackingLogRow {
    int frame = 0;
    int iterations = 0;
    double final_loss = 0.0;
    double inlier_fraction = 0.0;
    double mean_weight = 0.0;
    bool reinitialized = false;
};

struct KeyframeRecord {
    int frame_index = 0;
    int submap_slot = 0;   // index into RunResult::submaps
    SE3Pose local_pose;    // submap frame; world = anchor * local
};

struct RunResult {
    Trajectory trajectory;           // all frames, corrected world poses
    Trajectory keyframe_trajectory;  // keyframes only
    std::vector<Submap> submaps;     // finalized, anchors corrected
    std::vector<SubmapSidecar> sidecars;
    std::vector<KeyframeRecord> keyframes;
    Submap merged;
    AteResult ate;                   // keyframe ATE against ground truth
    RenderMetrics render_metrics;    // merged map at corrected keyframe poses
    std::vector<TrackingLogRow> tracking_log;
    std::vector<LossTrace> mapping_traces;
    std::string loop_report_json = "[]";
    size_t loop_edges = 0;
    size_t reinit_count = 0;
    double runtime_seconds = 0.0;
    std::string metrics_json = "{}";

    // Dataset retained for export and evaluation.
    std::vector<Frame> frames;
    Trajectory ground_truth;
};

// Full pipeline: tracking, seeding/mapping, submap triggering, loop
// detection, registration, pose-graph correction, merge and global
// refinement. Per-frame tracking errors recover via the constant-velocity
// prediction; only IO failures are fatal.
RunResult run_slam(const RunConfig& config);

// Writes trajectory files, metrics JSON, tracking and mapping CSVs, the loop
// report, submap binaries, and per-keyframe renders under config.output_dir.
void export_results(const RunConfig& config, const RunResult& result);

}  // namespace varsplat
