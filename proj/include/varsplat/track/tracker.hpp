#pragma once

#include <vector>

#include "varsplat/render/rasterizer.hpp"

namespace varsplat {

struct TrackingConfig {
    double lambda_c = 0.6;            // photometric vs geometric balance
    double lr_rot = 0.002;
    double lr_trans = 0.01;
    int iter_t = 60;
    double tau = 10.0;
    double inlier_factor = 50.0;      // x median depth error
    double loss_spike_factor = 50.0;  // x running average
    bool use_uncertainty = true;      // w_p == 1 when disabled
};

struct TrackResult {
    SE3Pose pose;          // world <- camera
    double final_loss = 0.0;
    int iterations_run = 0;
    double inlier_fraction = 0.0;
    double mean_weight = 0.0;
    bool reinitialized = false;
};

// True where observed depth is valid and the rendered-vs-observed depth
// error is within inlier_factor x the median error; empty observed depth
// yields an all-false mask.
ImageD inlier_mask(const ImageD& rendered_depth, const ImageF& observed_depth,
                   double inlier_factor);

// Soft alpha mask alpha^3.
ImageD alpha_mask(const ImageD& alpha);

// Pose-only optimization of the frame against an immutable submap snapshot.
// Per iteration the view is re-rendered; masks and uncertainty weights are
// recomputed and detached; appearance variance receives no gradient. If the
// final loss exceeds loss_spike_factor x running_avg_loss (when positive),
// restarts once from the constant-velocity prediction over `history`.
// Throws EmptyOverlap when no valid pixel survives masking.
TrackResult track_frame(const Submap& submap, const Frame& frame, const SE3Pose& init_pose,
                        const TrackingConfig& cfg, const std::vector<SE3Pose>& history,
                        double running_avg_loss = -1.0, const RenderOptions& opts = {});

// Constant-velocity prediction: T_{k-1} * (T_{k-2}^-1 * T_{k-1}); the last
// pose when history is shorter.
SE3Pose predict_pose(const std::vector<SE3Pose>& history);

}  // namespace varsplat
