#pragma once

#include <random>
#include <vector>

#include "varsplat/map/adam.hpp"
#include "varsplat/render/rasterizer.hpp"

namespace varsplat {

struct MappingConfig {
    double lambda_color = 1.0;
    double lambda_depth = 1.0;
    double lambda_reg = 1.0;
    double lambda_var = 1e-4;
    double lambda_ssim = 0.2;
    int iter_m = 100;
    int seed_budget = 30000;                 // M_k
    double alpha_thre = 0.98;
    double depth_discrepancy_factor = 40.0;
    double prune_opacity = 0.5;
    double new_opacity = 0.5;
    double sigma2_init = 1e-2;               // per-channel appearance variance at seed time
    SplatLearningRates rates;
};

struct SubmapTrigger {
    double d_thre = 0.5;                      // meters
    double theta_thre_deg = 50.0;
    int fixed_interval = 0;                   // 0 disables the fixed-interval mode
};

// A keyframe with its current world pose estimate.
struct KeyframeView {
    const Frame* frame = nullptr;
    SE3Pose pose;  // world <- camera
    int id = 0;
};

struct LossTraceRow {
    int iteration;
    double l_color, l_depth, l_reg, l_var;
};
using LossTrace = std::vector<LossTraceRow>;

// Backprojects new splats where the current submap leaves the frame
// uncovered (rendered alpha below alpha_thre) or disagrees with observed
// depth (error beyond depth_discrepancy_factor x median). Samples up to
// seed_budget candidates uniformly. Returns the number of splats added.
// Throws NoValidDepth when the frame has no valid depth at all.
size_t seed_from_frame(const Frame& frame, const SE3Pose& pose, Submap& submap,
                       const MappingConfig& cfg, std::mt19937& rng,
                       const RenderOptions& opts = {});

// Joint optimization of all splat parameters (including appearance variance)
// against the associated keyframes, poses held fixed; iter_m steps cycling
// over keyframes.
LossTrace optimize_submap(Submap& submap, const std::vector<KeyframeView>& keyframes,
                          const MappingConfig& cfg, SplatAdam& adam,
                          const RenderOptions& opts = {});

// Removes exactly the splats with activated opacity below the threshold.
void prune(Submap& submap, double prune_opacity);

bool should_start_submap(const SE3Pose& current, const SE3Pose& anchor,
                         int frames_since_creation, const SubmapTrigger& trigger);

// Transforms submaps into the world frame by their (corrected) anchors,
// concatenates, prunes, then refines with the color loss only; appearance
// variance is carried through untouched.
Submap global_refine(const std::vector<Submap>& submaps,
                     const std::vector<SE3Pose>& corrected_anchors,
                     const std::vector<KeyframeView>& keyframes, int iterations,
                     const MappingConfig& cfg, const RenderOptions& opts = {});

// Largest splat distance from the submap centroid; floor of 1 m. Scales the
// mean learning rate.
double scene_extent(const Submap& submap);

}  // namespace varsplat
