#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "varsplat/core/image.hpp"
#include "varsplat/core/parallel.hpp"
#include "varsplat/render/compositing.hpp"
#include "varsplat/render/projection.hpp"

namespace varsplat {

struct Submap;

struct RenderOptions {
    int threads = default_thread_count();
    bool retain_contributors = false;
    int max_contributors_per_pixel = 256;
    int tile_size = 16;
    // Per-pixel support cutoff in sigmas: contributions beyond this
    // Mahalanobis distance are dropped. Gradient checks widen it so the
    // cutoff's value step sits below finite-difference resolution.
    double footprint_sigma = kFootprintSigma;
};

// Per-pixel contributor records, fixed capacity per pixel. Entries index into
// RasterContext::projected (front-to-back order).
struct ContributorBuffer {
    int cap = 0;
    std::vector<uint32_t> entries;
    std::vector<float> weights;
    std::vector<uint16_t> counts;

    void resize(size_t pixels, int capacity) {
        cap = capacity;
        entries.assign(pixels * capacity, 0);
        weights.assign(pixels * capacity, 0.f);
        counts.assign(pixels, 0);
    }
};

struct RasterContext {
    std::vector<Projected2D> projected;  // sorted by (z_cam, splat_index)
    SE3Pose view;                        // pose the splats were rendered from
    CameraIntrinsics intr;
    ContributorBuffer contributors;
    size_t overflow_pixels = 0;          // contributions past the per-pixel cap
};

struct RenderOutput {
    ImageD color;     // H x W x 3
    ImageD depth;     // H x W, unnormalized sum of w_i * z_i
    ImageD alpha;     // H x W
    ImageD variance;  // H x W x 3
    std::shared_ptr<RasterContext> ctx;  // set when contributors were retained
};

// Depth-sorted alpha compositing of a splat set into color, depth, alpha and
// per-pixel uncertainty. `view` is the camera pose in the same frame as the
// splat means. A contribution is composited iff its Mahalanobis distance is
// within kFootprintSigma; pixels are sampled at integer coordinates.
// Deterministic for any thread count. Throws DegenerateProjection if a
// splat's 2D covariance is non-invertible after the low-pass floor.
RenderOutput rasterize_splats(const std::vector<Splat>& splats, const SE3Pose& view,
                              const CameraIntrinsics& intr, const RenderOptions& opts = {});

// Submap wrapper: `view` is a world-frame camera pose; splats are anchored by
// submap.anchor_pose. The retained context view is the submap-frame pose.
RenderOutput rasterize(const Submap& submap, const SE3Pose& view, const CameraIntrinsics& intr,
                       const RenderOptions& opts = {});

}  // namespace varsplat
