#pragma once

#include <random>
#include <string>
#include <vector>

#include "varsplat/core/types.hpp"
#include "varsplat/io/trajectory.hpp"
#include "varsplat/render/rasterizer.hpp"

namespace varsplat {

// Image-space additive Gaussian noise, rect in normalized coordinates.
struct NoiseRegion {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
    double stddev = 0.0;
};

// Scene-space box whose splats get view-dependent color jitter
// (amplitude * sin of the horizontal view angle), the appearance a
// reflective surface shows a moving camera.
struct ReflectivePatch {
    Vec3 center = Vec3::Zero();
    Vec3 half_extent = Vec3::Zero();
    double jitter_amplitude = 0.0;
};

struct SyntheticSceneSpec {
    double room_half_extent = 2.0;  // meters, x and z
    double room_half_height = 1.2;  // meters, y (down = +)
    double texture_frequency = 3.0;
    double splat_spacing = 0.10;
    std::string trajectory = "orbit";  // orbit | lawnmower | loop-with-revisit
    int frame_count = 200;
    int width = 160, height = 120;
    double focal = 120.0;
    NoiseRegion photo_noise;
    double depth_dropout = 0.0;
    ReflectivePatch reflective;
};

struct SyntheticData {
    Submap scene;  // ground-truth splats, identity anchor
    std::vector<Frame> frames;
    Trajectory ground_truth;
    CameraIntrinsics intrinsics;
};

// Deterministic per seed. Frames are rendered from the ground-truth scene
// (color bit-exact to the renderer output), depth alpha-normalized to metric
// with 0 where coverage is poor, then noise injected per spec.
SyntheticData generate_synthetic(const SyntheticSceneSpec& spec, uint64_t seed,
                                 const RenderOptions& opts = {});

}  // namespace varsplat
