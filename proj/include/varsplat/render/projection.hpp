#pragma once

#include <optional>

#include "varsplat/core/types.hpp"

namespace varsplat {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

inline constexpr double kNearPlane = 0.01;        // meters
inline constexpr double kLowPassFloor = 0.3;      // px^2, added to cov2d diagonal
inline constexpr double kFootprintSigma = 3.0;    // cull + per-pixel cutoff radius
inline constexpr double kMaxEffectiveAlpha = 0.999;

// A splat projected into one view.
struct Projected2D {
    Vec2 mean2d = Vec2::Zero();       // pixels
    Mat2 cov2d = Mat2::Zero();        // px^2, includes the low-pass floor
    double z_cam = 0.0;               // camera-space depth of the mean
    int splat_index = -1;

    // Cached for compositing and the backward pass.
    Mat2 conic = Mat2::Zero();        // cov2d^-1
    Vec3 x_cam = Vec3::Zero();        // camera-space mean
    double opacity_act = 0.0;
    double radius_px = 0.0;           // kFootprintSigma * sqrt(lambda_max)
};

// EWA first-order projection of one splat. Returns nullopt when the mean is
// behind the near plane or the 3-sigma footprint misses the image. `view` is
// the camera pose expressed in the splat's frame; points transform into
// camera space by inverse(view).
std::optional<Projected2D> project_gaussian(const Splat& splat, const SE3Pose& view,
                                            const CameraIntrinsics& intr);

}  // namespace varsplat
