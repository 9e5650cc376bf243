#pragma once

#include <cstdint>
#include <vector>

#include "varsplat/core/activation.hpp"
#include "varsplat/core/image.hpp"
#include "varsplat/core/se3.hpp"

namespace varsplat {

// One anisotropic 3D Gaussian. Geometry parameters are stored pre-activation:
// scale and appearance variance as logs, opacity as a logit.
struct Splat {
    Vec3 mean = Vec3::Zero();              // submap frame, meters
    Quat rotation{1.0, 0.0, 0.0, 0.0};     // unit
    Vec3 log_scale = Vec3::Zero();         // per-axis stddev, log meters
    double opacity_logit = 0.0;
    Vec3 color = Vec3::Zero();             // [0,1], SH degree 0
    Vec3 log_variance = Vec3::Zero();      // per-channel appearance variance, log

    double opacity() const { return sigmoid(opacity_logit); }
    Vec3 scale() const { return log_scale.array().exp(); }
    Vec3 app_variance() const { return log_variance.array().exp(); }
};

// Sigma = R * diag(scale^2) * R^T.
Mat3 covariance_from_scale_rotation(const Vec3& scale, const Quat& rotation);

struct CameraIntrinsics {
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;

    bool valid() const {
        return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 && cx < width &&
               cy >= 0.0 && cy < height;
    }

    Vec3 backproject(double u, double v, double depth) const {
        return Vec3((u - cx) / fx * depth, (v - cy) / fy * depth, depth);
    }

    CameraIntrinsics scaled(double factor) const {
        CameraIntrinsics out = *this;
        out.fx *= factor;
        out.fy *= factor;
        out.cx *= factor;
        out.cy *= factor;
        out.width = static_cast<int>(width * factor);
        out.height = static_cast<int>(height * factor);
        return out;
    }
};

// One RGB-D observation. Color in [0,1], depth in meters with 0 = invalid.
struct Frame {
    int index = 0;
    double timestamp = 0.0;
    ImageF color;   // H x W x 3
    ImageF depth;   // H x W x 1
    CameraIntrinsics intrinsics;
};

// A locally consistent splat set anchored at a reference pose. Splat means
// live in the submap frame; anchor_pose maps submap -> world.
struct Submap {
    int id = 0;
    SE3Pose anchor_pose;
    std::vector<Splat> splats;
    std::vector<int> keyframe_ids;
    int creation_frame = 0;

    // Per-splat scale regularization targets, set at seed time. Parallel to
    // splats; rebuilt as current scales when a submap is loaded from disk.
    std::vector<double> reg_scale_targets;

    bool empty() const { return splats.empty(); }
    size_t size() const { return splats.size(); }
};

}  // namespace varsplat
