#pragma once

#include <vector>

#include "varsplat/render/rasterizer.hpp"

namespace varsplat {

using Vec4 = Eigen::Vector4d;

// Gradients of a scalar loss with respect to every splat parameter (in
// stored, pre-activation form) and the view pose. Rotation gradients are for
// the raw quaternion coordinates (w, x, y, z), projected onto the unit-sphere
// tangent. Pose gradient is the left-multiplied twist of the view passed to
// rasterize_splats: perturbation exp(xi) * view.
struct GradientBundle {
    std::vector<Vec3> d_mean;
    std::vector<Vec4> d_rotation;
    std::vector<Vec3> d_log_scale;
    std::vector<double> d_opacity_logit;
    std::vector<Vec3> d_color;
    std::vector<Vec3> d_log_variance;
    Vec6 d_pose = Vec6::Zero();

    explicit GradientBundle(size_t n = 0) { resize(n); }

    void resize(size_t n) {
        d_mean.assign(n, Vec3::Zero());
        d_rotation.assign(n, Vec4::Zero());
        d_log_scale.assign(n, Vec3::Zero());
        d_opacity_logit.assign(n, 0.0);
        d_color.assign(n, Vec3::Zero());
        d_log_variance.assign(n, Vec3::Zero());
        d_pose.setZero();
    }

    size_t size() const { return d_mean.size(); }

    void add(const GradientBundle& other) {
        for (size_t i = 0; i < size(); ++i) {
            d_mean[i] += other.d_mean[i];
            d_rotation[i] += other.d_rotation[i];
            d_log_scale[i] += other.d_log_scale[i];
            d_opacity_logit[i] += other.d_opacity_logit[i];
            d_color[i] += other.d_color[i];
            d_log_variance[i] += other.d_log_variance[i];
        }
        d_pose += other.d_pose;
    }

    bool all_finite() const;
};

// Analytic backward pass through rasterization. `output` must have been
// rendered from `splats` with retain_contributors. Adjoint images: d_color
// H x W x 3, d_depth H x W, d_variance H x W x 3 (per channel). Any adjoint
// may be empty, meaning zero. Gradients of culled splats are exactly zero.
// Deterministic for any thread count. Throws MissingContributors if the
// context was not retained.
GradientBundle backward_rasterize(const std::vector<Splat>& splats, const RenderOutput& output,
                                  const ImageD& d_color, const ImageD& d_depth,
                                  const ImageD& d_variance, int threads = default_thread_count());

}  // namespace varsplat
