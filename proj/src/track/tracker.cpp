#include "varsplat/track/tracker.hpp"

#include <cmath>

#include "varsplat/core/errors.hpp"
#include "varsplat/grad/backward.hpp"
#include "varsplat/grad/losses.hpp"
#include "varsplat/map/adam.hpp"
#include "varsplat/uncertainty/weights.hpp"

namespace varsplat {

ImageD inlier_mask(const ImageD& rendered_depth, const ImageF& observed_depth,
                   double inlier_factor) {
    const int w = rendered_depth.width, h = rendered_depth.height;
    std::vector<double> errs;
    errs.reserve(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (observed_depth.at(x, y) > 0.f) {
                errs.push_back(std::abs(rendered_depth.at(x, y) - observed_depth.at(x, y)));
            }
        }
    }
    ImageD mask(w, h, 1);
    if (errs.empty()) return mask;
    const double threshold = inlier_factor * lower_median(std::move(errs));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (observed_depth.at(x, y) > 0.f &&
                std::abs(rendered_depth.at(x, y) - observed_depth.at(x, y)) <= threshold) {
                mask.at(x, y) = 1.0;
            }
        }
    }
    return mask;
}

ImageD alpha_mask(const ImageD& alpha) {
    ImageD out(alpha.width, alpha.height, 1);
    for (size_t i = 0; i < alpha.data.size(); ++i) {
        const double a = alpha.data[i];
        out.data[i] = a * a * a;
    }
    return out;
}

namespace {

struct TrackStep {
    double loss = 0.0;
    Vec6 grad = Vec6::Zero();
    double inlier_fraction = 0.0;
    double mean_weight = 0.0;
};

TrackStep track_iteration(const Submap& submap, const Frame& frame, const SE3Pose& local_view,
                          const TrackingConfig& cfg, const RenderOptions& opts) {
    RenderOptions render_opts = opts;
    render_opts.retain_contributors = true;
    const RenderOutput render =
        rasterize_splats(submap.splats, local_view, frame.intrinsics, render_opts);

    const int w = frame.intrinsics.width, h = frame.intrinsics.height;
    const ImageD inliers = inlier_mask(render.depth, frame.depth, cfg.inlier_factor);
    const ImageD soft = alpha_mask(render.alpha);

    size_t valid_depth = 0, inlier_count = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (frame.depth.at(x, y) > 0.f) ++valid_depth;
            if (inliers.at(x, y) > 0.0) ++inlier_count;
        }
    }
    if (inlier_count == 0) throw EmptyOverlap("tracking: no valid pixels after masking");

    // Uncertainty weights over the masked set, detached from gradients.
    ImageD wp;
    double weight_sum = 0.0;
    if (cfg.use_uncertainty) {
        wp = pixel_weights(render.variance, inliers, cfg.tau).values;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (inliers.at(x, y) > 0.0) weight_sum += wp.at(x, y);
            }
        }
    } else {
        weight_sum = static_cast<double>(inlier_count);
    }

    ImageD color_weight(w, h, 1), depth_weight(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (inliers.at(x, y) == 0.0) continue;
            const double base = soft.at(x, y);
            color_weight.at(x, y) = base * (wp.empty() ? 1.0 : wp.at(x, y));
            depth_weight.at(x, y) = base;
        }
    }

    ImageD d_color(w, h, 3), d_depth(w, h, 1);
    const double norm = static_cast<double>(inlier_count);
    TrackStep step;
    step.loss += l1_color_term(render.color, frame.color, color_weight, norm, cfg.lambda_c,
                               &d_color);
    step.loss += l1_depth_term(render.depth, frame.depth, depth_weight, norm,
                               1.0 - cfg.lambda_c, &d_depth);
    step.inlier_fraction =
        valid_depth > 0 ? static_cast<double>(inlier_count) / valid_depth : 0.0;
    step.mean_weight = weight_sum / static_cast<double>(inlier_count);

    // Variance stays frozen: no dL/dV.
    const GradientBundle grads =
        backward_rasterize(submap.splats, render, d_color, d_depth, ImageD(), opts.threads);
    step.grad = grads.d_pose;
    return step;
}

TrackResult run_track(const Submap& submap, const Frame& frame, const SE3Pose& init_world,
                      const TrackingConfig& cfg, const RenderOptions& opts) {
    // Optimize the submap-frame view; left-perturbation twists from the
    // backward pass apply directly.
    SE3Pose local = pose_compose(pose_inverse(submap.anchor_pose), init_world);
    PoseAdam adam(cfg.lr_rot, cfg.lr_trans);

    TrackResult result;
    for (int it = 0; it < cfg.iter_t; ++it) {
        const TrackStep step = track_iteration(submap, frame, local, cfg, opts);
        result.final_loss = step.loss;
        result.inlier_fraction = step.inlier_fraction;
        result.mean_weight = step.mean_weight;
        result.iterations_run = it + 1;
        const Vec6 delta = adam.step(step.grad);
        local = pose_compose(se3_exp(delta), local);
    }
    result.pose = pose_compose(submap.anchor_pose, local);
    return result;
}

}  // namespace

TrackResult track_frame(const Submap& submap, const Frame& frame, const SE3Pose& init_pose,
                        const TrackingConfig& cfg, const std::vector<SE3Pose>& history,
                        double running_avg_loss, const RenderOptions& opts) {
    TrackResult result = run_track(submap, frame, init_pose, cfg, opts);
    if (running_avg_loss > 0.0 &&
        result.final_loss > cfg.loss_spike_factor * running_avg_loss && !history.empty()) {
        TrackResult retry = run_track(submap, frame, predict_pose(history), cfg, opts);
        retry.reinitialized = true;
        retry.iterations_run += result.iterations_run;
        return retry;
    }
    return result;
}

SE3Pose predict_pose(const std::vector<SE3Pose>& history) {
    if (history.empty()) return SE3Pose::identity();
    if (history.size() == 1) return history.back();
    const SE3Pose& last = history[history.size() - 1];
    const SE3Pose& prev = history[history.size() - 2];
    return pose_compose(last, pose_compose(pose_inverse(prev), last));
}

}  // namespace varsplat
