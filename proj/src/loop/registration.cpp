#include "varsplat/loop/registration.hpp"

#include <cmath>

#include "varsplat/core/errors.hpp"
#include "varsplat/grad/backward.hpp"
#include "varsplat/grad/losses.hpp"
#include "varsplat/track/tracker.hpp"
#include "varsplat/uncertainty/weights.hpp"

namespace varsplat {

namespace {

struct ViewEval {
    double loss = 0.0;
    Vec6 d_local = Vec6::Zero();
    double d_gain = 0.0, d_bias = 0.0;
};

ViewEval eval_view(const Submap& db, const KeyframeView& view, const SE3Pose& relative,
                   double gain, double bias, const RegistrationConfig& cfg, bool with_grads,
                   const RenderOptions& opts) {
    const Frame& frame = *view.frame;
    const int w = frame.intrinsics.width, h = frame.intrinsics.height;

    const SE3Pose local =
        pose_compose(pose_inverse(db.anchor_pose), pose_compose(relative, view.pose));
    RenderOptions render_opts = opts;
    render_opts.retain_contributors = with_grads;
    const RenderOutput render = rasterize_splats(db.splats, local, frame.intrinsics, render_opts);

    const ImageD inliers = inlier_mask(render.depth, frame.depth, 50.0);
    const ImageD soft = alpha_mask(render.alpha);

    size_t count = 0;
    for (double v : inliers.data) count += v > 0.0 ? 1 : 0;
    if (count == 0) throw EmptyOverlap("registration: no valid pixels after masking");

    ImageD wp;
    if (cfg.use_uncertainty) wp = pixel_weights(render.variance, inliers, cfg.tau).values;

    ImageD color_weight(w, h, 1), depth_weight(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (inliers.at(x, y) == 0.0) continue;
            color_weight.at(x, y) = soft.at(x, y) * (wp.empty() ? 1.0 : wp.at(x, y));
            depth_weight.at(x, y) = soft.at(x, y);
        }
    }

    // Exposure-corrected prediction.
    ImageD exposed(w, h, 3);
    for (size_t i = 0; i < exposed.data.size(); ++i) {
        exposed.data[i] = gain * render.color.data[i] + bias;
    }

    ImageD d_exposed(w, h, 3), d_depth(w, h, 1);
    const double norm = static_cast<double>(count);
    ViewEval out;
    out.loss += l1_color_term(exposed, frame.color, color_weight, norm, 1.0,
                              with_grads ? &d_exposed : nullptr);
    out.loss += l1_depth_term(render.depth, frame.depth, depth_weight, norm, 1.0,
                              with_grads ? &d_depth : nullptr);
    if (!with_grads) return out;

    ImageD d_color(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double g = d_exposed.at(x, y, c);
                d_color.at(x, y, c) = gain * g;
                out.d_gain += g * render.color.at(x, y, c);
                out.d_bias += g;
            }
        }
    }

    const GradientBundle grads =
        backward_rasterize(db.splats, render, d_color, d_depth, ImageD(), opts.threads);
    out.d_local = grads.d_pose;
    return out;
}

}  // namespace

RegistrationResult register_submaps(const Submap& db, const std::vector<KeyframeView>& views,
                                    const SE3Pose& init_relative, const RegistrationConfig& cfg,
                                    const RenderOptions& opts) {
    RegistrationResult result;
    result.relative = init_relative;
    result.exposure.assign(views.size(), {1.0, 0.0});

    PoseAdam pose_adam(cfg.lr_rot, cfg.lr_trans);
    std::vector<ScalarAdam> gain_adam(views.size(), ScalarAdam(cfg.lr_exposure));
    std::vector<ScalarAdam> bias_adam(views.size(), ScalarAdam(cfg.lr_exposure));

    // Twist gradients from the backward pass live in the db submap frame;
    // map them to the world-frame correction.
    const Eigen::Matrix<double, 6, 6> adj_t =
        se3_adjoint(pose_inverse(db.anchor_pose)).transpose();

    for (int it = 0; it < cfg.iterations; ++it) {
        Vec6 twist_grad = Vec6::Zero();
        double total = 0.0;
        for (size_t v = 0; v < views.size(); ++v) {
            const ViewEval eval = eval_view(db, views[v], result.relative,
                                            result.exposure[v].first,
                                            result.exposure[v].second, cfg, true, opts);
            total += eval.loss;
            twist_grad += adj_t * eval.d_local;
            result.exposure[v].first += gain_adam[v].step(eval.d_gain);
            result.exposure[v].second += bias_adam[v].step(eval.d_bias);
        }
        if (it == 0) result.initial_loss = total;
        result.iterations_run = it + 1;
        const Vec6 delta = pose_adam.step(twist_grad);
        result.relative = pose_compose(se3_exp(delta), result.relative);
    }

    result.final_loss = 0.0;
    result.per_view_final.clear();
    for (size_t v = 0; v < views.size(); ++v) {
        const ViewEval eval = eval_view(db, views[v], result.relative,
                                        result.exposure[v].first, result.exposure[v].second,
                                        cfg, false, opts);
        result.per_view_final.push_back(eval.loss);
        result.final_loss += eval.loss;
    }
    if (result.final_loss > result.initial_loss) {
        throw RegistrationDiverged("registration loss rose from " +
                                   std::to_string(result.initial_loss) + " to " +
                                   std::to_string(result.final_loss));
    }
    return result;
}

}  // namespace varsplat
