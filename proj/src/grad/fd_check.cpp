#include "varsplat/grad/fd_check.hpp"

#include <cmath>
#include <sstream>

#include "varsplat/core/types.hpp"
#include "varsplat/uncertainty/weights.hpp"

namespace varsplat {

namespace {

ImageD depth_validity(const RenderOutput& base, const FdTargets& targets) {
    const int w = base.alpha.width, h = base.alpha.height;
    ImageD mask(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (targets.depth.at(x, y) > 0.f && base.alpha.at(x, y) > 0.5) {
                mask.at(x, y) = 1.0;
            }
        }
    }
    return mask;
}

}  // namespace

FrozenMasks freeze_masks(const RenderOutput& base, const FdTargets& targets,
                         const LossSpec& spec) {
    FrozenMasks frozen;
    const int w = base.alpha.width, h = base.alpha.height;

    ImageD var_mask(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (base.alpha.at(x, y) > 0.5) var_mask.at(x, y) = 1.0;
        }
    }
    frozen.var_mask = std::move(var_mask);

    if (spec.depth || spec.var) {
        frozen.depth_weight = depth_validity(base, targets);
    }

    if (spec.track) {
        const WeightMap wp = pixel_weights(base.variance, frozen.var_mask.empty()
                                                              ? ImageD()
                                                              : frozen.var_mask,
                                           spec.tau);
        ImageD color_weight(w, h, 1);
        ImageD depth_weight(w, h, 1);
        size_t count = 0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double a = base.alpha.at(x, y);
                const double soft = a * a * a;
                const bool valid = targets.depth.at(x, y) > 0.f && a > 0.5;
                if (!valid) continue;
                ++count;
                color_weight.at(x, y) = wp.values.at(x, y) * soft;
                depth_weight.at(x, y) = soft;
            }
        }
        frozen.color_weight = std::move(color_weight);
        frozen.depth_weight = std::move(depth_weight);
        frozen.color_norm = frozen.depth_norm = std::max<size_t>(1, count);
        return frozen;
    }

    frozen.color_norm = static_cast<double>(w) * h;
    size_t depth_count = 0;
    if (!frozen.depth_weight.empty()) {
        for (double v : frozen.depth_weight.data) depth_count += v > 0.0 ? 1 : 0;
    }
    frozen.depth_norm = std::max<size_t>(1, depth_count);
    return frozen;
}

double loss_value(const RenderOutput& render, const std::vector<Splat>& splats,
                  const std::vector<double>& reg_targets, const FdTargets& targets,
                  const LossSpec& spec, const FrozenMasks& frozen) {
    double value = 0.0;
    const ImageD empty;

    if (spec.photo_l2) {
        const int w = render.color.width, h = render.color.height;
        double acc = 0.0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    const double d = render.color.at(x, y, c) - targets.color.at(x, y, c);
                    acc += d * d;
                }
            }
        }
        value += acc / (3.0 * w * h);
    }
    if (spec.color) {
        value += l1_color_term(render.color, targets.color, empty, frozen.color_norm,
                               1.0 - spec.lambda_ssim, nullptr);
        value += ssim_term(render.color, targets.color, spec.lambda_ssim, nullptr);
    }
    if (spec.depth) {
        value += l1_depth_term(render.depth, targets.depth, frozen.depth_weight,
                               frozen.depth_norm, 1.0, nullptr);
    }
    if (spec.track) {
        value += l1_color_term(render.color, targets.color, frozen.color_weight,
                               frozen.color_norm, spec.lambda_c, nullptr);
        value += l1_depth_term(render.depth, targets.depth, frozen.depth_weight,
                               frozen.depth_norm, 1.0 - spec.lambda_c, nullptr);
    }
    if (spec.var) {
        value += variance_nll_term(render.color, targets.color, render.depth, targets.depth,
                                   render.variance, frozen.var_mask, frozen.depth_weight, 1.0,
                                   nullptr, nullptr, nullptr);
    }
    if (spec.reg) {
        std::vector<Vec3> scales(splats.size());
        for (size_t i = 0; i < splats.size(); ++i) scales[i] = splats[i].scale();
        value += scale_reg_term(scales, reg_targets, 1.0, nullptr);
    }
    return value;
}

GradientBundle loss_gradient(const RenderOutput& render, const std::vector<Splat>& splats,
                             const std::vector<double>& reg_targets, const FdTargets& targets,
                             const LossSpec& spec, const FrozenMasks& frozen, double* value_out,
                             int threads) {
    const int w = render.color.width, h = render.color.height;
    ImageD d_color(w, h, 3), d_depth(w, h, 1), d_variance(w, h, 3);
    const ImageD empty;
    double value = 0.0;

    if (spec.photo_l2) {
        double acc = 0.0;
        const double inv = 1.0 / (3.0 * w * h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    const double d = render.color.at(x, y, c) - targets.color.at(x, y, c);
                    acc += d * d;
                    d_color.at(x, y, c) += 2.0 * d * inv;
                }
            }
        }
        value += acc * inv;
    }
    if (spec.color) {
        value += l1_color_term(render.color, targets.color, empty, frozen.color_norm,
                               1.0 - spec.lambda_ssim, &d_color);
        value += ssim_term(render.color, targets.color, spec.lambda_ssim, &d_color);
    }
    if (spec.depth) {
        value += l1_depth_term(render.depth, targets.depth, frozen.depth_weight,
                               frozen.depth_norm, 1.0, &d_depth);
    }
    if (spec.track) {
        value += l1_color_term(render.color, targets.color, frozen.color_weight,
                               frozen.color_norm, spec.lambda_c, &d_color);
        value += l1_depth_term(render.depth, targets.depth, frozen.depth_weight,
                               frozen.depth_norm, 1.0 - spec.lambda_c, &d_depth);
    }
    if (spec.var) {
        value += variance_nll_term(render.color, targets.color, render.depth, targets.depth,
                                   render.variance, frozen.var_mask, frozen.depth_weight, 1.0,
                                   &d_color, &d_depth, &d_variance);
    }

    if (spec.freeze_variance) {
        d_variance = ImageD(w, h, 3);
    }

    GradientBundle bundle =
        backward_rasterize(splats, render, d_color, d_depth, d_variance, threads);

    if (spec.reg) {
        std::vector<Vec3> scales(splats.size());
        for (size_t i = 0; i < splats.size(); ++i) scales[i] = splats[i].scale();
        value += scale_reg_term(scales, reg_targets, 1.0, &bundle.d_log_scale);
    }
    if (value_out) *value_out = value;
    return bundle;
}

std::string FdReport::to_json() const {
    std::ostringstream os;
    os << "{";
    bool first = true;
    for (const auto& [name, c] : classes) {
        if (!first) os << ",";
        first = false;
        os << "\"" << name << "\":{\"max_rel_err\":" << c.max_rel_err
           << ",\"mean_rel_err\":" << c.mean_rel_err << ",\"entries\":" << c.entries << "}";
    }
    os << "}";
    return os.str();
}

FdReport finite_difference_check(const std::vector<Splat>& splats, const SE3Pose& view,
                                 const CameraIntrinsics& intr,
                                 const std::vector<double>& reg_targets, const FdTargets& targets,
                                 const LossSpec& spec, double step, int threads) {
    RenderOptions opts;
    opts.threads = threads;
    opts.retain_contributors = true;
    opts.footprint_sigma = spec.footprint_sigma;

    const RenderOutput base = rasterize_splats(splats, view, intr, opts);
    const FrozenMasks frozen = freeze_masks(base, targets, spec);

    FdReport report;
    GradientBundle analytic = loss_gradient(base, splats, reg_targets, targets, spec, frozen,
                                            &report.loss_value, threads);

    RenderOptions fast;
    fast.threads = threads;
    fast.retain_contributors = false;
    fast.footprint_sigma = spec.footprint_sigma;
    auto eval_at = [&](const std::vector<Splat>& s, const SE3Pose& v) {
        const RenderOutput r = rasterize_splats(s, v, intr, fast);
        return loss_value(r, s, reg_targets, targets, spec, frozen);
    };

    struct Pair {
        double analytic, fd;
    };
    std::map<std::string, std::vector<Pair>> pairs;

    const size_t n = splats.size();
    std::vector<Splat> work = splats;
    auto probe = [&](const std::string& cls, double analytic_val, auto&& setter) {
        setter(step);
        const double up = eval_at(work, view);
        setter(-2.0 * step);
        const double down = eval_at(work, view);
        setter(step);  // restore
        pairs[cls].push_back({analytic_val, (up - down) / (2.0 * step)});
    };

    for (size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
            probe("mean", analytic.d_mean[i][k], [&](double d) { work[i].mean[k] += d; });
            probe("log_scale", analytic.d_log_scale[i][k],
                  [&](double d) { work[i].log_scale[k] += d; });
            probe("color", analytic.d_color[i][k], [&](double d) { work[i].color[k] += d; });
            probe("log_variance", analytic.d_log_variance[i][k],
                  [&](double d) { work[i].log_variance[k] += d; });
        }
        probe("opacity_logit", analytic.d_opacity_logit[i],
              [&](double d) { work[i].opacity_logit += d; });
        // Raw quaternion coordinates; forward normalizes, so the analytic
        // gradient is tangent-projected.
        auto quat_coord = [&](int k) -> double& {
            Quat& q = work[i].rotation;
            switch (k) {
                case 0: return q.w();
                case 1: return q.x();
                case 2: return q.y();
                default: return q.z();
            }
        };
        for (int k = 0; k < 4; ++k) {
            probe("rotation", analytic.d_rotation[i][k], [&](double d) { quat_coord(k) += d; });
        }
    }

    // Pose twist: value at exp(xi) * view.
    for (int k = 0; k < 6; ++k) {
        Vec6 xi = Vec6::Zero();
        xi[k] = step;
        const double up = eval_at(work, pose_compose(se3_exp(xi), view));
        xi[k] = -step;
        const double down = eval_at(work, pose_compose(se3_exp(xi), view));
        pairs["pose"].push_back({analytic.d_pose[k], (up - down) / (2.0 * step)});
    }

    for (const auto& [cls, list] : pairs) {
        double scale = 0.0;
        for (const Pair& p : list) scale = std::max({scale, std::abs(p.analytic), std::abs(p.fd)});
        const double cutoff = std::max(1e-12, 1e-6 * scale);
        FdClassReport c;
        c.entries = list.size();
        double sum = 0.0;
        for (const Pair& p : list) {
            const double mag = std::max(std::abs(p.analytic), std::abs(p.fd));
            const double rel = mag < cutoff ? 0.0 : std::abs(p.analytic - p.fd) / mag;
            c.max_rel_err = std::max(c.max_rel_err, rel);
            sum += rel;
        }
        c.mean_rel_err = sum / static_cast<double>(list.size());
        report.classes[cls] = c;
    }
    return report;
}

}  // namespace varsplat
