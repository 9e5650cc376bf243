#include "varsplat/map/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "varsplat/core/errors.hpp"
#include "varsplat/grad/losses.hpp"
#include "varsplat/uncertainty/weights.hpp"

namespace varsplat {

namespace {

// Uniform-grid nearest neighbor for seed-time scale initialization.
class PointGrid {
public:
    explicit PointGrid(double cell) : cell_(cell) {}

    void insert(const Vec3& p) {
        points_.push_back(p);
        cells_[key(cell(p.x()), cell(p.y()), cell(p.z()))].push_back(points_.size() - 1);
    }

    // Distance to the nearest point within one cell ring; -1 when none.
    double nearest(const Vec3& p) const {
        const int64_t ix = cell(p.x()), iy = cell(p.y()), iz = cell(p.z());
        double best = -1.0;
        for (int64_t dz = -1; dz <= 1; ++dz) {
            for (int64_t dy = -1; dy <= 1; ++dy) {
                for (int64_t dx = -1; dx <= 1; ++dx) {
                    const auto it = cells_.find(key(ix + dx, iy + dy, iz + dz));
                    if (it == cells_.end()) continue;
                    for (size_t idx : it->second) {
                        const double d = (points_[idx] - p).norm();
                        if (best < 0.0 || d < best) best = d;
                    }
                }
            }
        }
        return best;
    }

private:
    int64_t cell(double v) const { return static_cast<int64_t>(std::floor(v / cell_)); }
    static int64_t key(int64_t x, int64_t y, int64_t z) {
        return ((x & 0x1FFFFF) << 42) | ((y & 0x1FFFFF) << 21) | (z & 0x1FFFFF);
    }

    double cell_;
    std::vector<Vec3> points_;
    std::unordered_map<int64_t, std::vector<size_t>> cells_;
};

struct MapAdjoints {
    ImageD d_color, d_depth, d_variance;
    double l_color = 0.0, l_depth = 0.0, l_var = 0.0;
};

// Shared mapping-loss assembly: color (L1 + SSIM) over the full image, depth
// and variance NLL over valid-depth / covered pixels.
MapAdjoints mapping_adjoints(const RenderOutput& render, const Frame& frame,
                             const MappingConfig& cfg, bool color_only) {
    const int w = render.color.width, h = render.color.height;
    MapAdjoints out;
    out.d_color = ImageD(w, h, 3);
    out.d_depth = ImageD(w, h, 1);
    out.d_variance = ImageD(w, h, 3);

    const ImageD empty;
    const double pixel_count = static_cast<double>(w) * h;
    out.l_color += l1_color_term(render.color, frame.color, empty, pixel_count,
                                 cfg.lambda_color * (1.0 - cfg.lambda_ssim), &out.d_color);
    out.l_color += ssim_term(render.color, frame.color, cfg.lambda_color * cfg.lambda_ssim,
                             &out.d_color);
    if (color_only) return out;

    ImageD depth_mask(w, h, 1);
    ImageD var_mask(w, h, 1);
    size_t depth_px = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool covered = render.alpha.at(x, y) > 0.5;
            if (covered) var_mask.at(x, y) = 1.0;
            if (covered && frame.depth.at(x, y) > 0.f) {
                depth_mask.at(x, y) = 1.0;
                ++depth_px;
            }
        }
    }
    if (depth_px > 0) {
        out.l_depth = l1_depth_term(render.depth, frame.depth, depth_mask,
                                    static_cast<double>(depth_px), cfg.lambda_depth,
                                    &out.d_depth);
    }
    out.l_var = variance_nll_term(render.color, frame.color, render.depth, frame.depth,
                                  render.variance, var_mask, depth_mask, cfg.lambda_var,
                                  &out.d_color, &out.d_depth, &out.d_variance);
    return out;
}

}  // namespace

double scene_extent(const Submap& submap) {
    if (submap.empty()) return 1.0;
    Vec3 centroid = Vec3::Zero();
    for (const Splat& s : submap.splats) centroid += s.mean;
    centroid /= static_cast<double>(submap.size());
    double extent = 0.0;
    for (const Splat& s : submap.splats) {
        extent = std::max(extent, (s.mean - centroid).norm());
    }
    return std::max(1.0, extent);
}

size_t seed_from_frame(const Frame& frame, const SE3Pose& pose, Submap& submap,
                       const MappingConfig& cfg, std::mt19937& rng, const RenderOptions& opts) {
    const int w = frame.intrinsics.width, h = frame.intrinsics.height;

    bool any_valid = false;
    for (float d : frame.depth.data) {
        if (d > 0.f) {
            any_valid = true;
            break;
        }
    }
    if (!any_valid) throw NoValidDepth("seed_from_frame: frame has no valid depth");

    RenderOutput render;
    const bool have_map = !submap.empty();
    if (have_map) render = rasterize(submap, pose, frame.intrinsics, opts);

    // Median depth error over covered, valid pixels.
    double median_err = 0.0;
    if (have_map) {
        std::vector<double> errs;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (frame.depth.at(x, y) > 0.f && render.alpha.at(x, y) > 0.5) {
                    errs.push_back(std::abs(render.depth.at(x, y) - frame.depth.at(x, y)));
                }
            }
        }
        if (!errs.empty()) median_err = lower_median(std::move(errs));
    }

    std::vector<int> candidates;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (frame.depth.at(x, y) <= 0.f) continue;
            if (!have_map) {
                candidates.push_back(y * w + x);
                continue;
            }
            const double alpha = render.alpha.at(x, y);
            const double err = std::abs(render.depth.at(x, y) - frame.depth.at(x, y));
            if (alpha < cfg.alpha_thre || err > cfg.depth_discrepancy_factor * median_err) {
                candidates.push_back(y * w + x);
            }
        }
    }
    if (candidates.empty()) return 0;

    const size_t budget = std::min<size_t>(cfg.seed_budget, candidates.size());
    // Partial Fisher-Yates keeps the draw uniform and deterministic per rng.
    for (size_t i = 0; i < budget; ++i) {
        std::uniform_int_distribution<size_t> pick(i, candidates.size() - 1);
        std::swap(candidates[i], candidates[pick(rng)]);
    }
    candidates.resize(budget);
    std::sort(candidates.begin(), candidates.end());

    const SE3Pose submap_from_world = pose_inverse(submap.anchor_pose);
    PointGrid grid(0.2);
    for (const Splat& s : submap.splats) grid.insert(s.mean);

    const double logit_opacity = logit(cfg.new_opacity);
    const double log_sigma2 = std::log(cfg.sigma2_init);
    size_t added = 0;
    for (int pix : candidates) {
        const int x = pix % w, y = pix / w;
        const double depth = frame.depth.at(x, y);
        const Vec3 cam_point = frame.intrinsics.backproject(x, y, depth);
        const Vec3 world_point = pose.apply(cam_point);
        const Vec3 submap_point = submap_from_world.apply(world_point);

        const double footprint = depth / frame.intrinsics.fx;
        double nn = grid.nearest(submap_point);
        double scale = nn > 0.0 ? nn : 2.0 * footprint;
        scale = std::clamp(scale, 0.5 * footprint, 10.0 * footprint);

        Splat s;
        s.mean = submap_point;
        s.rotation = Quat::Identity();
        s.log_scale = Vec3::Constant(std::log(scale));
        s.opacity_logit = logit_opacity;
        s.color = Vec3(frame.color.at(x, y, 0), frame.color.at(x, y, 1),
                       frame.color.at(x, y, 2));
        s.log_variance = Vec3::Constant(log_sigma2);
        submap.splats.push_back(s);
        submap.reg_scale_targets.push_back(scale);
        grid.insert(submap_point);
        ++added;
    }
    return added;
}

LossTrace optimize_submap(Submap& submap, const std::vector<KeyframeView>& keyframes,
                          const MappingConfig& cfg, SplatAdam& adam, const RenderOptions& opts) {
    if (keyframes.empty() || submap.empty()) return {};

    RenderOptions render_opts = opts;
    render_opts.retain_contributors = true;

    LossTrace trace;
    trace.reserve(cfg.iter_m);
    const double extent = scene_extent(submap);

    for (int it = 0; it < cfg.iter_m; ++it) {
        const KeyframeView& kf = keyframes[it % keyframes.size()];
        const SE3Pose local = pose_compose(pose_inverse(submap.anchor_pose), kf.pose);
        const RenderOutput render =
            rasterize_splats(submap.splats, local, kf.frame->intrinsics, render_opts);

        MapAdjoints adj = mapping_adjoints(render, *kf.frame, cfg, false);
        GradientBundle grads = backward_rasterize(submap.splats, render, adj.d_color,
                                                  adj.d_depth, adj.d_variance, opts.threads);

        std::vector<Vec3> scales(submap.size());
        for (size_t i = 0; i < submap.size(); ++i) scales[i] = submap.splats[i].scale();
        const double l_reg = scale_reg_term(scales, submap.reg_scale_targets, cfg.lambda_reg,
                                            &grads.d_log_scale);

        adam.step(submap.splats, grads, extent, false);
        trace.push_back({it, adj.l_color, adj.l_depth, l_reg, adj.l_var});
    }
    return trace;
}

void prune(Submap& submap, double prune_opacity) {
    std::vector<Splat> kept;
    std::vector<double> kept_targets;
    kept.reserve(submap.size());
    for (size_t i = 0; i < submap.size(); ++i) {
        if (submap.splats[i].opacity() >= prune_opacity) {
            kept.push_back(submap.splats[i]);
            kept_targets.push_back(submap.reg_scale_targets[i]);
        }
    }
    submap.splats = std::move(kept);
    submap.reg_scale_targets = std::move(kept_targets);
}

bool should_start_submap(const SE3Pose& current, const SE3Pose& anchor,
                         int frames_since_creation, const SubmapTrigger& trigger) {
    if (trigger.fixed_interval > 0 && frames_since_creation >= trigger.fixed_interval) {
        return true;
    }
    const double dist = (current.translation - anchor.translation).norm();
    if (dist > trigger.d_thre) return true;
    const double angle = rotation_angle_between(anchor, current) * 180.0 / M_PI;
    return angle > trigger.theta_thre_deg;
}

Submap global_refine(const std::vector<Submap>& submaps,
                     const std::vector<SE3Pose>& corrected_anchors,
                     const std::vector<KeyframeView>& keyframes, int iterations,
                     const MappingConfig& cfg, const RenderOptions& opts) {
    Submap merged;
    merged.id = -1;
    merged.anchor_pose = SE3Pose::identity();
    for (size_t m = 0; m < submaps.size(); ++m) {
        const SE3Pose& anchor = corrected_anchors[m];
        for (size_t i = 0; i < submaps[m].size(); ++i) {
            Splat s = submaps[m].splats[i];
            s.mean = anchor.apply(s.mean);
            s.rotation = (anchor.rotation * s.rotation).normalized();
            merged.splats.push_back(s);
            merged.reg_scale_targets.push_back(submaps[m].reg_scale_targets[i]);
        }
        for (int id : submaps[m].keyframe_ids) merged.keyframe_ids.push_back(id);
    }
    prune(merged, cfg.prune_opacity);
    if (merged.empty() || keyframes.empty() || iterations <= 0) return merged;

    RenderOptions render_opts = opts;
    render_opts.retain_contributors = true;
    SplatAdam adam(cfg.rates);
    const double extent = scene_extent(merged);

    for (int it = 0; it < iterations; ++it) {
        const KeyframeView& kf = keyframes[it % keyframes.size()];
        const RenderOutput render =
            rasterize_splats(merged.splats, kf.pose, kf.frame->intrinsics, render_opts);
        MapAdjoints adj = mapping_adjoints(render, *kf.frame, cfg, true);
        GradientBundle grads = backward_rasterize(merged.splats, render, adj.d_color, ImageD(),
                                                  ImageD(), opts.threads);
        adam.step(merged.splats, grads, extent, true);  // variance untouched
    }
    prune(merged, cfg.prune_opacity);
    return merged;
}

}  // namespace varsplat
