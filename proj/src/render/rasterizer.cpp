#include "varsplat/render/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "varsplat/core/errors.hpp"
#include "varsplat/core/types.hpp"

namespace varsplat {

namespace {

struct TileGrid {
    int tiles_x = 0, tiles_y = 0, tile_size = 16;
    // Per-tile lists of positions into the sorted projected array; positions
    // are appended in increasing order, so each list stays front-to-back.
    std::vector<std::vector<uint32_t>> lists;
};

TileGrid build_tiles(const std::vector<Projected2D>& projected, const CameraIntrinsics& intr,
                     int tile_size, double radius_scale) {
    TileGrid grid;
    grid.tile_size = tile_size;
    grid.tiles_x = (intr.width + tile_size - 1) / tile_size;
    grid.tiles_y = (intr.height + tile_size - 1) / tile_size;
    grid.lists.resize(static_cast<size_t>(grid.tiles_x) * grid.tiles_y);

    for (uint32_t pos = 0; pos < projected.size(); ++pos) {
        const Projected2D& p = projected[pos];
        const double radius = p.radius_px * radius_scale;
        const int x0 = std::max(0, static_cast<int>(std::floor(p.mean2d.x() - radius)));
        const int x1 = std::min(intr.width - 1,
                                static_cast<int>(std::ceil(p.mean2d.x() + radius)));
        const int y0 = std::max(0, static_cast<int>(std::floor(p.mean2d.y() - radius)));
        const int y1 = std::min(intr.height - 1,
                                static_cast<int>(std::ceil(p.mean2d.y() + radius)));
        if (x0 > x1 || y0 > y1) continue;
        for (int ty = y0 / tile_size; ty <= y1 / tile_size; ++ty) {
            for (int tx = x0 / tile_size; tx <= x1 / tile_size; ++tx) {
                grid.lists[static_cast<size_t>(ty) * grid.tiles_x + tx].push_back(pos);
            }
        }
    }
    return grid;
}

}  // namespace

RenderOutput rasterize_splats(const std::vector<Splat>& splats, const SE3Pose& view,
                              const CameraIntrinsics& intr, const RenderOptions& opts) {
    const int w = intr.width;
    const int h = intr.height;

    RenderOutput out;
    out.color = ImageD(w, h, 3);
    out.depth = ImageD(w, h, 1);
    out.alpha = ImageD(w, h, 1);
    out.variance = ImageD(w, h, 3);

    // Project, keeping splat order for deterministic sort tie-breaks.
    std::vector<Projected2D> projected;
    projected.reserve(splats.size());
    {
        std::vector<std::optional<Projected2D>> slots(splats.size());
        parallel_for_shards(
            static_cast<int>((splats.size() + 511) / 512), opts.threads, [&](int shard) {
                const size_t begin = static_cast<size_t>(shard) * 512;
                const size_t end = std::min(splats.size(), begin + 512);
                for (size_t i = begin; i < end; ++i) {
                    slots[i] = project_gaussian(splats[i], view, intr);
                    if (slots[i]) slots[i]->splat_index = static_cast<int>(i);
                }
            });
        for (auto& s : slots) {
            if (!s) continue;
            if (s->radius_px < 0.0) {
                throw DegenerateProjection("splat " + std::to_string(s->splat_index) +
                                           ": 2D covariance not invertible after low-pass floor");
            }
            projected.push_back(*s);
        }
    }

    std::sort(projected.begin(), projected.end(), [](const Projected2D& a, const Projected2D& b) {
        if (a.z_cam != b.z_cam) return a.z_cam < b.z_cam;
        return a.splat_index < b.splat_index;
    });

    auto ctx = std::make_shared<RasterContext>();
    ctx->view = view;
    ctx->intr = intr;
    const bool retain = opts.retain_contributors;
    if (retain) {
        ctx->contributors.resize(static_cast<size_t>(w) * h, opts.max_contributors_per_pixel);
    }

    if (!projected.empty()) {
        const TileGrid grid = build_tiles(projected, intr, opts.tile_size,
                                          opts.footprint_sigma / kFootprintSigma);
        const int num_tiles = grid.tiles_x * grid.tiles_y;
        std::vector<size_t> tile_overflow(num_tiles, 0);

        const double cutoff = opts.footprint_sigma * opts.footprint_sigma;
        parallel_for_shards(num_tiles, opts.threads, [&](int tile) {
            const auto& list = grid.lists[tile];
            if (list.empty()) return;
            const int tx = tile % grid.tiles_x;
            const int ty = tile / grid.tiles_x;
            const int px0 = tx * grid.tile_size;
            const int py0 = ty * grid.tile_size;
            const int px1 = std::min(w, px0 + grid.tile_size);
            const int py1 = std::min(h, py0 + grid.tile_size);

            for (int py = py0; py < py1; ++py) {
                for (int px = px0; px < px1; ++px) {
                    double transmittance = 1.0;
                    Vec3 color_acc = Vec3::Zero();
                    Vec3 m2_acc = Vec3::Zero();
                    double depth_acc = 0.0;
                    double alpha_acc = 0.0;
                    const size_t pixel = static_cast<size_t>(py) * w + px;

                    for (const uint32_t pos : list) {
                        if (transmittance < kTransmittanceStop) break;
                        const Projected2D& g = projected[pos];
                        const double dx = px - g.mean2d.x();
                        const double dy = py - g.mean2d.y();
                        const double mahal = g.conic(0, 0) * dx * dx +
                                             2.0 * g.conic(0, 1) * dx * dy +
                                             g.conic(1, 1) * dy * dy;
                        if (mahal > cutoff) continue;
                        double a = g.opacity_act * std::exp(-0.5 * mahal);
                        if (a > kMaxEffectiveAlpha) a = kMaxEffectiveAlpha;
                        const double wi = transmittance * a;

                        const Splat& s = splats[g.splat_index];
                        color_acc += wi * s.color;
                        depth_acc += wi * g.z_cam;
                        alpha_acc += wi;
                        const Vec3 var = s.app_variance();
                        m2_acc += wi * (var + s.color.cwiseProduct(s.color));

                        if (retain) {
                            auto& cb = ctx->contributors;
                            const int count = cb.counts[pixel];
                            if (count < cb.cap) {
                                cb.entries[pixel * cb.cap + count] = pos;
                                cb.weights[pixel * cb.cap + count] = static_cast<float>(wi);
                                cb.counts[pixel] = static_cast<uint16_t>(count + 1);
                            } else {
                                ++tile_overflow[tile];
                            }
                        }
                        transmittance *= (1.0 - a);
                    }

                    Vec3 variance = m2_acc - color_acc.cwiseProduct(color_acc);
                    variance = variance.cwiseMax(0.0);
                    for (int c = 0; c < 3; ++c) {
                        out.color.at(px, py, c) = color_acc[c];
                        out.variance.at(px, py, c) = variance[c];
                    }
                    out.depth.at(px, py) = depth_acc;
                    out.alpha.at(px, py) = alpha_acc;
                }
            }
        });
        for (size_t n : tile_overflow) ctx->overflow_pixels += n;
    }

    if (retain) {
        ctx->projected = std::move(projected);
        out.ctx = std::move(ctx);
    }
    return out;
}

RenderOutput rasterize(const Submap& submap, const SE3Pose& view, const CameraIntrinsics& intr,
                       const RenderOptions& opts) {
    const SE3Pose local = pose_compose(pose_inverse(submap.anchor_pose), view);
    return rasterize_splats(submap.splats, local, intr, opts);
}

}  // namespace varsplat
