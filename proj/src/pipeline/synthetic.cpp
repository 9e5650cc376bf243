#include "varsplat/pipeline/synthetic.hpp"

#include <cmath>

#include "varsplat/core/errors.hpp"

namespace varsplat {

namespace {

Vec3 wall_texture(const Vec3& p, double freq, int face) {
    // Multi-band pattern; every face gets its own phase so revisits are
    // unambiguous.
    const double u = p.x() + 0.7 * p.y() + 1.3 * face;
    const double v = p.z() - 0.4 * p.y() + 0.9 * face;
    const double r = 0.5 + 0.28 * std::sin(freq * u) * std::cos(0.6 * freq * v);
    const double g = 0.5 + 0.26 * std::sin(0.8 * freq * v + 1.1) +
                     0.08 * std::sin(2.3 * freq * u);
    const double b = 0.5 + 0.24 * std::cos(0.5 * freq * (u + v) + 0.4 * face);
    return Vec3(std::clamp(r, 0.05, 0.95), std::clamp(g, 0.05, 0.95),
                std::clamp(b, 0.05, 0.95));
}

void sample_plane(Submap& scene, std::mt19937_64& rng, const SyntheticSceneSpec& spec,
                  const Vec3& origin, const Vec3& axis_u, const Vec3& axis_v, double len_u,
                  double len_v, int face) {
    std::normal_distribution<double> jitter(0.0, spec.splat_spacing * 0.15);
    // Normal-direction jitter keeps the depth order of overlapping splats
    // stable under small viewpoint changes.
    std::normal_distribution<double> relief(0.0, spec.splat_spacing * 0.35);
    const Vec3 normal = axis_u.cross(axis_v).normalized();
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int nu = std::max(1, static_cast<int>(len_u / spec.splat_spacing));
    const int nv = std::max(1, static_cast<int>(len_v / spec.splat_spacing));
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            const double du = (i + 0.5) / nu * len_u - 0.5 * len_u + jitter(rng);
            const double dv = (j + 0.5) / nv * len_v - 0.5 * len_v + jitter(rng);
            Splat s;
            s.mean = origin + du * axis_u + dv * axis_v + relief(rng) * normal;
            s.rotation = Quat::Identity();
            s.log_scale = Vec3::Constant(std::log(spec.splat_spacing * 0.7));
            s.opacity_logit = logit(0.95);
            s.color = wall_texture(s.mean, spec.texture_frequency, face);
            s.color += Vec3(u01(rng), u01(rng), u01(rng)) * 0.06;
            s.color = s.color.cwiseMin(1.0).cwiseMax(0.0);
            s.log_variance = Vec3::Constant(std::log(1e-4));
            scene.splats.push_back(s);
            scene.reg_scale_targets.push_back(spec.splat_spacing * 0.7);
        }
    }
}

Submap build_room(const SyntheticSceneSpec& spec, std::mt19937_64& rng) {
    Submap scene;
    scene.id = -1;
    const double hx = spec.room_half_extent;
    const double hy = spec.room_half_height;
    const double hz = spec.room_half_extent;
    // Four walls, floor (+y is down), ceiling.
    sample_plane(scene, rng, spec, Vec3(0, 0, hz), Vec3::UnitX(), Vec3::UnitY(), 2 * hx, 2 * hy, 0);
    sample_plane(scene, rng, spec, Vec3(0, 0, -hz), Vec3::UnitX(), Vec3::UnitY(), 2 * hx, 2 * hy, 1);
    sample_plane(scene, rng, spec, Vec3(hx, 0, 0), Vec3::UnitZ(), Vec3::UnitY(), 2 * hz, 2 * hy, 2);
    sample_plane(scene, rng, spec, Vec3(-hx, 0, 0), Vec3::UnitZ(), Vec3::UnitY(), 2 * hz, 2 * hy, 3);
    sample_plane(scene, rng, spec, Vec3(0, hy, 0), Vec3::UnitX(), Vec3::UnitZ(), 2 * hx, 2 * hz, 4);
    sample_plane(scene, rng, spec, Vec3(0, -hy, 0), Vec3::UnitX(), Vec3::UnitZ(), 2 * hx, 2 * hz, 5);
    return scene;
}

SE3Pose look_at(const Vec3& position, const Vec3& forward_dir) {
    const Vec3 forward = forward_dir.normalized();
    const Vec3 world_down(0.0, 1.0, 0.0);
    Vec3 right = world_down.cross(forward);
    if (right.norm() < 1e-9) right = Vec3::UnitX();
    right.normalize();
    const Vec3 down = forward.cross(right);
    Mat3 r;
    r.col(0) = right;
    r.col(1) = down;
    r.col(2) = forward;
    SE3Pose pose;
    pose.rotation = Quat(r).normalized();
    pose.translation = position;
    return pose;
}

std::vector<SE3Pose> make_trajectory(const SyntheticSceneSpec& spec) {
    std::vector<SE3Pose> poses;
    const int n = spec.frame_count;
    const double radius = 0.45 * spec.room_half_extent;

    if (spec.trajectory == "lawnmower") {
        const double span = 0.6 * spec.room_half_extent;
        const int rows = 4;
        for (int k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) / std::max(1, n - 1);
            const int row = std::min(rows - 1, static_cast<int>(t * rows));
            const double tr = t * rows - row;
            const double x = (row % 2 == 0 ? -span + 2 * span * tr : span - 2 * span * tr);
            const double y = -0.3 + 0.2 * row;
            poses.push_back(look_at(Vec3(x, y, 0.0), Vec3::UnitZ()));
        }
        return poses;
    }

    // Orbit family: camera sweeps a circle looking outward. A plain orbit
    // covers 300 degrees; loop-with-revisit wraps 20 degrees past the start.
    const bool revisit = spec.trajectory == "loop-with-revisit";
    const double total = revisit ? 2.0 * M_PI * (380.0 / 360.0) : 2.0 * M_PI * (300.0 / 360.0);
    for (int k = 0; k < n; ++k) {
        const double theta = total * k / n;
        const Vec3 outward(std::sin(theta), 0.0, std::cos(theta));
        const Vec3 position = radius * outward;
        poses.push_back(look_at(position, outward));
    }
    return poses;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSceneSpec& spec, uint64_t seed,
                                 const RenderOptions& opts) {
    std::mt19937_64 rng(seed);
    SyntheticData data;
    data.scene = build_room(spec, rng);

    data.intrinsics.fx = data.intrinsics.fy = spec.focal;
    data.intrinsics.cx = spec.width / 2.0;
    data.intrinsics.cy = spec.height / 2.0;
    data.intrinsics.width = spec.width;
    data.intrinsics.height = spec.height;

    const std::vector<SE3Pose> poses = make_trajectory(spec);

    // Indices of splats inside the reflective patch.
    std::vector<size_t> reflective;
    std::vector<double> phases;
    if (spec.reflective.jitter_amplitude > 0.0) {
        std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
        for (size_t i = 0; i < data.scene.splats.size(); ++i) {
            const Vec3 d = (data.scene.splats[i].mean - spec.reflective.center).cwiseAbs();
            if ((d - spec.reflective.half_extent).maxCoeff() <= 0.0) {
                reflective.push_back(i);
                phases.push_back(phase(rng));
            }
        }
    }

    std::normal_distribution<double> photo(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    for (int k = 0; k < spec.frame_count; ++k) {
        const SE3Pose& pose = poses[k];

        // View-dependent jitter on reflective splats.
        Submap view_scene = data.scene;
        for (size_t r = 0; r < reflective.size(); ++r) {
            Splat& s = view_scene.splats[reflective[r]];
            const Vec3 to_cam = pose.translation - s.mean;
            const double view_angle = std::atan2(to_cam.x(), to_cam.z());
            const double jitter =
                spec.reflective.jitter_amplitude * std::sin(2.0 * view_angle + phases[r]);
            s.color = (s.color.array() + jitter).cwiseMin(1.0).cwiseMax(0.0);
        }

        const RenderOutput render = rasterize(view_scene, pose, data.intrinsics, opts);

        Frame frame;
        frame.index = k;
        frame.timestamp = k / 30.0;
        frame.intrinsics = data.intrinsics;
        frame.color = ImageF(spec.width, spec.height, 3);
        frame.depth = ImageF(spec.width, spec.height, 1);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                for (int c = 0; c < 3; ++c) {
                    frame.color.at(x, y, c) = static_cast<float>(render.color.at(x, y, c));
                }
                const double a = render.alpha.at(x, y);
                frame.depth.at(x, y) =
                    a > 0.5 ? static_cast<float>(render.depth.at(x, y) / a) : 0.f;
            }
        }

        if (spec.photo_noise.stddev > 0.0) {
            const int x0 = static_cast<int>(spec.photo_noise.x0 * spec.width);
            const int x1 = static_cast<int>(spec.photo_noise.x1 * spec.width);
            const int y0 = static_cast<int>(spec.photo_noise.y0 * spec.height);
            const int y1 = static_cast<int>(spec.photo_noise.y1 * spec.height);
            for (int y = y0; y < y1 && y < spec.height; ++y) {
                for (int x = x0; x < x1 && x < spec.width; ++x) {
                    for (int c = 0; c < 3; ++c) {
                        const double noisy =
                            frame.color.at(x, y, c) + spec.photo_noise.stddev * photo(rng);
                        frame.color.at(x, y, c) =
                            static_cast<float>(std::clamp(noisy, 0.0, 1.0));
                    }
                }
            }
        }
        if (spec.depth_dropout > 0.0) {
            for (float& d : frame.depth.data) {
                if (u01(rng) < spec.depth_dropout) d = 0.f;
            }
        }

        data.frames.push_back(std::move(frame));
        data.ground_truth.push(k / 30.0, pose);
    }
    return data;
}

}  // namespace varsplat
