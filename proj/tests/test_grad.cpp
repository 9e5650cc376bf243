#include <doctest.h>

#include <random>

#include "varsplat/core/errors.hpp"
#include "varsplat/grad/fd_check.hpp"
#include "test_helpers.hpp"

using namespace varsplat;
using namespace varsplat::testutil;

namespace {

// Scenes for finite-difference probing: moderate opacity (no 0.999 clamp, no
// transmittance early-stop crossing), depth-separated splats (stable sort).
std::vector<Splat> fd_scene(std::mt19937& rng, int count) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> ux(-0.5, 0.5);
    std::vector<Splat> splats;
    for (int i = 0; i < count; ++i) {
        Splat s;
        const double z = 1.5 + 0.35 * i + 0.1 * u01(rng);
        s.mean = Vec3(ux(rng) * 0.8, ux(rng) * 0.8, z);
        s.rotation = random_unit_quat(rng);
        s.log_scale = Vec3(std::log(0.10 + 0.15 * u01(rng)), std::log(0.10 + 0.15 * u01(rng)),
                           std::log(0.10 + 0.15 * u01(rng)));
        s.opacity_logit = logit(0.25 + 0.35 * u01(rng));
        s.color = Vec3(0.2 + 0.6 * u01(rng), 0.2 + 0.6 * u01(rng), 0.2 + 0.6 * u01(rng));
        s.log_variance = Vec3::Constant(std::log(0.005 + 0.02 * u01(rng)));
        splats.push_back(s);
    }
    return splats;
}

// Targets offset from the base render so the L1 terms stay away from their
// kinks during probing.
FdTargets offset_targets(const RenderOutput& base) {
    const int w = base.color.width, h = base.color.height;
    FdTargets t;
    t.color = ImageF(w, h, 3);
    t.depth = ImageF(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double off = 0.08 + 0.04 * std::sin(0.9 * x + 1.3 * y + c);
                t.color.at(x, y, c) = static_cast<float>(base.color.at(x, y, c) + off);
            }
            if (base.alpha.at(x, y) > 0.6) {
                t.depth.at(x, y) =
                    static_cast<float>(base.depth.at(x, y) + 0.1 + 0.05 * std::sin(x + 2.0 * y));
            }
        }
    }
    return t;
}

FdReport run_fd(unsigned seed, const LossSpec& spec, int splat_count = 5) {
    std::mt19937 rng(seed);
    const CameraIntrinsics intr = test_intrinsics(8, 8);
    const std::vector<Splat> splats = fd_scene(rng, splat_count);
    std::vector<double> reg_targets(splats.size(), 0.12);

    SE3Pose view;  // identity, splats in front
    RenderOptions opts;
    opts.threads = 1;
    opts.footprint_sigma = spec.footprint_sigma;
    const RenderOutput base = rasterize_splats(splats, view, intr, opts);
    const FdTargets targets = offset_targets(base);

    return finite_difference_check(splats, view, intr, reg_targets, targets, spec, 1e-5, 1);
}

}  // namespace

TEST_CASE("sigma^2 adjoint routing equals the compositing weight") {
    // log_variance = 0 makes d(log sigma^2) == d(sigma^2), so the routed
    // weight is visible bit-for-bit.
    CameraIntrinsics intr = test_intrinsics(9, 9);
    Splat s;
    s.mean = Vec3(0, 0, 2.0);
    s.log_scale = Vec3::Constant(std::log(0.6));
    s.opacity_logit = logit(0.7);
    s.color = Vec3(0.4, 0.5, 0.6);
    s.log_variance = Vec3::Zero();

    RenderOptions opts;
    opts.retain_contributors = true;
    opts.threads = 1;
    const RenderOutput out = rasterize_splats({s}, SE3Pose::identity(), intr, opts);

    const int px = 4, py = 4;
    ImageD d_var(9, 9, 3);
    d_var.at(px, py, 0) = 1.0;

    const GradientBundle g =
        backward_rasterize({s}, out, ImageD(), ImageD(), d_var, 1);

    // w at the pixel: T = 1, single splat.
    auto proj = project_gaussian(s, SE3Pose::identity(), intr);
    REQUIRE(proj.has_value());
    const double dx = px - proj->mean2d.x();
    const double dy = py - proj->mean2d.y();
    const double mahal = proj->conic(0, 0) * dx * dx + 2.0 * proj->conic(0, 1) * dx * dy +
                         proj->conic(1, 1) * dy * dy;
    const double w = std::min(kMaxEffectiveAlpha, s.opacity() * std::exp(-0.5 * mahal));

    CHECK(g.d_log_variance[0][0] == doctest::Approx(w).epsilon(1e-15));
    CHECK(g.d_log_variance[0][1] == 0.0);
    CHECK(g.d_log_variance[0][2] == 0.0);
}

TEST_CASE("backward requires retained contributors") {
    CameraIntrinsics intr = test_intrinsics(8, 8);
    Splat s;
    s.mean = Vec3(0, 0, 2.0);
    const RenderOutput out = rasterize_splats({s}, SE3Pose::identity(), intr);
    CHECK_THROWS_AS(
        (void)backward_rasterize({s}, out, ImageD(8, 8, 3), ImageD(), ImageD(), 1),
        MissingContributors);
}

TEST_CASE("finite differences: photometric L2") {
    LossSpec spec;
    spec.photo_l2 = true;
    for (unsigned seed : {101u, 102u, 103u}) {
        const FdReport r = run_fd(seed, spec);
        INFO("seed ", seed, " report ", r.to_json());
        CHECK(r.max_rel_err() <= 1e-4);
    }
}

TEST_CASE("finite differences: color L1 + SSIM") {
    LossSpec spec;
    spec.color = true;
    for (unsigned seed : {201u, 202u, 203u}) {
        const FdReport r = run_fd(seed, spec);
        INFO("seed ", seed, " report ", r.to_json());
        CHECK(r.max_rel_err() <= 1e-4);
    }
}

TEST_CASE("finite differences: depth L1") {
    LossSpec spec;
    spec.depth = true;
    for (unsigned seed : {301u, 302u}) {
        const FdReport r = run_fd(seed, spec);
        INFO("seed ", seed, " report ", r.to_json());
        CHECK(r.max_rel_err() <= 1e-4);
    }
}

TEST_CASE("finite differences: scale regularizer") {
    LossSpec spec;
    spec.reg = true;
    const FdReport r = run_fd(401, spec);
    INFO(r.to_json());
    CHECK(r.max_rel_err() <= 1e-4);
}

TEST_CASE("finite differences: variance NLL") {
    LossSpec spec;
    spec.var = true;
    for (unsigned seed : {501u, 502u}) {
        const FdReport r = run_fd(seed, spec);
        INFO("seed ", seed, " report ", r.to_json());
        CHECK(r.max_rel_err() <= 1e-4);
    }
}

TEST_CASE("finite differences: tracking loss (frozen weights)") {
    LossSpec spec;
    spec.track = true;
    spec.freeze_variance = true;
    spec.lambda_c = 0.8;
    for (unsigned seed : {601u, 602u}) {
        const FdReport r = run_fd(seed, spec);
        INFO("seed ", seed, " report ", r.to_json());
        CHECK(r.max_rel_err() <= 1e-4);
    }
}

TEST_CASE("finite differences: combined mapping loss") {
    LossSpec spec;
    spec.color = true;
    spec.depth = true;
    spec.reg = true;
    spec.var = true;
    const FdReport r = run_fd(701, spec);
    INFO(r.to_json());
    CHECK(r.max_rel_err() <= 1e-4);
    // Every parameter class appears exactly once in the report.
    CHECK(r.classes.size() == 7);
    for (const char* cls : {"mean", "rotation", "log_scale", "opacity_logit", "color",
                            "log_variance", "pose"}) {
        CHECK(r.classes.count(cls) == 1);
    }
}

TEST_CASE("zero-residual scene has vanishing photometric gradients") {
    std::mt19937 rng(801);
    const CameraIntrinsics intr = test_intrinsics(8, 8);
    const std::vector<Splat> splats = fd_scene(rng, 5);

    RenderOptions opts;
    opts.retain_contributors = true;
    opts.threads = 1;
    const RenderOutput base = rasterize_splats(splats, SE3Pose::identity(), intr, opts);

    FdTargets targets;
    targets.color = ImageF(8, 8, 3);
    targets.depth = ImageF(8, 8, 1);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            for (int c = 0; c < 3; ++c) {
                targets.color.at(x, y, c) = static_cast<float>(base.color.at(x, y, c));
            }
        }
    }

    LossSpec spec;
    spec.photo_l2 = true;
    const FrozenMasks frozen = freeze_masks(base, targets, spec);
    const GradientBundle g =
        loss_gradient(base, splats, {}, targets, spec, frozen, nullptr, 1);

    double max_abs = g.d_pose.cwiseAbs().maxCoeff();
    for (size_t i = 0; i < splats.size(); ++i) {
        max_abs = std::max(max_abs, g.d_mean[i].cwiseAbs().maxCoeff());
        max_abs = std::max(max_abs, g.d_color[i].cwiseAbs().maxCoeff());
        max_abs = std::max(max_abs, std::abs(g.d_opacity_logit[i]));
    }
    // Targets were rounded to float; residuals are at float epsilon.
    CHECK(max_abs <= 1e-6);
}

TEST_CASE("frozen variance zeroes all sigma^2 gradients") {
    std::mt19937 rng(901);
    const CameraIntrinsics intr = test_intrinsics(8, 8);
    const std::vector<Splat> splats = fd_scene(rng, 5);

    RenderOptions opts;
    opts.retain_contributors = true;
    opts.threads = 1;
    const RenderOutput base = rasterize_splats(splats, SE3Pose::identity(), intr, opts);
    const FdTargets targets = offset_targets(base);

    LossSpec spec;
    spec.var = true;
    spec.freeze_variance = true;
    const FrozenMasks frozen = freeze_masks(base, targets, spec);
    const GradientBundle g =
        loss_gradient(base, splats, {}, targets, spec, frozen, nullptr, 1);
    for (size_t i = 0; i < splats.size(); ++i) {
        CHECK(g.d_log_variance[i].cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("gradient of a composite loss is the sum of its parts") {
    std::mt19937 rng(1001);
    const CameraIntrinsics intr = test_intrinsics(8, 8);
    const std::vector<Splat> splats = fd_scene(rng, 5);
    std::vector<double> reg_targets(splats.size(), 0.1);

    RenderOptions opts;
    opts.retain_contributors = true;
    opts.threads = 1;
    const RenderOutput base = rasterize_splats(splats, SE3Pose::identity(), intr, opts);
    const FdTargets targets = offset_targets(base);

    LossSpec color_only, depth_only, both;
    color_only.color = true;
    depth_only.depth = true;
    both.color = both.depth = true;

    const FrozenMasks fc = freeze_masks(base, targets, color_only);
    const FrozenMasks fd = freeze_masks(base, targets, depth_only);
    const FrozenMasks fb = freeze_masks(base, targets, both);

    GradientBundle gc = loss_gradient(base, splats, reg_targets, targets, color_only, fc);
    const GradientBundle gd = loss_gradient(base, splats, reg_targets, targets, depth_only, fd);
    const GradientBundle gb = loss_gradient(base, splats, reg_targets, targets, both, fb);

    gc.add(gd);
    for (size_t i = 0; i < splats.size(); ++i) {
        CHECK((gc.d_mean[i] - gb.d_mean[i]).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((gc.d_color[i] - gb.d_color[i]).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((gc.d_log_scale[i] - gb.d_log_scale[i]).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK((gc.d_pose - gb.d_pose).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("grad_variance_loss: stationary point, minimizer, finite differences") {
    // R = 2, V = 1 per pixel: dL/dV = -R/(2V^2) + 1/V = 0.
    const int n = 4;
    ImageD pred(n, n, 3), depth_pred(n, n, 1), variance(n, n, 3);
    ImageF target(n, n, 3), depth_target(n, n, 1);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            for (int c = 0; c < 3; ++c) {
                pred.at(x, y, c) = std::sqrt(2.0 / 3.0);
                target.at(x, y, c) = 0.f;
                variance.at(x, y, c) = 1.0;
            }
        }
    }
    auto [d_v, value] =
        grad_variance_loss(pred, target, depth_pred, depth_target, variance, ImageD(), ImageD());
    for (double v : d_v.data) CHECK(std::abs(v) < 1e-12);
    // Loss = R/(2V) + log V = 1 per pixel.
    CHECK(value == doctest::Approx(n * n * 1.0).epsilon(1e-12));

    // Gradient descent on V alone converges to R/2.
    double r = 0.5, v = 1.0;
    for (int it = 0; it < 4000; ++it) {
        const double g = -r / (2.0 * v * v) + 1.0 / v;
        v -= 0.05 * g;
    }
    CHECK(v == doctest::Approx(0.25).epsilon(1e-6));

    // Derivative vs central differences on random (R, V).
    std::mt19937 rng(1101);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double rr = u(rng), vv = u(rng);
        const double analytic = -rr / (2.0 * vv * vv) + 1.0 / vv;
        const double h = 1e-6;
        const double up = rr / (2.0 * (vv + h)) + std::log(vv + h);
        const double dn = rr / (2.0 * (vv - h)) + std::log(vv - h);
        const double fd = (up - dn) / (2.0 * h);
        CHECK(std::abs(analytic - fd) / std::max(std::abs(analytic), 1.0) <= 1e-8);
    }
}
