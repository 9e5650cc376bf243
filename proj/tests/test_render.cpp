#include <doctest.h>

#include <random>

#include "varsplat/core/errors.hpp"
#include "varsplat/render/rasterizer.hpp"
#include "test_helpers.hpp"

using namespace varsplat;
using namespace varsplat::testutil;

namespace {

// Independent per-pixel oracle: gate by Mahalanobis cutoff, sort by
// (z, index), composite front-to-back with its own loop.
struct OraclePixel {
    Vec3 color = Vec3::Zero();
    double depth = 0.0, alpha = 0.0;
    Vec3 variance = Vec3::Zero();
};

OraclePixel oracle_composite(const std::vector<Splat>& splats,
                             const std::vector<Projected2D>& projected, int px, int py) {
    struct Entry {
        double z;
        int index;
        double alpha;
        Vec3 color, var;
    };
    std::vector<Entry> entries;
    for (const Projected2D& g : projected) {
        const double dx = px - g.mean2d.x();
        const double dy = py - g.mean2d.y();
        const double mahal = g.conic(0, 0) * dx * dx + 2.0 * g.conic(0, 1) * dx * dy +
                             g.conic(1, 1) * dy * dy;
        if (mahal > kFootprintSigma * kFootprintSigma) continue;
        double a = g.opacity_act * std::exp(-0.5 * mahal);
        if (a > kMaxEffectiveAlpha) a = kMaxEffectiveAlpha;
        const Splat& s = splats[g.splat_index];
        entries.push_back({g.z_cam, g.splat_index, a, s.color, s.app_variance()});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.z != b.z) return a.z < b.z;
        return a.index < b.index;
    });

    OraclePixel out;
    Vec3 m2 = Vec3::Zero();
    double t = 1.0;
    for (const Entry& e : entries) {
        if (t < kTransmittanceStop) break;
        const double w = t * e.alpha;
        out.color += w * e.color;
        out.depth += w * e.z;
        out.alpha += w;
        m2 += w * (e.var + e.color.cwiseProduct(e.color));
        t *= (1.0 - e.alpha);
    }
    out.variance = (m2 - out.color.cwiseProduct(out.color)).cwiseMax(0.0);
    return out;
}

}  // namespace

TEST_CASE("projection: splat on the optical axis") {
    CameraIntrinsics intr = test_intrinsics(64, 48);
    Splat s;
    s.mean = Vec3(0, 0, 2.5);
    s.log_scale = Vec3::Constant(std::log(0.1));

    auto p = project_gaussian(s, SE3Pose::identity(), intr);
    REQUIRE(p.has_value());
    CHECK(p->mean2d.x() == doctest::Approx(intr.cx).epsilon(1e-12));
    CHECK(p->mean2d.y() == doctest::Approx(intr.cy).epsilon(1e-12));
    CHECK(p->z_cam == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("projection: isotropic covariance on axis gives (f/z)^2 sigma^2 + floor") {
    CameraIntrinsics intr = test_intrinsics(64, 64);
    const double sigma = 0.07, z = 3.0;
    Splat s;
    s.mean = Vec3(0, 0, z);
    s.log_scale = Vec3::Constant(std::log(sigma));

    auto p = project_gaussian(s, SE3Pose::identity(), intr);
    REQUIRE(p.has_value());
    const double expected = (intr.fx / z) * (intr.fx / z) * sigma * sigma + kLowPassFloor;
    CHECK(p->cov2d(0, 0) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(p->cov2d(1, 1) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(std::abs(p->cov2d(0, 1)) < 1e-12);
}

TEST_CASE("projection: splat behind camera is culled") {
    CameraIntrinsics intr = test_intrinsics();
    Splat s;
    s.mean = Vec3(0, 0, -1.0);
    CHECK(!project_gaussian(s, SE3Pose::identity(), intr).has_value());
}

TEST_CASE("composite_pixel single opaque splat") {
    std::vector<Contribution> list{{1.0, Vec3::Constant(0.3), Vec3::Constant(0.04), 2.0}};
    const PixelComposite r = composite_pixel(list);
    CHECK(r.color.x() == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(r.depth == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(r.alpha == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.variance.x() == doctest::Approx(0.04).epsilon(1e-15));
}

TEST_CASE("composite_pixel two-splat hand evaluation") {
    std::vector<Contribution> list{
        {0.5, Vec3::Ones(), Vec3::Constant(0.04), 1.0},
        {1.0, Vec3::Zero(), Vec3::Zero(), 2.0},
    };
    const PixelComposite r = composite_pixel(list);
    CHECK(r.color.x() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.alpha == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.depth == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(r.variance.x() == doctest::Approx(0.27).epsilon(1e-13));
}

TEST_CASE("composite_pixel empty list returns background") {
    const PixelComposite r = composite_pixel({});
    CHECK(r.color.isZero());
    CHECK(r.depth == 0.0);
    CHECK(r.alpha == 0.0);
    CHECK(r.variance.isZero());
}

TEST_CASE("variance closed form equals two-term decomposition; V >= 0") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<int> len(0, 16);
    for (int trial = 0; trial < 20000; ++trial) {
        std::vector<Contribution> list(len(rng));
        for (auto& c : list) {
            c.alpha = u01(rng);
            c.color = Vec3(u01(rng), u01(rng), u01(rng));
            c.variance = Vec3(0.2 * u01(rng), 0.2 * u01(rng), 0.2 * u01(rng));
            c.z = 1.0 + 3.0 * u01(rng);
        }
        std::sort(list.begin(), list.end(),
                  [](const Contribution& a, const Contribution& b) { return a.z < b.z; });
        const PixelComposite r = composite_pixel(list);

        // Independent evaluation: E[Var] + Var[E] over the same weights.
        double t = 1.0;
        Vec3 mean_var = Vec3::Zero(), mean_c = Vec3::Zero(), mean_c2 = Vec3::Zero();
        for (const auto& c : list) {
            if (t < kTransmittanceStop) break;
            const double w = t * c.alpha;
            mean_var += w * c.variance;
            mean_c += w * c.color;
            mean_c2 += w * c.color.cwiseProduct(c.color);
            t *= (1.0 - c.alpha);
        }
        const Vec3 decomposed = mean_var + (mean_c2 - mean_c.cwiseProduct(mean_c));
        CHECK((r.variance - decomposed.cwiseMax(0.0)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(r.variance.minCoeff() >= 0.0);
        CHECK(r.alpha >= 0.0);
        CHECK(r.alpha <= 1.0 + 1e-12);
    }
}

TEST_CASE("transmittance is monotone and weights sum into [0,1]") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        double t = 1.0, wsum = 0.0;
        for (int i = 0; i < 12; ++i) {
            const double a = u01(rng);
            const double next = t * (1.0 - a);
            CHECK(next <= t);
            CHECK(next >= 0.0);
            wsum += t * a;
            t = next;
        }
        CHECK(wsum <= 1.0 + 1e-12);
    }
}

TEST_CASE("all colors equal and full coverage: splat-variance term vanishes") {
    std::vector<Contribution> list;
    for (int i = 0; i < 30; ++i) {
        list.push_back({0.7, Vec3::Constant(0.6), Vec3::Zero(), 1.0 + 0.1 * i});
    }
    const PixelComposite r = composite_pixel(list);
    CHECK(r.alpha > 0.999);
    CHECK(r.variance.maxCoeff() < 1e-3);
}

TEST_CASE("rasterize: single opaque splat matches composite_pixel at its pixel") {
    CameraIntrinsics intr = test_intrinsics(33, 33);
    Splat s;
    s.mean = Vec3(0, 0, 2.0);
    s.log_scale = Vec3::Constant(std::log(0.5));
    s.opacity_logit = logit(0.95);
    s.color = Vec3(0.2, 0.5, 0.8);
    s.log_variance = Vec3::Constant(std::log(0.01));

    const RenderOutput out = rasterize_splats({s}, SE3Pose::identity(), intr);
    const int px = static_cast<int>(intr.cx), py = static_cast<int>(intr.cy);

    auto proj = project_gaussian(s, SE3Pose::identity(), intr);
    REQUIRE(proj.has_value());
    const double dx = px - proj->mean2d.x();
    const double dy = py - proj->mean2d.y();
    const double mahal = proj->conic(0, 0) * dx * dx + 2 * proj->conic(0, 1) * dx * dy +
                         proj->conic(1, 1) * dy * dy;
    const double alpha = std::min(kMaxEffectiveAlpha, s.opacity() * std::exp(-0.5 * mahal));
    const PixelComposite ref =
        composite_pixel({{alpha, s.color, s.app_variance(), proj->z_cam}});

    CHECK(out.color.at(px, py, 0) == doctest::Approx(ref.color.x()).epsilon(1e-14));
    CHECK(out.alpha.at(px, py) == doctest::Approx(ref.alpha).epsilon(1e-14));
    CHECK(out.depth.at(px, py) == doctest::Approx(ref.depth).epsilon(1e-14));
    CHECK(out.variance.at(px, py, 1) == doctest::Approx(ref.variance.y()).epsilon(1e-14));
}

TEST_CASE("rasterize matches the brute-force per-pixel oracle") {
    std::mt19937 rng(31);
    for (int scene = 0; scene < 5; ++scene) {
        CameraIntrinsics intr = test_intrinsics(32, 32);
        std::vector<Splat> splats;
        for (int i = 0; i < 10; ++i) splats.push_back(random_splat(rng));

        const RenderOutput out = rasterize_splats(splats, SE3Pose::identity(), intr);

        std::vector<Projected2D> projected;
        for (size_t i = 0; i < splats.size(); ++i) {
            auto p = project_gaussian(splats[i], SE3Pose::identity(), intr);
            if (p) {
                p->splat_index = static_cast<int>(i);
                projected.push_back(*p);
            }
        }
        double max_diff = 0.0;
        for (int py = 0; py < intr.height; ++py) {
            for (int px = 0; px < intr.width; ++px) {
                const OraclePixel ref = oracle_composite(splats, projected, px, py);
                for (int c = 0; c < 3; ++c) {
                    max_diff = std::max(max_diff,
                                        std::abs(out.color.at(px, py, c) - ref.color[c]));
                    max_diff = std::max(
                        max_diff, std::abs(out.variance.at(px, py, c) - ref.variance[c]));
                }
                max_diff = std::max(max_diff, std::abs(out.depth.at(px, py) - ref.depth));
                max_diff = std::max(max_diff, std::abs(out.alpha.at(px, py) - ref.alpha));
            }
        }
        CHECK(max_diff <= 1e-12);
    }
}

TEST_CASE("rasterize is bit-identical across thread counts") {
    std::mt19937 rng(37);
    CameraIntrinsics intr = test_intrinsics(64, 48);
    std::vector<Splat> splats;
    for (int i = 0; i < 40; ++i) splats.push_back(random_splat(rng));

    RenderOptions one;
    one.threads = 1;
    RenderOptions eight;
    eight.threads = 8;
    const RenderOutput a = rasterize_splats(splats, SE3Pose::identity(), intr, one);
    const RenderOutput b = rasterize_splats(splats, SE3Pose::identity(), intr, eight);

    CHECK(a.color.data == b.color.data);
    CHECK(a.depth.data == b.depth.data);
    CHECK(a.alpha.data == b.alpha.data);
    CHECK(a.variance.data == b.variance.data);
}

TEST_CASE("rasterize flags corrupt splats") {
    CameraIntrinsics intr = test_intrinsics();
    Splat s;
    s.mean = Vec3(0, 0, 2.0);
    s.log_scale = Vec3::Constant(std::log(1e200));  // overflows the 2D covariance
    CHECK_THROWS_AS((void)rasterize_splats({s}, SE3Pose::identity(), intr),
                    DegenerateProjection);
}

TEST_CASE("rasterize on an empty splat set returns background") {
    CameraIntrinsics intr = test_intrinsics();
    const RenderOutput out = rasterize_splats({}, SE3Pose::identity(), intr);
    for (double v : out.color.data) CHECK(v == 0.0);
    for (double v : out.alpha.data) CHECK(v == 0.0);
}
