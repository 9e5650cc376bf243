#include <doctest.h>

#include <random>

#include "varsplat/core/errors.hpp"
#include "varsplat/loop/descriptor.hpp"
#include "varsplat/loop/detect.hpp"
#include "varsplat/loop/pose_graph.hpp"
#include "test_helpers.hpp"

using namespace varsplat;
using namespace varsplat::testutil;

namespace {

ImageF textured_image(int w, int h, unsigned seed, double offset = 0.0) {
    ImageF img(w, h, 3);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 0.15);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = 0.4 + 0.3 * std::sin(0.3 * x + 0.2 * c) *
                                           std::cos(0.25 * y) +
                                 u(rng) * 0.0 + offset;
                img.at(x, y, c) = static_cast<float>(v);
            }
        }
    }
    return img;
}

ImageF noise_image(int w, int h, unsigned seed) {
    ImageF img(w, h, 3);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> u(0.f, 1.f);
    for (float& v : img.data) v = u(rng);
    return img;
}

}  // namespace

TEST_CASE("descriptors are unit norm and deterministic") {
    const ImageF img = textured_image(64, 48, 1);
    const Eigen::VectorXd d1 = image_descriptor(img);
    const Eigen::VectorXd d2 = image_descriptor(img);
    CHECK(d1.size() == kDescriptorDim);
    CHECK(std::abs(d1.norm() - 1.0) < 1e-9);
    CHECK((d1 - d2).norm() == 0.0);
}

TEST_CASE("identical keyframes have similarity 1") {
    const ImageF img = textured_image(64, 48, 2);
    CHECK(descriptor_similarity(image_descriptor(img), image_descriptor(img)) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("descriptor is invariant to a global brightness offset") {
    const ImageF base = textured_image(64, 48, 3);
    const ImageF bright = textured_image(64, 48, 3, 0.1);
    const double sim =
        descriptor_similarity(image_descriptor(base), image_descriptor(bright));
    CHECK(sim >= 0.999);
}

TEST_CASE("unrelated noise images have low similarity") {
    double total = 0.0;
    for (unsigned t = 0; t < 100; ++t) {
        const ImageF a = noise_image(48, 36, 1000 + 2 * t);
        const ImageF b = noise_image(48, 36, 1001 + 2 * t);
        total += descriptor_similarity(image_descriptor(a), image_descriptor(b));
    }
    CHECK(total / 100.0 < 0.5);
}

TEST_CASE("pose graph: consistent chain stays put") {
    std::mt19937 rng(17);
    PoseGraph graph;
    SE3Pose pose;
    graph.nodes.push_back(pose);
    for (int i = 0; i < 5; ++i) {
        SE3Pose step;
        step.translation = Vec3(0.2, 0.01 * i, 0.0);
        step.rotation = Quat(Eigen::AngleAxisd(0.1, Vec3::UnitY()));
        PoseGraphEdge edge;
        edge.i = i;
        edge.j = i + 1;
        edge.relative = step;
        pose = pose_compose(pose, step);
        graph.nodes.push_back(pose);
        graph.edges.push_back(edge);
    }
    CHECK(pose_graph_residual(graph.nodes, graph.edges) < 1e-20);
    const auto corrected = pose_graph_optimize(graph);
    for (size_t i = 0; i < graph.nodes.size(); ++i) {
        CHECK((corrected[i].translation - graph.nodes[i].translation).norm() < 1e-9);
    }
}

TEST_CASE("pose graph: drifted circle with one exact loop edge") {
    // Ten nodes around a circle; odometry edges carry a consistent bias, one
    // loop edge pins the end to the start.
    const int n = 10;
    std::vector<SE3Pose> truth;
    for (int i = 0; i < n; ++i) {
        const double theta = 2.0 * M_PI * i / n;
        SE3Pose p;
        p.translation = Vec3(std::cos(theta), std::sin(theta), 0.0);
        p.rotation = Quat(Eigen::AngleAxisd(theta, Vec3::UnitZ()));
        truth.push_back(p);
    }

    PoseGraph graph;
    graph.nodes.push_back(truth[0]);
    for (int i = 0; i + 1 < n; ++i) {
        SE3Pose odo = pose_compose(pose_inverse(truth[i]), truth[i + 1]);
        odo.translation += Vec3(0.02, 0.015, 0.0);  // injected drift
        PoseGraphEdge edge;
        edge.i = i;
        edge.j = i + 1;
        edge.relative = odo;
        graph.edges.push_back(edge);
        graph.nodes.push_back(pose_compose(graph.nodes.back(), odo));
    }
    const double before = (graph.nodes.back().translation - truth.back().translation).norm();

    PoseGraphEdge loop;
    loop.i = 0;
    loop.j = n - 1;
    loop.relative = pose_compose(pose_inverse(truth[0]), truth[n - 1]);
    loop.weight = 2.0;
    graph.edges.push_back(loop);

    const auto corrected = pose_graph_optimize(graph);
    const double after = (corrected.back().translation - truth.back().translation).norm();
    CHECK(after < 0.1 * before);

    // Residual is monotone under the solver by construction; spot-check that
    // the corrected total is not worse.
    CHECK(pose_graph_residual(corrected, graph.edges) <=
          pose_graph_residual(graph.nodes, graph.edges) + 1e-12);
}

TEST_CASE("pose graph: duplicate identical loop edge changes nothing") {
    std::mt19937 rng(23);
    PoseGraph graph;
    graph.nodes.push_back(SE3Pose::identity());
    for (int i = 0; i < 4; ++i) {
        SE3Pose delta = random_pose(rng, 0.3);
        PoseGraphEdge edge;
        edge.i = i;
        edge.j = i + 1;
        edge.relative = delta;
        // Perturbed initialization.
        SE3Pose noisy = delta;
        noisy.translation += Vec3(0.05, -0.02, 0.01);
        graph.nodes.push_back(pose_compose(graph.nodes.back(), noisy));
        graph.edges.push_back(edge);
    }
    PoseGraphEdge loop;
    loop.i = 0;
    loop.j = 4;
    loop.relative = SE3Pose::identity();
    for (int i = 0; i < 4; ++i) loop.relative = pose_compose(loop.relative, graph.edges[i].relative);
    graph.edges.push_back(loop);

    const auto once = pose_graph_optimize(graph);
    graph.edges.push_back(loop);  // duplicate
    const auto twice = pose_graph_optimize(graph);
    for (size_t i = 0; i < once.size(); ++i) {
        CHECK((once[i].translation - twice[i].translation).norm() < 1e-9);
        CHECK(once[i].rotation.angularDistance(twice[i].rotation) < 1e-9);
    }
}

TEST_CASE("pose graph: disconnected graph raises SingularSystem") {
    PoseGraph graph;
    for (int i = 0; i < 4; ++i) graph.nodes.push_back(SE3Pose::identity());
    PoseGraphEdge edge;
    edge.i = 0;
    edge.j = 1;
    edge.relative = SE3Pose::identity();
    graph.edges.push_back(edge);  // nodes 2, 3 unconstrained
    CHECK_THROWS_AS((void)pose_graph_optimize(graph), SingularSystem);
}

TEST_CASE("loop rescoring never increases similarity and reacts to variance") {
    // Two synthetic submaps with identical keyframe descriptors; inflating
    // sigma^2 on the db submap halves its clamped reliability.
    auto make_submap = [](int id, double sigma2_half) {
        Submap s;
        s.id = id;
        for (int i = 0; i < 10; ++i) {
            Splat splat;
            splat.opacity_logit = logit(0.6);
            splat.log_variance =
                Vec3::Constant(std::log(i < 5 ? 0.01 : 0.01 * sigma2_half));
            s.splats.push_back(splat);
            s.reg_scale_targets.push_back(0.1);
        }
        return s;
    };

    const ImageF img = textured_image(64, 48, 31);
    SubmapDescriptor desc;
    desc.keyframe_descriptors = {image_descriptor(img), image_descriptor(img)};
    desc.keyframe_ids = {0, 1};

    Submap query = make_submap(0, 1.0);
    Submap db_clean = make_submap(1, 1.0);
    Submap db_noisy = make_submap(2, 50.0);

    LoopEntry qe{&query, desc, {SE3Pose::identity(), SE3Pose::identity()}, {1.5, 1.5},
                 CameraIntrinsics{60, 60, 32, 24, 64, 48}};
    LoopEntry clean{&db_clean, desc, qe.keyframe_poses, qe.keyframe_depths, qe.intrinsics};
    LoopEntry noisy{&db_noisy, desc, qe.keyframe_poses, qe.keyframe_depths, qe.intrinsics};

    LoopDetectConfig cfg;
    cfg.tau = 1.0;
    const auto cands = detect_loops(qe, {clean, noisy}, cfg);
    REQUIRE(cands.size() == 2);
    for (const LoopCandidate& c : cands) {
        CHECK(c.rescored_sim <= c.raw_sim + 1e-12);
        CHECK(c.rescored_sim == doctest::Approx(c.raw_sim * c.r_q * c.r_db).epsilon(1e-12));
    }
    // The clean copy outranks the variance-inflated one.
    CHECK(cands[0].db_submap == 1);
    CHECK(cands[1].db_submap == 2);
    CHECK(cands[1].rescored_sim < cands[0].rescored_sim);

    // Geometrically disjoint submaps are excluded by the overlap gate.
    LoopEntry far = clean;
    std::vector<SE3Pose> far_poses;
    SE3Pose away;
    away.translation = Vec3(100.0, 0.0, 0.0);
    far_poses.assign(2, away);
    far.keyframe_poses = far_poses;
    const auto cands2 = detect_loops(qe, {far}, cfg);
    REQUIRE(cands2.size() == 1);
    CHECK(!cands2[0].accepted);
}
