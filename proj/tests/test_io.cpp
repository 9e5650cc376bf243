#include <opencv2/imgcodecs.hpp>
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "varsplat/core/errors.hpp"
#include "varsplat/io/pfm.hpp"
#include "varsplat/io/png_io.hpp"
#include "varsplat/io/submap_io.hpp"
#include "varsplat/io/trajectory.hpp"
#include "varsplat/io/tum.hpp"
#include "test_helpers.hpp"

using namespace varsplat;
using namespace varsplat::testutil;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("varsplat_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("pfm round trip is bit exact") {
    TempDir dir;
    std::mt19937 rng(3);
    std::uniform_real_distribution<float> u(-10.f, 10.f);
    ImageF img(7, 5, 3);
    for (float& v : img.data) v = u(rng);

    const std::string path = (dir.path / "x.pfm").string();
    write_pfm(path, img);
    const ImageF back = read_pfm(path);
    REQUIRE(back.same_shape(img));
    CHECK(back.data == img.data);

    ImageF gray(4, 6, 1);
    for (float& v : gray.data) v = u(rng);
    write_pfm(path, gray);
    const ImageF gback = read_pfm(path);
    CHECK(gback.channels == 1);
    CHECK(gback.data == gray.data);
}

TEST_CASE("png color round trip within quantization") {
    TempDir dir;
    ImageF img(9, 4, 3);
    std::mt19937 rng(5);
    std::uniform_real_distribution<float> u(0.f, 1.f);
    for (float& v : img.data) v = u(rng);

    const std::string path = (dir.path / "x.png").string();
    save_png_color(path, img);
    const ImageF back = load_png_color(path);
    REQUIRE(back.same_shape(img));
    for (size_t i = 0; i < img.data.size(); ++i) {
        CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5f / 255.f + 1e-6f);
    }
}

TEST_CASE("submap binary round trip") {
    TempDir dir;
    std::mt19937 rng(7);
    Submap submap;
    submap.id = 3;
    submap.anchor_pose = random_pose(rng);
    submap.creation_frame = 42;
    submap.keyframe_ids = {1, 5, 9};
    for (int i = 0; i < 20; ++i) {
        submap.splats.push_back(random_splat(rng));
        submap.reg_scale_targets.push_back(0.1);
    }
    SubmapSidecar sidecar;
    sidecar.keyframe_poses = {random_pose(rng), random_pose(rng), random_pose(rng)};

    const std::string base = (dir.path / "sm").string();
    save_submap(base, submap, sidecar);

    SubmapSidecar side_back;
    const Submap back = load_submap(base, &side_back);
    CHECK(back.id == 3);
    CHECK(back.creation_frame == 42);
    CHECK(back.keyframe_ids == submap.keyframe_ids);
    REQUIRE(back.size() == submap.size());
    for (size_t i = 0; i < submap.size(); ++i) {
        // Stored as f32.
        CHECK((back.splats[i].mean - submap.splats[i].mean).norm() < 1e-6);
        CHECK(std::abs(back.splats[i].opacity_logit - submap.splats[i].opacity_logit) < 1e-6);
        CHECK((back.splats[i].log_variance - submap.splats[i].log_variance).norm() < 1e-6);
    }
    REQUIRE(side_back.keyframe_poses.size() == 3);
    CHECK((side_back.keyframe_poses[1].translation - sidecar.keyframe_poses[1].translation)
              .norm() < 1e-12);

    // First bytes carry the magic.
    std::ifstream in(base + ".vspl", std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "VSPL");
}

TEST_CASE("trajectory TUM round trip") {
    TempDir dir;
    std::mt19937 rng(11);
    Trajectory traj;
    for (int i = 0; i < 25; ++i) traj.push(0.1 * i, random_pose(rng));

    const std::string path = (dir.path / "traj.txt").string();
    save_trajectory_tum(path, traj);
    const Trajectory back = load_trajectory_tum(path);
    REQUIRE(back.size() == traj.size());
    for (size_t i = 0; i < traj.size(); ++i) {
        CHECK(std::abs(back.poses[i].first - traj.poses[i].first) < 1e-9);
        CHECK((back.poses[i].second.translation - traj.poses[i].second.translation).norm() <
              1e-8);
        CHECK(back.poses[i].second.rotation.angularDistance(traj.poses[i].second.rotation) <
              1e-8);
    }
}

TEST_CASE("tum loader associates by timestamp and scales depth") {
    TempDir dir;
    // Three aligned pairs plus one rgb with no depth partner.
    cv::Mat color(8, 8, CV_8UC3, cv::Scalar(10, 20, 30));
    cv::Mat depth(8, 8, CV_16UC1, cv::Scalar(5000));  // 1 m
    fs::create_directories(dir.path / "rgb");
    fs::create_directories(dir.path / "depth");
    std::ofstream rgb_idx(dir.path / "rgb.txt");
    std::ofstream depth_idx(dir.path / "depth.txt");
    rgb_idx << "# comment line\n";
    for (int i = 0; i < 3; ++i) {
        const std::string cname = "rgb/" + std::to_string(i) + ".png";
        const std::string dname = "depth/" + std::to_string(i) + ".png";
        cv::imwrite((dir.path / cname).string(), color);
        cv::imwrite((dir.path / dname).string(), depth);
        rgb_idx << (100.0 + i) << " " << cname << "\n";
        depth_idx << (100.0 + i + 0.008) << " " << dname << "\n";
    }
    rgb_idx << "200.0 rgb/0.png\n";  // no depth within 0.02 s
    rgb_idx.close();
    depth_idx.close();
    std::ofstream gt(dir.path / "groundtruth.txt");
    gt << "100.0 0 0 0 0 0 0 1\n100.1 0.1 0 0 0 0 0 1\n100.2 0.2 0 0 0 0 0 1\n";
    gt.close();

    CameraIntrinsics intr{4.0, 4.0, 4.0, 4.0, 8, 8};
    const TumDataset data = load_tum_dataset(dir.path.string(), intr, 0, 1);
    CHECK(data.frames.size() == 3);
    CHECK(data.dropped_frames == 1);
    CHECK(data.ground_truth.size() == 3);
    CHECK(data.frames[0].depth.at(3, 3) == doctest::Approx(1.0f));
    CHECK(data.frames[0].color.at(3, 3, 0) == doctest::Approx(30 / 255.f));  // BGR -> RGB

    // Shuffled index files associate identically (loader sorts).
    std::ofstream rgb2(dir.path / "rgb.txt");
    rgb2 << "102.0 rgb/2.png\n200.0 rgb/0.png\n100.0 rgb/0.png\n101.0 rgb/1.png\n";
    rgb2.close();
    const TumDataset shuffled = load_tum_dataset(dir.path.string(), intr, 0, 1);
    CHECK(shuffled.frames.size() == 3);
    CHECK(shuffled.frames[1].timestamp == doctest::Approx(101.0));

    CHECK_THROWS_AS((void)load_tum_dataset((dir.path / "nope").string(), intr, 0, 1),
                    MissingIndexFile);
}
