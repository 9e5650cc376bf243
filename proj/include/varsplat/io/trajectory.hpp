#pragma once

#include <string>
#include <vector>

#include "varsplat/core/se3.hpp"

namespace varsplat {

// Timestamped poses, timestamps strictly increasing.
struct Trajectory {
    std::vector<std::pair<double, SE3Pose>> poses;

    size_t size() const { return poses.size(); }
    bool empty() const { return poses.empty(); }
    void push(double timestamp, const SE3Pose& pose) { poses.emplace_back(timestamp, pose); }
};

// TUM text format: "timestamp tx ty tz qx qy qz qw" per line.
void save_trajectory_tum(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory_tum(const std::string& path);

}  // namespace varsplat
