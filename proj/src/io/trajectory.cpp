#include "varsplat/io/trajectory.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "varsplat/core/errors.hpp"

namespace varsplat {

void save_trajectory_tum(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for write: " + path);
    char line[256];
    for (const auto& [ts, pose] : traj.poses) {
        std::snprintf(line, sizeof(line), "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", ts,
                      pose.translation.x(), pose.translation.y(), pose.translation.z(),
                      pose.rotation.x(), pose.rotation.y(), pose.rotation.z(), pose.rotation.w());
        out << line;
    }
    if (!out) throw IoError("write failed: " + path);
}

Trajectory load_trajectory_tum(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    Trajectory traj;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        double ts, tx, ty, tz, qx, qy, qz, qw;
        if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) continue;
        SE3Pose pose;
        pose.translation = Vec3(tx, ty, tz);
        pose.rotation = Quat(qw, qx, qy, qz).normalized();
        traj.push(ts, pose);
    }
    std::sort(traj.poses.begin(), traj.poses.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return traj;
}

}  // namespace varsplat
