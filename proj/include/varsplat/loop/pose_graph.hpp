#pragma once

#include <vector>

#include "varsplat/core/se3.hpp"

namespace varsplat {

struct PoseGraphEdge {
    int i = 0, j = 0;
    SE3Pose relative;     // measured X_i^-1 * X_j
    double weight = 1.0;  // information weight
};

struct PoseGraph {
    std::vector<SE3Pose> nodes;  // world anchor poses
    std::vector<PoseGraphEdge> edges;
};

// Gauss-Newton over edge residuals log(Z^-1 X_i^-1 X_j), first node fixed,
// step halving keeps the total residual non-increasing. Throws
// SingularSystem when the normal equations are rank-deficient beyond the
// gauge (e.g. a disconnected graph).
std::vector<SE3Pose> pose_graph_optimize(const PoseGraph& graph, int max_iterations = 50,
                                         double tolerance = 1e-12);

// Total weighted squared residual of a node configuration.
double pose_graph_residual(const std::vector<SE3Pose>& nodes,
                           const std::vector<PoseGraphEdge>& edges);

}  // namespace varsplat
