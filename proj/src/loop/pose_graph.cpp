#include "varsplat/loop/pose_graph.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "varsplat/core/errors.hpp"

namespace varsplat {

namespace {

Vec6 edge_residual(const SE3Pose& xi, const SE3Pose& xj, const SE3Pose& measured) {
    return se3_log(pose_compose(pose_inverse(measured), pose_compose(pose_inverse(xi), xj)));
}

}  // namespace

double pose_graph_residual(const std::vector<SE3Pose>& nodes,
                           const std::vector<PoseGraphEdge>& edges) {
    double total = 0.0;
    for (const PoseGraphEdge& e : edges) {
        total += e.weight * edge_residual(nodes[e.i], nodes[e.j], e.relative).squaredNorm();
    }
    return total;
}

std::vector<SE3Pose> pose_graph_optimize(const PoseGraph& graph, int max_iterations,
                                         double tolerance) {
    std::vector<SE3Pose> nodes = graph.nodes;
    const int n = static_cast<int>(nodes.size());
    if (n <= 1 || graph.edges.empty()) return nodes;

    const int dim = 6 * (n - 1);  // node 0 is the gauge
    double residual = pose_graph_residual(nodes, graph.edges);

    for (int iter = 0; iter < max_iterations; ++iter) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);

        const double fd_step = 1e-6;
        for (const PoseGraphEdge& e : graph.edges) {
            const Vec6 r0 = edge_residual(nodes[e.i], nodes[e.j], e.relative);

            // Numeric Jacobians over left perturbations of both endpoints.
            Eigen::Matrix<double, 6, 12> jac;
            for (int k = 0; k < 6; ++k) {
                Vec6 xi = Vec6::Zero();
                xi[k] = fd_step;
                const SE3Pose xi_up = pose_compose(se3_exp(xi), nodes[e.i]);
                xi[k] = -fd_step;
                const SE3Pose xi_dn = pose_compose(se3_exp(xi), nodes[e.i]);
                jac.col(k) = (edge_residual(xi_up, nodes[e.j], e.relative) -
                              edge_residual(xi_dn, nodes[e.j], e.relative)) /
                             (2.0 * fd_step);

                xi[k] = fd_step;
                const SE3Pose xj_up = pose_compose(se3_exp(xi), nodes[e.j]);
                xi[k] = -fd_step;
                const SE3Pose xj_dn = pose_compose(se3_exp(xi), nodes[e.j]);
                jac.col(6 + k) = (edge_residual(nodes[e.i], xj_up, e.relative) -
                                  edge_residual(nodes[e.i], xj_dn, e.relative)) /
                                 (2.0 * fd_step);
            }

            const int oi = e.i == 0 ? -1 : 6 * (e.i - 1);
            const int oj = e.j == 0 ? -1 : 6 * (e.j - 1);
            const Eigen::Matrix<double, 6, 6> ji = jac.leftCols<6>();
            const Eigen::Matrix<double, 6, 6> jj = jac.rightCols<6>();
            if (oi >= 0) {
                h.block<6, 6>(oi, oi) += e.weight * ji.transpose() * ji;
                b.segment<6>(oi) += e.weight * ji.transpose() * r0;
            }
            if (oj >= 0) {
                h.block<6, 6>(oj, oj) += e.weight * jj.transpose() * jj;
                b.segment<6>(oj) += e.weight * jj.transpose() * r0;
            }
            if (oi >= 0 && oj >= 0) {
                h.block<6, 6>(oi, oj) += e.weight * ji.transpose() * jj;
                h.block<6, 6>(oj, oi) += e.weight * jj.transpose() * ji;
            }
        }

        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        if (ldlt.info() != Eigen::Success ||
            ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
            throw SingularSystem("pose graph normal equations are rank-deficient beyond gauge");
        }
        const Eigen::VectorXd delta = ldlt.solve(-b);
        if (!delta.allFinite()) {
            throw SingularSystem("pose graph solve produced non-finite update");
        }

        // Step halving keeps the residual non-increasing.
        double step = 1.0;
        std::vector<SE3Pose> candidate = nodes;
        double new_residual = residual;
        for (int half = 0; half < 12; ++half) {
            for (int k = 1; k < n; ++k) {
                candidate[k] =
                    pose_compose(se3_exp(step * delta.segment<6>(6 * (k - 1))), nodes[k]);
            }
            new_residual = pose_graph_residual(candidate, graph.edges);
            if (new_residual <= residual) break;
            step *= 0.5;
        }
        if (new_residual > residual) break;  // no productive step left
        const double improvement = residual - new_residual;
        nodes = std::move(candidate);
        residual = new_residual;
        if (improvement < tolerance) break;
    }
    return nodes;
}

}  // namespace varsplat
