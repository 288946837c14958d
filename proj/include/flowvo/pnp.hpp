#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "flowvo/camera.hpp"
#include "flowvo/core.hpp"
#include "flowvo/se3.hpp"

// Motion-only pose refinement: Gauss-Newton over the se(3) tangent with a
// Huber-weighted reprojection objective. Landmarks stay fixed; only the
// camera pose moves. Updates left-multiply the pose.

namespace flowvo {

struct PnPProblem {
    std::vector<Landmark> landmarks;
    std::vector<PixelPoint> pixels;
    CameraIntrinsics intrinsics;
    SE3Pose initial_pose;
};

struct SolverParams {
    double huber_delta_px = 2.45; // soft/robust transition of the loss
    int rounds = 4;
    int iterations_per_round = 10;
    double outlier_chi2 = 5.991;  // squared-pixel deactivation threshold
    int min_correspondences = 10;
};

struct PnPResult {
    SE3Pose pose;
    std::vector<char> active; // correspondences that back the final pose
    double mean_error_px = 0.0;
};

// Residual of one correspondence: projected minus observed, in pixels.
inline Eigen::Vector2d reprojection_residual(const SE3Pose& pose, const Landmark& lm,
                                             PixelPoint observed, const CameraIntrinsics& k) {
    const Eigen::Vector3d pc = transform_point(pose, lm.position);
    if (pc.z() <= 1e-12)
        throw Error(ErrorCode::InvalidInput, "reprojection_residual: point behind camera");
    return {k.fx * pc.x() / pc.z() + k.cx - observed.x,
            k.fy * pc.y() / pc.z() + k.cy - observed.y};
}

// d(residual)/d(twist) for a left-multiplicative update exp(xi) * pose,
// twist ordered rotation-first.
inline Eigen::Matrix<double, 2, 6> reprojection_jacobian(const SE3Pose& pose, const Landmark& lm,
                                                         const CameraIntrinsics& k) {
    const Eigen::Vector3d pc = transform_point(pose, lm.position);
    const double z = pc.z();
    if (z <= 1e-12)
        throw Error(ErrorCode::InvalidInput, "reprojection_jacobian: point behind camera");
    Eigen::Matrix<double, 2, 3> dpi;
    dpi << k.fx / z, 0.0, -k.fx * pc.x() / (z * z),
           0.0, k.fy / z, -k.fy * pc.y() / (z * z);
    Eigen::Matrix<double, 3, 6> dpc;
    dpc.leftCols<3>() = -skew(pc);
    dpc.rightCols<3>() = Eigen::Matrix3d::Identity();
    return dpi * dpc;
}

namespace detail {

inline double point_chi2(const SE3Pose& pose, const Landmark& lm, PixelPoint observed,
                         const CameraIntrinsics& k) {
    const Eigen::Vector3d pc = transform_point(pose, lm.position);
    if (pc.z() <= 1e-12) return std::numeric_limits<double>::infinity();
    const double du = k.fx * pc.x() / pc.z() + k.cx - observed.x;
    const double dv = k.fy * pc.y() / pc.z() + k.cy - observed.y;
    return du * du + dv * dv;
}

inline double mean_error(const SE3Pose& pose, const PnPProblem& prob,
                         const std::vector<char>& active) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < prob.landmarks.size(); ++i) {
        if (!active[i]) continue;
        sum += std::sqrt(point_chi2(pose, prob.landmarks[i], prob.pixels[i], prob.intrinsics));
        ++n;
    }
    return n ? sum / n : std::numeric_limits<double>::infinity();
}

} // namespace detail

inline PnPResult solve_pose(const PnPProblem& prob, const SolverParams& params = {}) {
    const std::size_t n = prob.landmarks.size();
    if (prob.pixels.size() != n)
        throw Error(ErrorCode::InvalidInput, "solve_pose: landmark/pixel count mismatch");
    if (static_cast<int>(n) < params.min_correspondences)
        throw Error(ErrorCode::InsufficientData, "solve_pose: fewer than 10 correspondences");
    validate_pose(prob.initial_pose, "solve_pose");

    SE3Pose pose = prob.initial_pose;
    std::vector<char> active(n, 1);
    double prev_mean = detail::mean_error(pose, prob, active);
    int worse_rounds = 0;

    for (int round = 0; round < params.rounds; ++round) {
        for (int it = 0; it < params.iterations_per_round; ++it) {
            Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
            Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
            std::size_t used = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!active[i]) continue;
                const Eigen::Vector3d pc = transform_point(pose, prob.landmarks[i].position);
                if (pc.z() <= 1e-12) continue;
                const Eigen::Vector2d e =
                    reprojection_residual(pose, prob.landmarks[i], prob.pixels[i], prob.intrinsics);
                const Eigen::Matrix<double, 2, 6> j =
                    reprojection_jacobian(pose, prob.landmarks[i], prob.intrinsics);
                const double norm = e.norm();
                const double w = norm <= params.huber_delta_px ? 1.0 : params.huber_delta_px / norm;
                h.noalias() += w * j.transpose() * j;
                g.noalias() += w * j.transpose() * e;
                ++used;
            }
            if (used < 3) break;
            const Eigen::Matrix<double, 6, 1> delta = h.ldlt().solve(-g);
            if (!delta.allFinite()) break;
            Twist xi;
            xi.phi = delta.head<3>();
            xi.rho = delta.tail<3>();
            pose = compose(exp_map(xi), pose);
            if (delta.norm() < 1e-12) break;
        }

        // Re-evaluate every correspondence: dropped ones may come back.
        for (std::size_t i = 0; i < n; ++i) {
            const double chi2 =
                detail::point_chi2(pose, prob.landmarks[i], prob.pixels[i], prob.intrinsics);
            active[i] = chi2 <= params.outlier_chi2 ? 1 : 0;
        }
        const double round_mean = detail::mean_error(pose, prob, active);
        // growth must clear a tolerance: at the converged plateau the mean
        // wobbles by rounding noise as borderline points flip in and out
        if (round_mean > prev_mean + std::max(1e-9, 1e-6 * prev_mean)) {
            if (++worse_rounds >= 3)
                throw Error(ErrorCode::Diverged, "solve_pose: error grew for 3 rounds");
        } else {
            worse_rounds = 0;
        }
        prev_mean = round_mean;
    }

    PnPResult res;
    res.pose = pose;
    res.active = active;
    res.mean_error_px = detail::mean_error(pose, prob, active);

    // The refined pose must not be worse than the starting point on the
    // final active set; fall back to the initial pose if it ever is.
    const double initial_mean = detail::mean_error(prob.initial_pose, prob, active);
    if (res.mean_error_px > initial_mean) {
        res.pose = prob.initial_pose;
        for (std::size_t i = 0; i < n; ++i) {
            const double chi2 = detail::point_chi2(res.pose, prob.landmarks[i], prob.pixels[i],
                                                   prob.intrinsics);
            res.active[i] = chi2 <= params.outlier_chi2 ? 1 : 0;
        }
        res.mean_error_px = detail::mean_error(res.pose, prob, res.active);
    }
    return res;
}

} // namespace flowvo
