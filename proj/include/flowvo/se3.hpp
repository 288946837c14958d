#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "flowvo/core.hpp"

// Minimal SE(3) toolkit: exponential/logarithm maps between twists and rigid
// poses, composition, inversion, and relative pose. Twists store the rotation
// part first. Poses act as p_out = R * p_in + t.

namespace flowvo {

struct Twist {
    Eigen::Vector3d phi = Eigen::Vector3d::Zero(); // rotation (axis * angle)
    Eigen::Vector3d rho = Eigen::Vector3d::Zero(); // translation parameters
};

struct SE3Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static SE3Pose identity() { return {}; }
};

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

// Angle below which exp/log switch to second-order Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;
// Allowed orthonormality drift before a rotation is considered invalid.
inline constexpr double kRotationTolerance = 1e-9;

inline bool is_valid_rotation(const Eigen::Matrix3d& r, double tol = kRotationTolerance) {
    if (!r.allFinite()) return false;
    Eigen::Matrix3d gram = r.transpose() * r;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return r.determinant() > 0.0;
}

// Nearest rotation matrix in the Frobenius sense via polar decomposition.
inline Eigen::Matrix3d reorthonormalize(const Eigen::Matrix3d& r) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    Eigen::Vector3d s(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
    return u * s.asDiagonal() * v.transpose();
}

inline void validate_pose(const SE3Pose& p, const char* where) {
    if (!p.translation.allFinite() || !is_valid_rotation(p.rotation))
        throw Error(ErrorCode::InvalidInput, std::string(where) + ": not a valid rigid pose");
}

inline SE3Pose exp_map(const Twist& xi) {
    if (!xi.phi.allFinite() || !xi.rho.allFinite())
        throw Error(ErrorCode::InvalidInput, "exp_map: non-finite twist");
    const double theta = xi.phi.norm();
    const Eigen::Matrix3d w = skew(xi.phi);
    const Eigen::Matrix3d w2 = w * w;
    Eigen::Matrix3d r, j;
    if (theta < kSmallAngle) {
        r = Eigen::Matrix3d::Identity() + w + 0.5 * w2;
        j = Eigen::Matrix3d::Identity() + 0.5 * w + w2 / 6.0;
    } else {
        const double t2 = theta * theta;
        const double a = std::sin(theta) / theta;
        const double b = (1.0 - std::cos(theta)) / t2;
        const double c = (theta - std::sin(theta)) / (t2 * theta);
        r = Eigen::Matrix3d::Identity() + a * w + b * w2;
        j = Eigen::Matrix3d::Identity() + b * w + c * w2;
    }
    SE3Pose out;
    out.rotation = r;
    out.translation = j * xi.rho;
    return out;
}

inline Twist log_map(const SE3Pose& p) {
    validate_pose(p, "log_map");
    const Eigen::Matrix3d& r = p.rotation;
    const Eigen::Vector3d vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    // the sine comes from the skew part and the angle from atan2: acos alone
    // loses half the significant digits as the angle approaches pi
    const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double sin_theta = 0.5 * vee.norm();
    const double theta = std::atan2(sin_theta, cos_theta);
    if (theta > M_PI - 1e-6)
        throw Error(ErrorCode::NearSingularRotation, "log_map: rotation angle too close to pi");

    Twist xi;
    Eigen::Matrix3d jinv;
    if (theta < kSmallAngle) {
        xi.phi = 0.5 * vee;
        const Eigen::Matrix3d w = skew(xi.phi);
        jinv = Eigen::Matrix3d::Identity() - 0.5 * w + (w * w) / 12.0;
    } else {
        xi.phi = (theta / (2.0 * sin_theta)) * vee;
        const Eigen::Matrix3d w = skew(xi.phi);
        // cot(theta/2)/(2 theta) form of the jacobian coefficient avoids the
        // 1 + cos(theta) cancellation near pi
        const double c = 1.0 / (theta * theta) -
                         0.5 * std::cos(0.5 * theta) / (theta * std::sin(0.5 * theta));
        jinv = Eigen::Matrix3d::Identity() - 0.5 * w + c * (w * w);
    }
    xi.rho = jinv * p.translation;
    return xi;
}

inline SE3Pose compose(const SE3Pose& a, const SE3Pose& b) {
    SE3Pose out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    Eigen::Matrix3d gram = out.rotation.transpose() * out.rotation;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > kRotationTolerance)
        out.rotation = reorthonormalize(out.rotation);
    return out;
}

inline SE3Pose inverse(const SE3Pose& p) {
    SE3Pose out;
    out.rotation = p.rotation.transpose();
    out.translation = -(out.rotation * p.translation);
    return out;
}

// Pose of `current` expressed in the frame of `reference`.
inline SE3Pose relative(const SE3Pose& current, const SE3Pose& reference) {
    return compose(current, inverse(reference));
}

inline Eigen::Vector3d transform_point(const SE3Pose& p, const Eigen::Vector3d& x) {
    return p.rotation * x + p.translation;
}

} // namespace flowvo
