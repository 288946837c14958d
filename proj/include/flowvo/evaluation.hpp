#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flowvo/core.hpp"
#include "flowvo/dataset.hpp"
#include "flowvo/se3.hpp"
#include "flowvo/trajectory.hpp"

// Trajectory accuracy metrics: absolute trajectory error after optional rigid
// alignment, and relative pose error over a fixed frame interval.

namespace flowvo {

struct EvalReport {
    double ate_rmse = 0.0;
    double ate_mean = 0.0;
    double ate_median = 0.0;
    double ate_max = 0.0;
    double rpe_trans_rmse = 0.0; // metres per interval
    double rpe_rot_rmse = 0.0;   // radians per interval
    int matched_pose_count = 0;
    int rpe_delta = 0;
    bool aligned = false;
};

namespace detail {

inline std::vector<std::pair<int, int>> associate_trajectories(const Trajectory& est,
                                                               const Trajectory& gt) {
    std::vector<double> ta, tb;
    ta.reserve(est.size());
    tb.reserve(gt.size());
    for (const auto& e : est) ta.push_back(e.timestamp);
    for (const auto& g : gt) tb.push_back(g.timestamp);
    return associate_timestamps(ta, tb);
}

} // namespace detail

// Least-squares rigid transform A minimizing sum ||trans(gt) - A*trans(est)||^2
// over timestamp-associated pairs (rotation from the SVD of the centred
// cross-covariance, no scale).
inline SE3Pose align_rigid(const Trajectory& est, const Trajectory& gt) {
    const auto pairs = detail::associate_trajectories(est, gt);
    if (pairs.size() < 3)
        throw Error(ErrorCode::InsufficientOverlap, "align_rigid: fewer than 3 associated pairs");

    Eigen::Vector3d ce = Eigen::Vector3d::Zero(), cg = Eigen::Vector3d::Zero();
    for (const auto& [i, j] : pairs) {
        ce += est[i].pose.translation;
        cg += gt[j].pose.translation;
    }
    ce /= static_cast<double>(pairs.size());
    cg /= static_cast<double>(pairs.size());

    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (const auto& [i, j] : pairs)
        h.noalias() += (est[i].pose.translation - ce) * (gt[j].pose.translation - cg).transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    // Collinear (or coincident) translation clouds leave the rotation about
    // the line unconstrained.
    if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300) || sv(0) <= 1e-15)
        throw Error(ErrorCode::DegenerateGeometry, "align_rigid: translation cloud is degenerate");

    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    Eigen::Vector3d d(1.0, 1.0, (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
    SE3Pose a;
    a.rotation = v * d.asDiagonal() * u.transpose();
    a.translation = cg - a.rotation * ce;
    return a;
}

inline EvalReport ate_rmse(const Trajectory& est, const Trajectory& gt, bool align) {
    const auto pairs = detail::associate_trajectories(est, gt);
    if (pairs.empty())
        throw Error(ErrorCode::InsufficientOverlap, "ate_rmse: no associated pairs");

    SE3Pose a; // identity when alignment is off
    if (align) a = align_rigid(est, gt);

    std::vector<double> err;
    err.reserve(pairs.size());
    double sq_sum = 0.0, sum = 0.0, max_err = 0.0;
    for (const auto& [i, j] : pairs) {
        const Eigen::Vector3d mapped = a.rotation * est[i].pose.translation + a.translation;
        const double e = (gt[j].pose.translation - mapped).norm();
        err.push_back(e);
        sq_sum += e * e;
        sum += e;
        max_err = std::max(max_err, e);
    }
    std::sort(err.begin(), err.end());
    EvalReport rep;
    rep.matched_pose_count = static_cast<int>(pairs.size());
    rep.aligned = align;
    rep.ate_rmse = std::sqrt(sq_sum / err.size());
    rep.ate_mean = sum / err.size();
    rep.ate_median = err.size() % 2 ? err[err.size() / 2]
                                    : 0.5 * (err[err.size() / 2 - 1] + err[err.size() / 2]);
    rep.ate_max = max_err;
    return rep;
}

// Per-pair ATE series for plotting: (timestamp, error in metres).
inline std::vector<std::pair<double, double>> ate_series(const Trajectory& est,
                                                         const Trajectory& gt, bool align) {
    const auto pairs = detail::associate_trajectories(est, gt);
    if (pairs.empty())
        throw Error(ErrorCode::InsufficientOverlap, "ate_series: no associated pairs");
    SE3Pose a;
    if (align) a = align_rigid(est, gt);
    std::vector<std::pair<double, double>> out;
    out.reserve(pairs.size());
    for (const auto& [i, j] : pairs) {
        const Eigen::Vector3d mapped = a.rotation * est[i].pose.translation + a.translation;
        out.emplace_back(est[i].timestamp, (gt[j].pose.translation - mapped).norm());
    }
    return out;
}

inline EvalReport rpe(const Trajectory& est, const Trajectory& gt, int delta_frames) {
    if (delta_frames < 1) throw Error(ErrorCode::InvalidInput, "rpe: delta must be >= 1");
    const auto pairs = detail::associate_trajectories(est, gt);
    if (static_cast<int>(pairs.size()) < delta_frames + 1)
        throw Error(ErrorCode::InsufficientOverlap, "rpe: fewer than delta+1 associated pairs");

    double tr_sq = 0.0, rot_sq = 0.0;
    const int n = static_cast<int>(pairs.size()) - delta_frames;
    for (int k = 0; k < n; ++k) {
        const auto& [i0, j0] = pairs[k];
        const auto& [i1, j1] = pairs[k + delta_frames];
        const SE3Pose rel_est = compose(inverse(est[i0].pose), est[i1].pose);
        const SE3Pose rel_gt = compose(inverse(gt[j0].pose), gt[j1].pose);
        const SE3Pose err = compose(inverse(rel_gt), rel_est);
        tr_sq += err.translation.squaredNorm();
        // rotation angle via the chordal distance: exactly zero for
        // bitwise-equal rotations, where forming R_g^T R_e first would turn
        // rounding noise into sqrt(eps)-sized angles through acos
        const double chord = (rel_est.rotation - rel_gt.rotation).norm();
        const double angle = 2.0 * std::asin(std::min(1.0, chord / (2.0 * M_SQRT2)));
        rot_sq += angle * angle;
    }
    EvalReport rep;
    rep.matched_pose_count = static_cast<int>(pairs.size());
    rep.rpe_delta = delta_frames;
    rep.rpe_trans_rmse = std::sqrt(tr_sq / n);
    rep.rpe_rot_rmse = std::sqrt(rot_sq / n);
    return rep;
}

// ATE and RPE in one report.
inline EvalReport evaluate(const Trajectory& est, const Trajectory& gt, bool align,
                           int rpe_delta) {
    EvalReport rep = ate_rmse(est, gt, align);
    const EvalReport r = rpe(est, gt, rpe_delta);
    rep.rpe_trans_rmse = r.rpe_trans_rmse;
    rep.rpe_rot_rmse = r.rpe_rot_rmse;
    rep.rpe_delta = r.rpe_delta;
    return rep;
}

inline std::string format_report_text(const EvalReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "matched poses:      %d\n"
                  "alignment:          %s\n"
                  "ATE RMSE [m]:       %.6f\n"
                  "ATE mean [m]:       %.6f\n"
                  "ATE median [m]:     %.6f\n"
                  "ATE max [m]:        %.6f\n"
                  "RPE delta [frames]: %d\n"
                  "RPE trans RMSE [m]: %.6f\n"
                  "RPE rot RMSE [rad]: %.6f\n",
                  r.matched_pose_count, r.aligned ? "rigid" : "none", r.ate_rmse, r.ate_mean,
                  r.ate_median, r.ate_max, r.rpe_delta, r.rpe_trans_rmse, r.rpe_rot_rmse);
    return buf;
}

inline std::string format_report_kv(const EvalReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "matched_pose_count=%d\n"
                  "aligned=%d\n"
                  "ate_rmse=%.9f\n"
                  "ate_mean=%.9f\n"
                  "ate_median=%.9f\n"
                  "ate_max=%.9f\n"
                  "rpe_delta=%d\n"
                  "rpe_trans_rmse=%.9f\n"
                  "rpe_rot_rmse=%.9f\n",
                  r.matched_pose_count, r.aligned ? 1 : 0, r.ate_rmse, r.ate_mean, r.ate_median,
                  r.ate_max, r.rpe_delta, r.rpe_trans_rmse, r.rpe_rot_rmse);
    return buf;
}

} // namespace flowvo
