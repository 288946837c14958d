#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "flowvo/core.hpp"
#include "flowvo/se3.hpp"

// Trajectory file handling in the TUM line format:
//   timestamp tx ty tz qx qy qz qw
// Poses in these files are camera-to-world.

namespace flowvo {

struct TrajectoryEntry {
    double timestamp = 0.0;
    SE3Pose pose; // camera-to-world
};

using Trajectory = std::vector<TrajectoryEntry>;

namespace detail {

inline bool parse_double(const char*& p, const char* end, double& out) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    const auto [next, ec] = std::from_chars(p, end, out);
    if (ec != std::errc{}) return false;
    p = next;
    return true;
}

} // namespace detail

inline Trajectory read_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open trajectory " + path);
    Trajectory traj;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const char* p = line.c_str();
        const char* end = p + line.size();
        while (p < end && (*p == ' ' || *p == '\t')) ++p;
        if (p == end || *p == '#') continue;

        double v[8];
        for (double& x : v)
            if (!detail::parse_double(p, end, x))
                throw Error(ErrorCode::MalformedLine,
                            path + ":" + std::to_string(line_no) + ": expected 8 numbers");

        const double qx = v[4], qy = v[5], qz = v[6], qw = v[7];
        const double norm = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
        if (std::abs(norm - 1.0) >= 1e-3)
            throw Error(ErrorCode::NonUnitQuaternion,
                        path + ":" + std::to_string(line_no) + ": quaternion norm " +
                            std::to_string(norm));

        Eigen::Quaterniond q(qw, qx, qy, qz);
        q.normalize();
        TrajectoryEntry e;
        e.timestamp = v[0];
        e.pose.rotation = q.toRotationMatrix();
        e.pose.translation = Eigen::Vector3d(v[1], v[2], v[3]);
        traj.push_back(e);
    }
    return traj;
}

inline void write_trajectory(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::MissingFile, "cannot open " + path + " for writing");
    char buf[256];
    for (const auto& e : traj) {
        Eigen::Quaterniond q(e.pose.rotation);
        q.normalize();
        if (q.w() < 0.0) q.coeffs() = -q.coeffs(); // one canonical sign per pose
        std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f\n",
                      e.timestamp, e.pose.translation.x(), e.pose.translation.y(),
                      e.pose.translation.z(), q.x(), q.y(), q.z(), q.w());
        out << buf;
    }
}

} // namespace flowvo
