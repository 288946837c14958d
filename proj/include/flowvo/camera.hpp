#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "flowvo/core.hpp"
#include "flowvo/se3.hpp"

// Pinhole camera model plus the depth-image back-projection used to seed
// landmarks. Poses map world points into the camera frame.

namespace flowvo {

struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double depth_scale = 5000.0; // raw 16-bit depth units per metre
    int width = 0;
    int height = 0;
};

struct Landmark {
    Eigen::Vector3d position = Eigen::Vector3d::Zero(); // world frame
};

inline void validate_intrinsics(const CameraIntrinsics& k) {
    if (!(k.fx > 0.0) || !(k.fy > 0.0) || !(k.depth_scale > 0.0))
        throw Error(ErrorCode::InvalidInput, "intrinsics: focal lengths and depth scale must be positive");
    if (k.width <= 0 || k.height <= 0)
        throw Error(ErrorCode::InvalidInput, "intrinsics: image size must be positive");
    if (!(k.cx >= 0.0 && k.cx < k.width) || !(k.cy >= 0.0 && k.cy < k.height))
        throw Error(ErrorCode::InvalidInput, "intrinsics: principal point outside image");
}

// World point -> pixel. Empty when the point is behind the camera or lands
// outside the image rectangle.
inline std::optional<PixelPoint> project(const Landmark& lm, const SE3Pose& pose,
                                         const CameraIntrinsics& k) {
    const Eigen::Vector3d pc = transform_point(pose, lm.position);
    if (pc.z() <= 1e-6) return std::nullopt;
    const double u = k.fx * pc.x() / pc.z() + k.cx;
    const double v = k.fy * pc.y() / pc.z() + k.cy;
    if (u < 0.0 || u > k.width - 1.0 || v < 0.0 || v > k.height - 1.0) return std::nullopt;
    return PixelPoint{u, v};
}

// Pixel + raw depth -> world point. Empty when the depth reading is missing.
inline std::optional<Landmark> back_project(PixelPoint px, std::uint16_t raw_depth,
                                            const SE3Pose& pose, const CameraIntrinsics& k) {
    if (raw_depth == 0) return std::nullopt;
    const double z = static_cast<double>(raw_depth) / k.depth_scale;
    Eigen::Vector3d pc((px.x - k.cx) * z / k.fx, (px.y - k.cy) * z / k.fy, z);
    Landmark lm;
    lm.position = pose.rotation.transpose() * (pc - pose.translation);
    return lm;
}

// Plain-text intrinsics file: one data line "fx fy cx cy depth_scale width height",
// '#' starts a comment.
inline CameraIntrinsics parse_intrinsics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open intrinsics file " + path);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);

        std::vector<std::string> tokens;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            std::size_t start = i;
            while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            if (i > start) tokens.push_back(line.substr(start, i - start));
        }
        if (tokens.empty()) continue;
        if (tokens.size() != 7)
            throw Error(ErrorCode::MalformedLine, "intrinsics file: expected 7 numbers, got '" + line + "'");

        double vals[7];
        for (int t = 0; t < 7; ++t) {
            const char* begin = tokens[t].data();
            const char* end = begin + tokens[t].size();
            auto [ptr, ec] = std::from_chars(begin, end, vals[t]);
            if (ec != std::errc() || ptr != end)
                throw Error(ErrorCode::MalformedLine, "intrinsics file: bad number '" + tokens[t] + "'");
        }
        CameraIntrinsics k;
        k.fx = vals[0];
        k.fy = vals[1];
        k.cx = vals[2];
        k.cy = vals[3];
        k.depth_scale = vals[4];
        k.width = static_cast<int>(vals[5]);
        k.height = static_cast<int>(vals[6]);
        validate_intrinsics(k);
        return k;
    }
    throw Error(ErrorCode::MalformedLine, "intrinsics file: no data line in " + path);
}

} // namespace flowvo
