#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "flowvo/camera.hpp"
#include "flowvo/core.hpp"
#include "flowvo/trajectory.hpp"

// TUM-format RGB-D sequence access: timestamped image lists, greedy
// timestamp association, ground truth and intrinsics discovery.

namespace flowvo {

struct SequenceEntry {
    double timestamp = 0.0;
    std::string path; // absolute
};

struct SequenceHandle {
    std::filesystem::path root;
    std::vector<SequenceEntry> rgb;
    std::vector<SequenceEntry> depth;
    std::optional<Trajectory> groundtruth;
    CameraIntrinsics intrinsics;
};

inline constexpr double kAssociationMaxDt = 0.02;

namespace detail {

inline std::vector<SequenceEntry> read_image_list(const std::filesystem::path& file,
                                                  const std::filesystem::path& root) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::MissingFile, file.filename().string() + " missing in " +
                                                     root.string());
    std::vector<SequenceEntry> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string first;
        if (!(ss >> first) || first[0] == '#') continue;
        SequenceEntry e;
        const char* p = first.c_str();
        const auto [next, ec] = std::from_chars(p, p + first.size(), e.timestamp);
        std::string rel;
        if (ec != std::errc{} || next != p + first.size() || !(ss >> rel))
            throw Error(ErrorCode::MalformedLine, file.filename().string() + ":" +
                                                      std::to_string(line_no) +
                                                      ": expected 'timestamp filename'");
        e.path = (root / rel).string();
        if (!out.empty() && e.timestamp <= out.back().timestamp)
            throw Error(ErrorCode::MalformedLine, file.filename().string() + ":" +
                                                      std::to_string(line_no) +
                                                      ": timestamps not strictly increasing");
        out.push_back(std::move(e));
    }
    return out;
}

// fx fy cx cy for the known camera families; depth scale and image size are
// shared across all of them.
inline CameraIntrinsics default_intrinsics(const std::string& dir_name) {
    std::string s = dir_name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    auto has = [&](const char* needle) { return s.find(needle) != std::string::npos; };
    CameraIntrinsics k;
    k.depth_scale = 5000.0;
    k.width = 640;
    k.height = 480;
    if (has("freiburg1") || has("fr1")) {
        k.fx = 517.3; k.fy = 516.5; k.cx = 318.6; k.cy = 255.3;
    } else if (has("freiburg2") || has("fr2")) {
        k.fx = 520.9; k.fy = 521.0; k.cx = 325.1; k.cy = 249.7;
    } else if (has("freiburg3") || has("fr3")) {
        k.fx = 535.4; k.fy = 539.2; k.cx = 320.1; k.cy = 247.6;
    } else if (has("icl") || has("living") || has("office") || has("lr_kt") || has("of_kt")) {
        k.fx = 481.2; k.fy = 480.0; k.cx = 319.5; k.cy = 239.5;
    } else {
        k.fx = 525.0; k.fy = 525.0; k.cx = 319.5; k.cy = 239.5;
    }
    return k;
}

} // namespace detail

inline SequenceHandle load_sequence(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw Error(ErrorCode::MissingFile, "dataset directory not found: " + dir.string());
    SequenceHandle h;
    h.root = dir;
    h.rgb = detail::read_image_list(dir / "rgb.txt", dir);
    h.depth = detail::read_image_list(dir / "depth.txt", dir);
    if (std::filesystem::exists(dir / "groundtruth.txt"))
        h.groundtruth = read_trajectory((dir / "groundtruth.txt").string());
    if (std::filesystem::exists(dir / "calibration.txt"))
        h.intrinsics = parse_intrinsics((dir / "calibration.txt").string());
    else
        h.intrinsics = detail::default_intrinsics(dir.string());
    return h;
}

// Greedy nearest-timestamp pairing between two sorted timestamp lists. Every
// entry is used at most once; |dt| ties prefer the earlier entry on both
// sides. Returns index pairs sorted by the first list's timestamps.
inline std::vector<std::pair<int, int>> associate_timestamps(const std::vector<double>& a,
                                                             const std::vector<double>& b,
                                                             double max_dt = kAssociationMaxDt) {
    struct Cand {
        double dt;
        int i, j;
    };
    std::vector<Cand> cands;
    int lo = 0;
    for (int i = 0; i < static_cast<int>(a.size()); ++i) {
        while (lo < static_cast<int>(b.size()) && b[lo] < a[i] - max_dt) ++lo;
        for (int j = lo; j < static_cast<int>(b.size()) && b[j] <= a[i] + max_dt; ++j)
            cands.push_back({std::abs(a[i] - b[j]), i, j});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
        if (x.dt != y.dt) return x.dt < y.dt;
        if (x.i != y.i) return x.i < y.i;
        return x.j < y.j;
    });
    std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
    std::vector<std::pair<int, int>> pairs;
    for (const auto& c : cands) {
        if (used_a[c.i] || used_b[c.j]) continue;
        used_a[c.i] = used_b[c.j] = 1;
        pairs.emplace_back(c.i, c.j);
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

inline std::vector<std::pair<int, int>> associate(const SequenceHandle& h,
                                                  double max_dt = kAssociationMaxDt) {
    std::vector<double> rgb_ts, depth_ts;
    rgb_ts.reserve(h.rgb.size());
    depth_ts.reserve(h.depth.size());
    for (const auto& e : h.rgb) rgb_ts.push_back(e.timestamp);
    for (const auto& e : h.depth) depth_ts.push_back(e.timestamp);
    return associate_timestamps(rgb_ts, depth_ts, max_dt);
}

} // namespace flowvo
