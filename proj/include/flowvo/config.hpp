#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "flowvo/clahe.hpp"
#include "flowvo/core.hpp"
#include "flowvo/fast.hpp"
#include "flowvo/klt.hpp"
#include "flowvo/pnp.hpp"
#include "flowvo/refine.hpp"

// Pipeline configuration: defaults here, overridable from a flat
// `key = value` text file and from CLI flags.

namespace flowvo {

struct PipelineConfig {
    int max_keypoints = 1000;
    int redetect_threshold = 300; // redetect when post-refine inliers drop below
    double frame_interval = 1.0 / 30.0;
    std::uint32_t seed = 42;
    ClaheParams clahe;
    DetectorParams detector;
    TrackerConfig tracker;
    GmsParams gms;
    RansacParams ransac;
    SolverParams solver;
};

inline void validate_config(const PipelineConfig& c) {
    if (c.redetect_threshold >= c.max_keypoints)
        throw Error(ErrorCode::ConfigError, "redetect_threshold must be < max_keypoints");
    if (c.max_keypoints < 1 || c.tracker.half_window < 1 || c.solver.rounds < 1)
        throw Error(ErrorCode::ConfigError, "config values out of range");
}

namespace detail {

inline bool parse_value(const std::string& s, double& out) {
    const char* b = s.data();
    const auto [p, ec] = std::from_chars(b, b + s.size(), out);
    return ec == std::errc{} && p == b + s.size();
}
inline bool parse_value(const std::string& s, int& out) {
    const char* b = s.data();
    const auto [p, ec] = std::from_chars(b, b + s.size(), out);
    return ec == std::errc{} && p == b + s.size();
}
inline bool parse_value(const std::string& s, std::uint32_t& out) {
    const char* b = s.data();
    const auto [p, ec] = std::from_chars(b, b + s.size(), out);
    return ec == std::errc{} && p == b + s.size();
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace detail

// Applies one key=value pair; throws ConfigError for unknown keys or
// unparseable values.
inline void apply_config_entry(PipelineConfig& c, const std::string& key,
                               const std::string& value) {
    bool ok = false;
    if (key == "max_keypoints") ok = detail::parse_value(value, c.max_keypoints);
    else if (key == "redetect_threshold") ok = detail::parse_value(value, c.redetect_threshold);
    else if (key == "frame_interval") ok = detail::parse_value(value, c.frame_interval);
    else if (key == "seed") ok = detail::parse_value(value, c.seed);
    else if (key == "clahe.clip_limit") ok = detail::parse_value(value, c.clahe.clip_limit);
    else if (key == "clahe.tiles_x") ok = detail::parse_value(value, c.clahe.tiles_x);
    else if (key == "clahe.tiles_y") ok = detail::parse_value(value, c.clahe.tiles_y);
    else if (key == "detector.threshold") ok = detail::parse_value(value, c.detector.threshold);
    else if (key == "detector.fallback_threshold")
        ok = detail::parse_value(value, c.detector.fallback_threshold);
    else if (key == "detector.cell_size") ok = detail::parse_value(value, c.detector.cell_size);
    else if (key == "detector.mask_cell") ok = detail::parse_value(value, c.detector.mask_cell);
    else if (key == "tracker.half_window") ok = detail::parse_value(value, c.tracker.half_window);
    else if (key == "tracker.max_iterations")
        ok = detail::parse_value(value, c.tracker.max_iterations);
    else if (key == "tracker.min_window_error")
        ok = detail::parse_value(value, c.tracker.min_window_error);
    else if (key == "tracker.min_eigenvalue")
        ok = detail::parse_value(value, c.tracker.min_eigenvalue);
    else if (key == "gms.grid_cols") ok = detail::parse_value(value, c.gms.grid_cols);
    else if (key == "gms.grid_rows") ok = detail::parse_value(value, c.gms.grid_rows);
    else if (key == "gms.alpha") ok = detail::parse_value(value, c.gms.alpha);
    else if (key == "ransac.threshold_px") ok = detail::parse_value(value, c.ransac.threshold_px);
    else if (key == "ransac.confidence") ok = detail::parse_value(value, c.ransac.confidence);
    else if (key == "ransac.max_iterations")
        ok = detail::parse_value(value, c.ransac.max_iterations);
    else if (key == "solver.huber_delta_px")
        ok = detail::parse_value(value, c.solver.huber_delta_px);
    else if (key == "solver.rounds") ok = detail::parse_value(value, c.solver.rounds);
    else if (key == "solver.iterations_per_round")
        ok = detail::parse_value(value, c.solver.iterations_per_round);
    else if (key == "solver.outlier_chi2") ok = detail::parse_value(value, c.solver.outlier_chi2);
    else if (key == "solver.min_correspondences")
        ok = detail::parse_value(value, c.solver.min_correspondences);
    else
        throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    if (!ok)
        throw Error(ErrorCode::ConfigError, "bad value for '" + key + "': '" + value + "'");
}

inline PipelineConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file " + path);
    PipelineConfig c;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ConfigError,
                        path + ":" + std::to_string(line_no) + ": expected key = value");
        apply_config_entry(c, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
    validate_config(c);
    return c;
}

// Full key=value dump, one line each, in declaration order. Embedded in the
// run manifest so a run can be reproduced from it alone.
inline std::string serialize_config(const PipelineConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "max_keypoints = " << c.max_keypoints << '\n'
       << "redetect_threshold = " << c.redetect_threshold << '\n'
       << "frame_interval = " << c.frame_interval << '\n'
       << "seed = " << c.seed << '\n'
       << "clahe.clip_limit = " << c.clahe.clip_limit << '\n'
       << "clahe.tiles_x = " << c.clahe.tiles_x << '\n'
       << "clahe.tiles_y = " << c.clahe.tiles_y << '\n'
       << "detector.threshold = " << c.detector.threshold << '\n'
       << "detector.fallback_threshold = " << c.detector.fallback_threshold << '\n'
       << "detector.cell_size = " << c.detector.cell_size << '\n'
       << "detector.mask_cell = " << c.detector.mask_cell << '\n'
       << "tracker.half_window = " << c.tracker.half_window << '\n'
       << "tracker.max_iterations = " << c.tracker.max_iterations << '\n'
       << "tracker.min_window_error = " << c.tracker.min_window_error << '\n'
       << "tracker.min_eigenvalue = " << c.tracker.min_eigenvalue << '\n'
       << "gms.grid_cols = " << c.gms.grid_cols << '\n'
       << "gms.grid_rows = " << c.gms.grid_rows << '\n'
       << "gms.alpha = " << c.gms.alpha << '\n'
       << "ransac.threshold_px = " << c.ransac.threshold_px << '\n'
       << "ransac.confidence = " << c.ransac.confidence << '\n'
       << "ransac.max_iterations = " << c.ransac.max_iterations << '\n'
       << "solver.huber_delta_px = " << c.solver.huber_delta_px << '\n'
       << "solver.rounds = " << c.solver.rounds << '\n'
       << "solver.iterations_per_round = " << c.solver.iterations_per_round << '\n'
       << "solver.outlier_chi2 = " << c.solver.outlier_chi2 << '\n'
       << "solver.min_correspondences = " << c.solver.min_correspondences << '\n';
    return os.str();
}

} // namespace flowvo
