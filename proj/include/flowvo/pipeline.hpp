#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "flowvo/camera.hpp"
#include "flowvo/clahe.hpp"
#include "flowvo/config.hpp"
#include "flowvo/core.hpp"
#include "flowvo/dataset.hpp"
#include "flowvo/fast.hpp"
#include "flowvo/image.hpp"
#include "flowvo/keypoint.hpp"
#include "flowvo/klt.hpp"
#include "flowvo/motion_model.hpp"
#include "flowvo/png_io.hpp"
#include "flowvo/pnp.hpp"
#include "flowvo/pyramid.hpp"
#include "flowvo/refine.hpp"
#include "flowvo/trajectory.hpp"

// Frame-to-frame visual odometry: preprocess, (re)detect, predict, track,
// refine, solve pose, update the keypoint set and pose history. Poses are
// world-to-camera internally; trajectories are exported camera-to-world.

namespace flowvo {

enum class FrameStatus { Tracked, Failed };

struct FrameTimings {
    double preprocess_ms = 0.0;
    double detect_ms = 0.0;
    double predict_ms = 0.0;
    double track_ms = 0.0;
    double refine_ms = 0.0;
    double solve_ms = 0.0;

    double total_ms() const {
        return preprocess_ms + detect_ms + predict_ms + track_ms + refine_ms + solve_ms;
    }
};

struct FrameResult {
    int frame_index = 0;
    double timestamp = 0.0;
    SE3Pose pose;                       // world-to-camera
    int inlier_count = 0;               // post-refine survivors
    FrameStatus status = FrameStatus::Tracked;
    FrameTimings timings;
    PredictionTier prediction_tier = PredictionTier::Static;
};

class VoPipeline {
public:
    VoPipeline(PipelineConfig cfg, CameraIntrinsics intrinsics)
        : cfg_(std::move(cfg)), k_(intrinsics), rng_(cfg_.seed) {
        validate_config(cfg_);
        validate_intrinsics(k_);
    }

    FrameResult process_frame(const GrayImage& gray, const DepthImage& depth, double timestamp) {
        if (gray.width != k_.width || gray.height != k_.height || depth.width != k_.width ||
            depth.height != k_.height)
            throw Error(ErrorCode::InvalidInput, "process_frame: image size != configured size");

        using clock = std::chrono::steady_clock;
        auto ms_since = [](clock::time_point t0) {
            return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        };

        FrameResult res;
        res.frame_index = frame_index_++;
        res.timestamp = timestamp;

        auto t0 = clock::now();
        Pyramid pyr = build_pyramid(clahe(gray, cfg_.clahe));
        res.timings.preprocess_ms = ms_since(t0);

        if (!prev_pyramid_) {
            // First frame: detect everywhere, anchor the world frame here.
            t0 = clock::now();
            seed_keypoints(pyr, depth, SE3Pose::identity(), cfg_.max_keypoints, nullptr);
            res.timings.detect_ms = ms_since(t0);
            res.pose = SE3Pose::identity();
            res.inlier_count = static_cast<int>(keypoints_.size());
            commit(pyr, depth, res.pose, true);
            return res;
        }

        // Redetect on the previous frame so new keypoints join the
        // previous->current track immediately, using the reference depth.
        t0 = clock::now();
        if (static_cast<int>(keypoints_.size()) < cfg_.redetect_threshold) {
            OccupancyMask mask(k_.width, k_.height, cfg_.detector.mask_cell);
            for (const auto& kp : keypoints_) mask.mark(kp.position);
            const int budget = cfg_.max_keypoints - static_cast<int>(keypoints_.size());
            if (budget > 0)
                seed_keypoints(*prev_pyramid_, prev_depth_, last_pose_, budget,
                               keypoints_.empty() ? nullptr : &mask);
        }
        res.timings.detect_ms = ms_since(t0);

        t0 = clock::now();
        const PosePrediction pred = predict_pose(history_);
        res.prediction_tier = pred.tier;
        std::vector<PixelPoint> positions;
        positions.reserve(keypoints_.size());
        for (const auto& kp : keypoints_) positions.push_back(kp.position);
        const std::vector<PixelPoint> guesses =
            predict_correspondences(keypoints_, pred.pose, k_);
        res.timings.predict_ms = ms_since(t0);

        t0 = clock::now();
        const std::vector<TrackResult> tracks =
            track_all(*prev_pyramid_, pyr, positions, guesses, cfg_.tracker);
        res.timings.track_ms = ms_since(t0);

        t0 = clock::now();
        MatchSet matches;
        std::vector<std::size_t> match_owner; // match row -> keypoint index
        for (std::size_t i = 0; i < keypoints_.size(); ++i) {
            if (tracks[i].status == TrackStatus::Lost) continue;
            const PixelPoint cur = keypoints_[i].position + tracks[i].movement;
            if (cur.x < 0 || cur.x > k_.width - 1 || cur.y < 0 || cur.y > k_.height - 1) continue;
            matches.add(keypoints_[i].position, cur);
            match_owner.push_back(i);
        }

        RefineResult refined;
        bool refine_ok = true;
        try {
            refined = refine(matches, k_.width, k_.height, k_.width, k_.height, rng_, cfg_.gms,
                             cfg_.ransac);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::InsufficientMatches) throw;
            refine_ok = false;
        }
        res.timings.refine_ms = ms_since(t0);

        if (!refine_ok) return fail_frame(res, pyr, depth);

        t0 = clock::now();
        PnPProblem prob;
        prob.intrinsics = k_;
        prob.initial_pose = pred.pose;
        std::vector<std::size_t> survivors;
        for (std::size_t r = 0; r < refined.matches.size(); ++r) {
            if (!refined.matches.inlier_mask[r]) continue;
            const std::size_t i = match_owner[r];
            survivors.push_back(r);
            if (keypoints_[i].landmark) {
                prob.landmarks.push_back(*keypoints_[i].landmark);
                prob.pixels.push_back(refined.matches.cur_points[r]);
            }
        }

        PnPResult solved;
        try {
            solved = solve_pose(prob, cfg_.solver);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::InsufficientData && e.code() != ErrorCode::Diverged) throw;
            res.timings.solve_ms = ms_since(t0);
            return fail_frame(res, pyr, depth);
        }
        res.timings.solve_ms = ms_since(t0);

        // Keep refine survivors only; move them to their tracked positions.
        std::vector<TrackedKeypoint> next;
        next.reserve(survivors.size());
        for (std::size_t r : survivors) {
            TrackedKeypoint kp = keypoints_[match_owner[r]];
            kp.position = refined.matches.cur_points[r];
            ++kp.age;
            next.push_back(std::move(kp));
        }
        keypoints_ = std::move(next);

        // Landmarks for keypoints that lacked depth so far, from the newly
        // solved pose and the current depth map.
        for (auto& kp : keypoints_) {
            if (kp.landmark) continue;
            const int px = static_cast<int>(std::lround(kp.position.x));
            const int py = static_cast<int>(std::lround(kp.position.y));
            if (px < 0 || px >= k_.width || py < 0 || py >= k_.height) continue;
            kp.landmark = back_project(kp.position, depth.at(px, py), solved.pose, k_);
        }

        res.pose = solved.pose;
        res.inlier_count = static_cast<int>(survivors.size());
        res.status = FrameStatus::Tracked;
        commit(pyr, depth, solved.pose, true);
        return res;
    }

    const std::vector<TrackedKeypoint>& keypoints() const { return keypoints_; }
    const PoseHistory& history() const { return history_; }

private:
    void seed_keypoints(const Pyramid& pyr, const DepthImage& depth, const SE3Pose& pose,
                        int budget, const OccupancyMask* mask) {
        const auto fresh = detect_keypoints(pyr, budget, mask, cfg_.detector);
        for (const auto& d : fresh) {
            TrackedKeypoint kp;
            kp.id = next_id_++;
            kp.position = d.position;
            kp.level = d.level;
            const int px = static_cast<int>(std::lround(d.position.x));
            const int py = static_cast<int>(std::lround(d.position.y));
            if (px >= 0 && px < depth.width && py >= 0 && py < depth.height)
                kp.landmark = back_project(d.position, depth.at(px, py), pose, k_);
            keypoints_.push_back(std::move(kp));
        }
    }

    FrameResult fail_frame(FrameResult res, Pyramid& pyr, const DepthImage& depth) {
        res.status = FrameStatus::Failed;
        res.pose = last_pose_;
        res.inlier_count = 0;
        keypoints_.clear(); // forces a full redetect next frame
        history_.clear();
        history_.push(last_pose_); // identity-increment prediction tier
        commit(pyr, depth, last_pose_, false);
        return res;
    }

    void commit(Pyramid& pyr, const DepthImage& depth, const SE3Pose& pose, bool push_history) {
        prev_pyramid_ = std::move(pyr);
        prev_depth_ = depth;
        last_pose_ = pose;
        if (push_history) history_.push(pose);
    }

    PipelineConfig cfg_;
    CameraIntrinsics k_;
    std::mt19937 rng_;
    std::optional<Pyramid> prev_pyramid_;
    DepthImage prev_depth_;
    SE3Pose last_pose_;
    PoseHistory history_;
    std::vector<TrackedKeypoint> keypoints_;
    std::uint64_t next_id_ = 0;
    int frame_index_ = 0;
};

struct TimingSummary {
    FrameTimings mean;
    FrameTimings median;
    int frames = 0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

inline TimingSummary summarize_timings(const std::vector<FrameResult>& frames) {
    TimingSummary s;
    s.frames = static_cast<int>(frames.size());
    if (frames.empty()) return s;
    std::vector<double> per_stage[6];
    for (const auto& f : frames) {
        const double vals[6] = {f.timings.preprocess_ms, f.timings.detect_ms,
                                f.timings.predict_ms, f.timings.track_ms,
                                f.timings.refine_ms, f.timings.solve_ms};
        for (int i = 0; i < 6; ++i) per_stage[i].push_back(vals[i]);
    }
    double* mean_fields[6] = {&s.mean.preprocess_ms, &s.mean.detect_ms, &s.mean.predict_ms,
                              &s.mean.track_ms, &s.mean.refine_ms, &s.mean.solve_ms};
    double* median_fields[6] = {&s.median.preprocess_ms, &s.median.detect_ms,
                                &s.median.predict_ms, &s.median.track_ms, &s.median.refine_ms,
                                &s.median.solve_ms};
    for (int i = 0; i < 6; ++i) {
        double sum = 0.0;
        for (double v : per_stage[i]) sum += v;
        *mean_fields[i] = sum / per_stage[i].size();
        *median_fields[i] = detail::median_of(per_stage[i]);
    }
    return s;
}

struct RunResult {
    Trajectory trajectory; // camera-to-world, one entry per associated frame
    std::vector<FrameResult> frames;
    TimingSummary timing;
};

// Run the pipeline over every associated rgb/depth pair of a sequence.
inline RunResult run_sequence(const SequenceHandle& seq, const PipelineConfig& cfg) {
    RunResult out;
    const auto pairs = associate(seq);
    VoPipeline pipeline(cfg, seq.intrinsics);
    out.frames.reserve(pairs.size());
    out.trajectory.reserve(pairs.size());
    for (const auto& [ri, di] : pairs) {
        const GrayImage gray = read_png_gray(seq.rgb[ri].path);
        const DepthImage depth = read_png_depth16(seq.depth[di].path);
        FrameResult fr = pipeline.process_frame(gray, depth, seq.rgb[ri].timestamp);
        TrajectoryEntry entry;
        entry.timestamp = fr.timestamp;
        entry.pose = inverse(fr.pose); // file convention is camera-to-world
        out.trajectory.push_back(entry);
        out.frames.push_back(std::move(fr));
    }
    out.timing = summarize_timings(out.frames);
    return out;
}

// Plain-text sidecar: one line per frame.
inline std::string format_sidecar_report(const std::vector<FrameResult>& frames) {
    std::string out = "# frame_index timestamp status inlier_count t_total_ms\n";
    char buf[160];
    for (const auto& f : frames) {
        std::snprintf(buf, sizeof(buf), "%d %.6f %s %d %.3f\n", f.frame_index, f.timestamp,
                      f.status == FrameStatus::Tracked ? "Tracked" : "Failed", f.inlier_count,
                      f.timings.total_ms());
        out += buf;
    }
    return out;
}

} // namespace flowvo
