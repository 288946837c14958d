#pragma once

#include <deque>
#include <vector>

#include "flowvo/camera.hpp"
#include "flowvo/core.hpp"
#include "flowvo/keypoint.hpp"
#include "flowvo/se3.hpp"

// Predicts the next camera pose from the recent pose history, assuming the
// inter-frame pose increment itself changes by a constant factor (uniform
// acceleration). Falls back to constant velocity with two poses and to the
// identity increment with fewer.

namespace flowvo {

enum class PredictionTier {
    UniformAcceleration, // three poses available
    ConstantVelocity,    // two poses
    Static,              // fewer than two: identity increment
};

inline const char* to_string(PredictionTier t) {
    switch (t) {
        case PredictionTier::UniformAcceleration: return "uniform-acceleration";
        case PredictionTier::ConstantVelocity: return "constant-velocity";
        case PredictionTier::Static: return "static";
    }
    return "unknown";
}

// Rolling window of the last three world-to-camera poses, oldest first.
class PoseHistory {
public:
    void push(const SE3Pose& pose) {
        poses_.push_back(pose);
        while (poses_.size() > 3) poses_.pop_front();
    }
    void clear() { poses_.clear(); }
    std::size_t size() const { return poses_.size(); }
    // k frames back from the newest entry (back(0) is the newest).
    const SE3Pose& back(std::size_t k = 0) const { return poses_[poses_.size() - 1 - k]; }

private:
    std::deque<SE3Pose> poses_;
};

struct RelativePrediction {
    SE3Pose increment; // left-multiplies the last pose
    PredictionTier tier = PredictionTier::Static;
};

inline RelativePrediction predict_relative(const PoseHistory& history) {
    RelativePrediction out;
    if (history.size() >= 3) {
        const SE3Pose t12 = relative(history.back(0), history.back(1));
        const SE3Pose t23 = relative(history.back(1), history.back(2));
        out.increment = compose(compose(t12, inverse(t23)), t12);
        out.tier = PredictionTier::UniformAcceleration;
    } else if (history.size() == 2) {
        out.increment = relative(history.back(0), history.back(1));
        out.tier = PredictionTier::ConstantVelocity;
    }
    return out;
}

struct PosePrediction {
    SE3Pose pose; // predicted world-to-camera pose of the incoming frame
    PredictionTier tier = PredictionTier::Static;
};

inline PosePrediction predict_pose(const PoseHistory& history) {
    PosePrediction out;
    const RelativePrediction rel = predict_relative(history);
    out.tier = rel.tier;
    if (history.size() >= 1)
        out.pose = compose(rel.increment, history.back(0));
    return out;
}

// Expected pixel position of each keypoint in the incoming frame: landmarks
// are projected through the predicted pose; keypoints without a landmark (or
// projecting out of view) keep their current position as the guess.
inline std::vector<PixelPoint> predict_correspondences(const std::vector<TrackedKeypoint>& kps,
                                                       const SE3Pose& predicted_pose,
                                                       const CameraIntrinsics& k) {
    std::vector<PixelPoint> out;
    out.reserve(kps.size());
    for (const auto& kp : kps) {
        if (kp.landmark) {
            if (auto px = project(*kp.landmark, predicted_pose, k)) {
                out.push_back(*px);
                continue;
            }
        }
        out.push_back(kp.position);
    }
    return out;
}

} // namespace flowvo
