#pragma once

#include <cstdint>
#include <optional>

#include "flowvo/camera.hpp"
#include "flowvo/core.hpp"

namespace flowvo {

// Detector output. Position is in level-0 pixel coordinates regardless of the
// pyramid level the corner was found on.
struct Keypoint {
    PixelPoint position;
    int level = 0;
    float score = 0.0f;
};

// A keypoint carried across frames by the tracker.
struct TrackedKeypoint {
    std::uint64_t id = 0;
    PixelPoint position;                   // in the most recent frame
    int level = 0;                         // detection level
    std::optional<Landmark> landmark;      // world point, empty if depth was missing
    int age = 0;                           // frames survived
};

} // namespace flowvo
