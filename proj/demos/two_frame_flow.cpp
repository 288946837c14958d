// Minimal library walkthrough: build pyramids for two frames, detect corners
// on the first, track them into the second, and print what happened.
//
// With no arguments a synthetic pair is generated (a textured image shifted
// by a known offset), so the demo runs without any dataset. Pass two PNG
// paths to use real frames instead.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "flowvo/clahe.hpp"
#include "flowvo/fast.hpp"
#include "flowvo/klt.hpp"
#include "flowvo/png_io.hpp"
#include "flowvo/pyramid.hpp"

namespace {

// Smooth pseudo-random texture: a few sine octaves, plenty of gradients.
flowvo::GrayImage make_texture(int width, int height, double shift_x, double shift_y) {
    flowvo::GrayImage img(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double u = x + shift_x, v = y + shift_y;
            double s = 0.0;
            s += std::sin(u * 0.050) * std::cos(v * 0.080);
            s += 0.6 * std::sin(u * 0.130 + 1.7) * std::sin(v * 0.110 + 0.4);
            s += 0.35 * std::cos(u * 0.310 + v * 0.270);
            s += 0.2 * std::sin(u * 0.730 - v * 0.590 + 2.9);
            const int g = static_cast<int>(std::lround((s + 2.15) / 4.3 * 255.0));
            img.at(x, y) = static_cast<std::uint8_t>(std::clamp(g, 0, 255));
        }
    }
    return img;
}

} // namespace

int main(int argc, char** argv) {
    using namespace flowvo;

    GrayImage frame_a, frame_b;
    double true_dx = 0.0, true_dy = 0.0;
    bool synthetic = argc < 3;
    if (synthetic) {
        true_dx = 3.4;
        true_dy = -2.1;
        frame_a = make_texture(640, 480, 0.0, 0.0);
        frame_b = make_texture(640, 480, true_dx, true_dy);
        std::printf("synthetic pair, true shift (%.1f, %.1f) px\n", true_dx, true_dy);
    } else {
        frame_a = read_png_gray(argv[1]);
        frame_b = read_png_gray(argv[2]);
        std::printf("loaded %s and %s (%dx%d)\n", argv[1], argv[2], frame_a.width,
                    frame_a.height);
    }

    // 1. Contrast-normalize and build scale pyramids.
    const ClaheParams clahe_params;
    const Pyramid pyr_a = build_pyramid(clahe(frame_a, clahe_params));
    const Pyramid pyr_b = build_pyramid(clahe(frame_b, clahe_params));
    std::printf("pyramid: %d levels, ratio %.2f, coarsest %dx%d\n", pyr_a.level_count(),
                pyr_a.ratio, pyr_a.levels.back().width, pyr_a.levels.back().height);

    // 2. Detect corners on the first frame.
    const auto keypoints = detect_keypoints(pyr_a, 500, nullptr, DetectorParams{});
    std::printf("detected %zu keypoints\n", keypoints.size());

    // 3. Track them into the second frame, starting from their own positions.
    std::vector<PixelPoint> positions, guesses;
    for (const auto& kp : keypoints) {
        positions.push_back(kp.position);
        guesses.push_back(kp.position);
    }
    const auto tracks = track_all(pyr_a, pyr_b, positions, guesses, TrackerConfig{});

    int converged = 0, maxed = 0, lost = 0;
    double err_sum = 0.0;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        switch (tracks[i].status) {
        case TrackStatus::Converged: ++converged; break;
        case TrackStatus::MaxIterations: ++maxed; break;
        case TrackStatus::Lost: ++lost; break;
        }
        if (synthetic && tracks[i].status != TrackStatus::Lost) {
            const double ex = tracks[i].movement.x - true_dx;
            const double ey = tracks[i].movement.y - true_dy;
            err_sum += std::sqrt(ex * ex + ey * ey);
        }
    }
    std::printf("tracks: %d converged, %d max-iterations, %d lost\n", converged, maxed, lost);
    if (synthetic && converged + maxed > 0)
        std::printf("mean flow error vs. true shift: %.3f px\n", err_sum / (converged + maxed));

    // 4. Show a few individual results.
    std::printf("%6s %20s %20s %9s %6s\n", "id", "from", "flow", "residual", "iters");
    for (std::size_t i = 0; i < tracks.size() && i < 5; ++i) {
        std::printf("%6zu (%8.2f, %8.2f) (%8.3f, %8.3f) %9.5f %6d\n", i, positions[i].x,
                    positions[i].y, tracks[i].movement.x, tracks[i].movement.y,
                    tracks[i].residual, tracks[i].iterations_used);
    }
    return 0;
}
