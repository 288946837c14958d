#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "flowvo/core.hpp"
#include "flowvo/image.hpp"
#include "flowvo/pyramid.hpp"

// Pyramidal sparse optical flow. The reference patch and its gradients are
// sampled once per level; each iteration re-samples only the current image
// and solves the 2x2 normal equations for the displacement update. The
// motion guess enters at the deepest level and the estimate is refined down
// to level 0. Intensities are normalised to [0, 1] internally.

namespace flowvo {

struct TrackerConfig {
    int half_window = 2;             // window side = 2*half_window + 1
    int max_iterations = 10;         // per pyramid level
    double min_window_error = 0.02;  // mean |residual| convergence threshold
    double min_eigenvalue = 1e-4;    // structure-tensor floor
};

enum class TrackStatus {
    Converged,     // level-0 loop hit the error threshold
    MaxIterations, // ran out of iterations at level 0; estimate still usable
    Lost,          // untrackable: out of bounds, flat patch, or diverged
};

struct TrackResult {
    PixelPoint movement;       // level-0 displacement from the reference position
    float residual = std::numeric_limits<float>::infinity();
    int iterations_used = 0;   // solver iterations summed over all levels
    TrackStatus status = TrackStatus::Lost;
};

namespace detail {

struct RefPatch {
    std::vector<float> value, ix, iy; // normalised to [0, 1]
    double gxx = 0, gxy = 0, gyy = 0; // structure tensor
    double min_eig = 0;
};

inline bool build_ref_patch(const GrayImage& img, PixelPoint centre, int hw, RefPatch& out) {
    const double reach = hw + 1.0;
    if (!in_sample_bounds(img, centre.x - reach, centre.y - reach) ||
        !in_sample_bounds(img, centre.x + reach, centre.y + reach))
        return false;
    const GradientPatch p = patch_gradients(img, centre, hw);
    const float inv = 1.0f / 255.0f;
    const std::size_t n = p.value.size();
    out.value.resize(n);
    out.ix.resize(n);
    out.iy.resize(n);
    out.gxx = out.gxy = out.gyy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.value[i] = p.value[i] * inv;
        out.ix[i] = p.ix[i] * inv;
        out.iy[i] = p.iy[i] * inv;
        out.gxx += static_cast<double>(out.ix[i]) * out.ix[i];
        out.gxy += static_cast<double>(out.ix[i]) * out.iy[i];
        out.gyy += static_cast<double>(out.iy[i]) * out.iy[i];
    }
    const double half_tr = 0.5 * (out.gxx + out.gyy);
    const double det = out.gxx * out.gyy - out.gxy * out.gxy;
    out.min_eig = half_tr - std::sqrt(std::max(half_tr * half_tr - det, 0.0));
    return true;
}

// Mean absolute residual of the window at the given current-image centre, or
// false if the window leaves the image.
inline bool window_error(const GrayImage& img, PixelPoint centre, int hw, const RefPatch& ref,
                         float& eps, std::vector<float>& residuals) {
    if (!in_sample_bounds(img, centre.x - hw, centre.y - hw) ||
        !in_sample_bounds(img, centre.x + hw, centre.y + hw))
        return false;
    const float inv = 1.0f / 255.0f;
    float sum = 0.0f;
    std::size_t i = 0;
    for (int dy = -hw; dy <= hw; ++dy)
        for (int dx = -hw; dx <= hw; ++dx, ++i) {
            const float cur = sample_bilinear(img, centre.x + dx, centre.y + dy) * inv;
            residuals[i] = ref.value[i] - cur;
            sum += std::abs(residuals[i]);
        }
    eps = sum / static_cast<float>(residuals.size());
    return true;
}

} // namespace detail

// Track one reference keypoint (level-0 position) into the current pyramid,
// starting the search at `guess` (absolute level-0 coordinates). The movement
// estimate lives in the pixels of the level being solved: it enters at the
// deepest level divided by ratio^deepest and is multiplied by the ratio on
// every transition to the next finer level.
inline TrackResult track(const Pyramid& ref, const Pyramid& cur, PixelPoint position,
                         PixelPoint guess, const TrackerConfig& cfg = {}) {
    if (!in_sample_bounds(ref.levels[0], position.x, position.y))
        throw Error(ErrorCode::InvalidInput, "track: reference position outside image");

    const int hw = cfg.half_window;
    const double window_half = (2.0 * hw + 1.0) * 0.5;
    const std::size_t patch_n = static_cast<std::size_t>(2 * hw + 1) * (2 * hw + 1);
    const int deepest = ref.level_count() - 1;

    TrackResult res;
    const PixelPoint m_init = guess - position;
    PixelPoint m = m_init * std::pow(ref.ratio, -deepest);

    detail::RefPatch patch;
    std::vector<float> residuals(patch_n);
    bool level0_hit_threshold = false;

    for (int l = deepest; l >= 0; --l) {
        const GrayImage& ref_img = ref.levels[l];
        const GrayImage& cur_img = cur.levels[l];
        const PixelPoint ref_centre = ref.to_level(position, l);

        const bool usable = detail::build_ref_patch(ref_img, ref_centre, hw, patch) &&
                            patch.min_eig >= cfg.min_eigenvalue;
        if (!usable && l == 0) return res; // Lost: level 0 must be solvable

        if (usable) {
            float best_eps = std::numeric_limits<float>::infinity();
            PixelPoint best_m = m;
            if (l == 0) {
                // Seed with the injected guess so the result never reports a
                // larger error than the caller's starting point.
                float eps0;
                if (detail::window_error(cur_img, ref_centre + m_init, hw, patch, eps0,
                                         residuals)) {
                    best_eps = eps0;
                    best_m = m_init;
                }
            }

            int big_steps = 0;
            for (int it = 0;; ++it) {
                float eps;
                if (!detail::window_error(cur_img, ref_centre + m, hw, patch, eps, residuals)) {
                    if (l == 0 && !std::isfinite(best_eps))
                        return res; // window left the image at full resolution
                    break;
                }
                if (l == 0 && eps < best_eps) {
                    best_eps = eps;
                    best_m = m;
                }
                if (eps < cfg.min_window_error) {
                    if (l == 0) level0_hit_threshold = true;
                    break;
                }
                if (it >= cfg.max_iterations) break;

                double bx = 0.0, by = 0.0;
                for (std::size_t i = 0; i < patch_n; ++i) {
                    bx += static_cast<double>(patch.ix[i]) * residuals[i];
                    by += static_cast<double>(patch.iy[i]) * residuals[i];
                }
                const double det = patch.gxx * patch.gyy - patch.gxy * patch.gxy;
                const double dx = (patch.gyy * bx - patch.gxy * by) / det;
                const double dy = (patch.gxx * by - patch.gxy * bx) / det;
                m.x += dx;
                m.y += dy;
                ++res.iterations_used;

                if (std::hypot(dx, dy) > window_half) {
                    if (++big_steps >= 3) return res; // diverging
                } else {
                    big_steps = 0;
                }
            }

            if (l == 0) {
                res.movement = best_m;
                res.residual = best_eps;
                res.status =
                    level0_hit_threshold ? TrackStatus::Converged : TrackStatus::MaxIterations;
                if (!std::isfinite(best_eps)) res.status = TrackStatus::Lost;
            }
        }

        if (l > 0) m = m * ref.ratio;
    }
    return res;
}

inline std::vector<TrackResult> track_all(const Pyramid& ref, const Pyramid& cur,
                                          const std::vector<PixelPoint>& positions,
                                          const std::vector<PixelPoint>& guesses,
                                          const TrackerConfig& cfg = {}) {
    if (positions.size() != guesses.size())
        throw Error(ErrorCode::InvalidInput, "track_all: positions/guesses size mismatch");
    std::vector<TrackResult> out;
    out.reserve(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        out.push_back(track(ref, cur, positions[i], guesses[i], cfg));
    return out;
}

} // namespace flowvo
