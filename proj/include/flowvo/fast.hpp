#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "flowvo/core.hpp"
#include "flowvo/image.hpp"
#include "flowvo/keypoint.hpp"
#include "flowvo/pyramid.hpp"

// Segment-test corner detection on every pyramid level, followed by a
// quadtree pass that spreads the survivors evenly over the image.

namespace flowvo {

struct DetectorParams {
    int threshold = 20;          // primary segment-test threshold
    int fallback_threshold = 7;  // retry threshold for low-contrast cells
    int cell_size = 32;          // detection cell side, per level
    int mask_cell = 16;          // occupancy mask cell side, level-0 px
};

// Marks 16x16 level-0 regions already holding a tracked keypoint so
// redetection avoids them.
struct OccupancyMask {
    int cell = 16;
    int cols = 0;
    int rows = 0;
    std::vector<char> occ;

    OccupancyMask() = default;
    OccupancyMask(int width, int height, int cell_side = 16)
        : cell(cell_side),
          cols((width + cell_side - 1) / cell_side),
          rows((height + cell_side - 1) / cell_side),
          occ(static_cast<std::size_t>(cols) * rows, 0) {}

    void mark(PixelPoint p) {
        const int cx = std::clamp(static_cast<int>(p.x) / cell, 0, cols - 1);
        const int cy = std::clamp(static_cast<int>(p.y) / cell, 0, rows - 1);
        occ[static_cast<std::size_t>(cy) * cols + cx] = 1;
    }
    bool occupied(PixelPoint p) const {
        if (occ.empty()) return false;
        const int cx = std::clamp(static_cast<int>(p.x) / cell, 0, cols - 1);
        const int cy = std::clamp(static_cast<int>(p.y) / cell, 0, rows - 1);
        return occ[static_cast<std::size_t>(cy) * cols + cx] != 0;
    }
};

namespace detail {

// Bresenham circle of radius 3, clockwise from twelve o'clock.
inline constexpr std::array<std::array<int, 2>, 16> kRing = {{
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
}};

// Segment test: 9 contiguous ring pixels all brighter than centre+t or all
// darker than centre-t. Returns a contrast score, 0 if not a corner.
inline float fast9_score(const GrayImage& img, int x, int y, int t) {
    const int centre = img.at(x, y);
    std::array<int, 16> ring;
    for (int i = 0; i < 16; ++i) ring[i] = img.at(x + kRing[i][0], y + kRing[i][1]);

    auto longest_run = [&](auto pred) {
        int best = 0, run = 0;
        for (int i = 0; i < 32; ++i) {
            if (pred(ring[i & 15])) {
                if (++run > best) best = run;
                if (best >= 16) break;
            } else {
                run = 0;
            }
        }
        return std::min(best, 16);
    };

    const int hi = centre + t;
    const int lo = centre - t;
    float score = 0.0f;
    if (longest_run([&](int v) { return v > hi; }) >= 9) {
        for (int v : ring)
            if (v > hi) score += static_cast<float>(v - centre);
        return score;
    }
    if (longest_run([&](int v) { return v < lo; }) >= 9) {
        for (int v : ring)
            if (v < lo) score += static_cast<float>(centre - v);
        return score;
    }
    return 0.0f;
}

struct LevelCorner {
    int x, y;
    float score;
};

// Per-cell detection with the fallback threshold, then 3x3 non-maximum
// suppression across the whole level.
inline std::vector<LevelCorner> detect_level(const GrayImage& img, const DetectorParams& p) {
    std::vector<LevelCorner> raw;
    const int lo = 3;
    const int hix = img.width - 4;
    const int hiy = img.height - 4;
    if (hix < lo || hiy < lo) return raw;

    for (int cy = lo; cy <= hiy; cy += p.cell_size) {
        const int cy1 = std::min(cy + p.cell_size - 1, hiy);
        for (int cx = lo; cx <= hix; cx += p.cell_size) {
            const int cx1 = std::min(cx + p.cell_size - 1, hix);
            std::size_t before = raw.size();
            for (int t : {p.threshold, p.fallback_threshold}) {
                for (int y = cy; y <= cy1; ++y)
                    for (int x = cx; x <= cx1; ++x) {
                        const float s = fast9_score(img, x, y, t);
                        if (s > 0.0f) raw.push_back({x, y, s});
                    }
                if (raw.size() > before) break; // fallback only when empty
            }
        }
    }

    std::unordered_map<std::int64_t, float> scores;
    scores.reserve(raw.size() * 2);
    auto key = [&](int x, int y) { return static_cast<std::int64_t>(y) * img.width + x; };
    for (const auto& c : raw) scores[key(c.x, c.y)] = c.score;

    std::vector<LevelCorner> kept;
    kept.reserve(raw.size());
    for (const auto& c : raw) {
        bool maximal = true;
        for (int dy = -1; dy <= 1 && maximal; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                auto it = scores.find(key(c.x + dx, c.y + dy));
                if (it == scores.end()) continue;
                // Equal scores: the smaller (y, x) wins.
                if (it->second > c.score ||
                    (it->second == c.score && (dy < 0 || (dy == 0 && dx < 0)))) {
                    maximal = false;
                    break;
                }
            }
        if (maximal) kept.push_back(c);
    }
    return kept;
}

inline bool better(const Keypoint& a, const Keypoint& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.position.y != b.position.y) return a.position.y < b.position.y;
    return a.position.x < b.position.x;
}

// Quadtree subdivision until there are enough leaves, then one corner per leaf.
inline std::vector<Keypoint> distribute_quadtree(std::vector<Keypoint> cands, int width,
                                                 int height, int target) {
    struct Node {
        double x0, x1, y0, y1;
        std::vector<int> idx;
        bool alive = true;
    };
    std::vector<Node> nodes;
    nodes.push_back({0.0, static_cast<double>(width), 0.0, static_cast<double>(height), {}, true});
    nodes[0].idx.resize(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) nodes[0].idx[i] = static_cast<int>(i);

    auto leaf_count = [&] {
        int n = 0;
        for (const auto& nd : nodes)
            if (nd.alive && !nd.idx.empty()) ++n;
        return n;
    };

    while (leaf_count() < target) {
        int pick = -1;
        std::size_t most = 1;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& nd = nodes[i];
            if (!nd.alive || nd.idx.size() <= most) continue;
            if (nd.x1 - nd.x0 < 2.0 && nd.y1 - nd.y0 < 2.0) continue;
            most = nd.idx.size();
            pick = static_cast<int>(i);
        }
        if (pick < 0) break;

        Node parent = nodes[pick];
        nodes[pick].alive = false;
        nodes[pick].idx.clear();
        const double mx = 0.5 * (parent.x0 + parent.x1);
        const double my = 0.5 * (parent.y0 + parent.y1);
        Node quads[4] = {
            {parent.x0, mx, parent.y0, my, {}, true},
            {mx, parent.x1, parent.y0, my, {}, true},
            {parent.x0, mx, my, parent.y1, {}, true},
            {mx, parent.x1, my, parent.y1, {}, true},
        };
        for (int id : parent.idx) {
            const auto& p = cands[id].position;
            const int q = (p.x < mx ? 0 : 1) + (p.y < my ? 0 : 2);
            quads[q].idx.push_back(id);
        }
        for (auto& q : quads)
            if (!q.idx.empty()) nodes.push_back(std::move(q));
    }

    std::vector<Keypoint> out;
    out.reserve(leaf_count());
    for (const auto& nd : nodes) {
        if (!nd.alive || nd.idx.empty()) continue;
        int best = nd.idx[0];
        for (int id : nd.idx)
            if (better(cands[id], cands[best])) best = id;
        out.push_back(cands[best]);
    }
    std::sort(out.begin(), out.end(), better);
    if (static_cast<int>(out.size()) > target) out.resize(target);
    return out;
}

} // namespace detail

// Detect up to max_count corners across all pyramid levels, skipping masked
// regions, with per-level budgets proportional to level area.
inline std::vector<Keypoint> detect_keypoints(const Pyramid& pyr, int max_count,
                                              const OccupancyMask* mask = nullptr,
                                              const DetectorParams& params = {}) {
    if (max_count < 1) throw Error(ErrorCode::InvalidInput, "detect_keypoints: max_count < 1");

    double total_area = 0.0;
    for (const auto& lvl : pyr.levels)
        total_area += static_cast<double>(lvl.width) * lvl.height;

    const double w0 = pyr.levels[0].width;
    const double h0 = pyr.levels[0].height;
    std::vector<Keypoint> merged;
    std::vector<Keypoint> spare;
    for (int l = 0; l < pyr.level_count(); ++l) {
        const GrayImage& img = pyr.levels[l];
        auto corners = detail::detect_level(img, params);

        std::vector<Keypoint> kps;
        kps.reserve(corners.size());
        for (const auto& c : corners) {
            Keypoint kp;
            // Centre-aligned mapping back to level-0 coordinates.
            kp.position = {(c.x + 0.5) * (w0 / img.width) - 0.5,
                           (c.y + 0.5) * (h0 / img.height) - 0.5};
            kp.level = l;
            kp.score = c.score;
            if (mask && mask->occupied(kp.position)) continue;
            kps.push_back(kp);
        }

        const double area = static_cast<double>(img.width) * img.height;
        const auto budget = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(max_count * area / total_area)));
        if (kps.size() > budget) {
            std::sort(kps.begin(), kps.end(), detail::better);
            spare.insert(spare.end(), kps.begin() + budget, kps.end());
            kps.resize(budget);
        }
        merged.insert(merged.end(), kps.begin(), kps.end());
    }

    // Levels without enough texture leave budget unused; refill from the best
    // remaining candidates so rich images still deliver the full count.
    if (merged.size() < static_cast<std::size_t>(max_count) && !spare.empty()) {
        std::sort(spare.begin(), spare.end(), detail::better);
        const std::size_t want = static_cast<std::size_t>(max_count) - merged.size();
        merged.insert(merged.end(), spare.begin(),
                      spare.begin() + std::min(want, spare.size()));
    }

    return detail::distribute_quadtree(std::move(merged), pyr.levels[0].width,
                                       pyr.levels[0].height, max_count);
}

} // namespace flowvo
