#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "flowvo/core.hpp"

// Two-stage match refinement: a grid motion-consistency filter first, then
// RANSAC epipolar verification with a normalized 8-point fundamental matrix.

namespace flowvo {

enum class MatchStage { Raw, AfterGms, AfterEpipolar };

struct MatchSet {
    std::vector<PixelPoint> ref_points;
    std::vector<PixelPoint> cur_points;
    std::vector<char> inlier_mask;
    MatchStage stage = MatchStage::Raw;

    std::size_t size() const { return ref_points.size(); }
    std::size_t inlier_count() const {
        std::size_t n = 0;
        for (char m : inlier_mask) n += (m != 0);
        return n;
    }
    void add(PixelPoint ref, PixelPoint cur, bool inlier = true) {
        ref_points.push_back(ref);
        cur_points.push_back(cur);
        inlier_mask.push_back(inlier ? 1 : 0);
    }
};

struct GmsParams {
    int grid_cols = 20;
    int grid_rows = 20;
    double alpha = 6.0;
};

struct RansacParams {
    double threshold_px = 1.96;
    double confidence = 0.99;
    int max_iterations = 200;
};

struct FundamentalMatrix {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
};

// max of the two point-to-epipolar-line distances, in pixels.
inline double symmetric_epipolar_distance(const FundamentalMatrix& f, PixelPoint ref,
                                          PixelPoint cur) {
    const Eigen::Vector3d xr(ref.x, ref.y, 1.0);
    const Eigen::Vector3d xc(cur.x, cur.y, 1.0);
    const Eigen::Vector3d lc = f.m * xr;            // line in the current image
    const Eigen::Vector3d lr = f.m.transpose() * xc; // line in the reference image
    const double num = std::abs(xc.dot(lc));
    const double dc = std::hypot(lc.x(), lc.y());
    const double dr = std::hypot(lr.x(), lr.y());
    if (dc < 1e-12 || dr < 1e-12) return std::numeric_limits<double>::infinity();
    return std::max(num / dc, num / dr);
}

// Grid motion-consistency filter. A match votes into the cell pair (its
// reference cell, its current cell); the pair's support is the sum of votes
// over the 3x3 lockstep neighbourhood of both cells. The grid is evaluated
// at four placements (origin shifted by half a cell in x, y, and both) and a
// match survives if any placement scores its pair at or above
// alpha * sqrt(mean neighbourhood density); without the shifted placements,
// coherent matches whose flow crosses a cell boundary vote into minority
// buckets and get culled.
inline MatchSet gms_filter(const MatchSet& in, int ref_w, int ref_h, int cur_w, int cur_h,
                           const GmsParams& p = {}) {
    if (in.inlier_mask.size() != in.size())
        throw Error(ErrorCode::InvalidInput, "gms_filter: mask/pair length mismatch");
    MatchSet out = in;
    out.stage = MatchStage::AfterGms;
    if (in.size() == 0) return out;

    const int cols = p.grid_cols, rows = p.grid_rows;
    const int ncell = cols * rows;
    auto cell_of = [](PixelPoint pt, int w, int h, int cs, int rs, double ox, double oy) {
        int cx = std::clamp(static_cast<int>(pt.x * cs / w + ox), 0, cs - 1);
        int cy = std::clamp(static_cast<int>(pt.y * rs / h + oy), 0, rs - 1);
        return cy * cs + cx;
    };

    std::vector<char> keep(in.size(), 0);
    std::vector<int> ref_cell(in.size()), cur_cell(in.size());
    std::vector<int> ref_count, pair_count;
    std::vector<signed char> verdict;
    static constexpr double offs[4][2] = {{0.0, 0.0}, {0.5, 0.0}, {0.0, 0.5}, {0.5, 0.5}};
    for (const auto& off : offs) {
        ref_count.assign(ncell, 0);
        pair_count.assign(static_cast<std::size_t>(ncell) * ncell, 0);
        for (std::size_t k = 0; k < in.size(); ++k) {
            if (!in.inlier_mask[k]) continue;
            ref_cell[k] = cell_of(in.ref_points[k], ref_w, ref_h, cols, rows, off[0], off[1]);
            cur_cell[k] = cell_of(in.cur_points[k], cur_w, cur_h, cols, rows, off[0], off[1]);
            ++ref_count[ref_cell[k]];
            ++pair_count[static_cast<std::size_t>(ref_cell[k]) * ncell + cur_cell[k]];
        }

        // Decision per distinct cell pair, cached within the placement.
        verdict.assign(static_cast<std::size_t>(ncell) * ncell, -1);
        auto decide = [&](int ic, int jc) -> bool {
            const int ix = ic % cols, iy = ic / cols;
            const int jx = jc % cols, jy = jc / cols;
            double score = 0.0, density = 0.0;
            int neighbourhoods = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int ax = ix + dx, ay = iy + dy;
                    const int bx = jx + dx, by = jy + dy;
                    if (ax < 0 || ax >= cols || ay < 0 || ay >= rows) continue;
                    if (bx < 0 || bx >= cols || by < 0 || by >= rows) continue;
                    const int a = ay * cols + ax;
                    const int b = by * cols + bx;
                    score += pair_count[static_cast<std::size_t>(a) * ncell + b];
                    density += ref_count[a];
                    ++neighbourhoods;
                }
            if (neighbourhoods == 0) return false;
            return score >= p.alpha * std::sqrt(density / neighbourhoods);
        };

        for (std::size_t k = 0; k < in.size(); ++k) {
            if (!in.inlier_mask[k] || keep[k]) continue;
            const std::size_t key = static_cast<std::size_t>(ref_cell[k]) * ncell + cur_cell[k];
            if (verdict[key] < 0) verdict[key] = decide(ref_cell[k], cur_cell[k]) ? 1 : 0;
            if (verdict[key]) keep[k] = 1;
        }
    }

    for (std::size_t k = 0; k < in.size(); ++k)
        if (in.inlier_mask[k]) out.inlier_mask[k] = keep[k] != 0;
    return out;
}

namespace detail {

// Hartley-normalized least-squares fundamental matrix over the given pairs.
inline std::optional<Eigen::Matrix3d> fit_fundamental(const MatchSet& m,
                                                      const std::vector<int>& idx) {
    const int n = static_cast<int>(idx.size());
    if (n < 8) return std::nullopt;

    auto normalizer = [&](bool cur) -> std::optional<Eigen::Matrix3d> {
        double mx = 0, my = 0;
        for (int k : idx) {
            const PixelPoint& pt = cur ? m.cur_points[k] : m.ref_points[k];
            mx += pt.x;
            my += pt.y;
        }
        mx /= n;
        my /= n;
        double dist = 0;
        for (int k : idx) {
            const PixelPoint& pt = cur ? m.cur_points[k] : m.ref_points[k];
            dist += std::hypot(pt.x - mx, pt.y - my);
        }
        dist /= n;
        if (dist < 1e-9) return std::nullopt;
        const double s = std::sqrt(2.0) / dist;
        Eigen::Matrix3d t;
        t << s, 0, -s * mx, 0, s, -s * my, 0, 0, 1;
        return t;
    };

    const auto tr = normalizer(false);
    const auto tc = normalizer(true);
    if (!tr || !tc) return std::nullopt;

    Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
    for (int k : idx) {
        const Eigen::Vector3d xr = *tr * Eigen::Vector3d(m.ref_points[k].x, m.ref_points[k].y, 1);
        const Eigen::Vector3d xc = *tc * Eigen::Vector3d(m.cur_points[k].x, m.cur_points[k].y, 1);
        Eigen::Matrix<double, 9, 1> row;
        row << xc.x() * xr.x(), xc.x() * xr.y(), xc.x(),
               xc.y() * xr.x(), xc.y() * xr.y(), xc.y(),
               xr.x(), xr.y(), 1.0;
        ata.noalias() += row * row.transpose();
    }

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(ata);
    if (eig.info() != Eigen::Success) return std::nullopt;
    const Eigen::Matrix<double, 9, 1> v = eig.eigenvectors().col(0);
    Eigen::Matrix3d fn;
    fn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d sv = svd.singularValues();
    sv.z() = 0.0; // rank-2 enforcement
    fn = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();

    Eigen::Matrix3d f = tc->transpose() * fn * *tr;
    const double norm = f.norm();
    if (!(norm > 1e-15) || !f.allFinite()) return std::nullopt;
    f /= norm;
    // Canonical sign: largest-magnitude entry positive.
    int r, c;
    f.cwiseAbs().maxCoeff(&r, &c);
    if (f(r, c) < 0) f = -f;
    return f;
}

} // namespace detail

struct RansacResult {
    std::optional<FundamentalMatrix> fundamental;
    MatchSet matches;
    bool degenerate = false; // epipolar stage skipped, AfterGms mask kept
    int iterations = 0;
};

// Epipolar verification of the entering inliers. If the consensus drops below
// half of them (rotation-only motion and similar near-degenerate geometry)
// the stage is skipped and the incoming mask survives.
inline RansacResult ransac_fundamental(const MatchSet& in, std::mt19937& rng,
                                       const RansacParams& p = {}) {
    std::vector<int> idx;
    for (std::size_t k = 0; k < in.size(); ++k)
        if (in.inlier_mask[k]) idx.push_back(static_cast<int>(k));
    const int n = static_cast<int>(idx.size());
    if (n < 8)
        throw Error(ErrorCode::InsufficientMatches, "ransac_fundamental: fewer than 8 matches");

    RansacResult res;
    res.matches = in;

    std::vector<int> pool = idx;
    std::vector<int> sample(8);
    std::vector<int> best_inliers;
    int allowed = p.max_iterations;
    int it = 0;
    while (it < allowed) {
        ++it;
        for (int s = 0; s < 8; ++s) {
            std::uniform_int_distribution<int> pick(s, n - 1);
            std::swap(pool[s], pool[pick(rng)]);
            sample[s] = pool[s];
        }
        const auto f = detail::fit_fundamental(in, sample);
        if (!f) continue;

        std::vector<int> inliers;
        inliers.reserve(idx.size());
        const FundamentalMatrix fm{*f};
        for (int k : idx)
            if (symmetric_epipolar_distance(fm, in.ref_points[k], in.cur_points[k]) <=
                p.threshold_px)
                inliers.push_back(k);

        if (inliers.size() > best_inliers.size()) {
            best_inliers = std::move(inliers);
            const double w = static_cast<double>(best_inliers.size()) / n;
            const double denom = std::log(1.0 - std::min(std::pow(w, 8), 1.0 - 1e-12));
            if (denom < 0.0) {
                const int needed =
                    static_cast<int>(std::ceil(std::log(1.0 - p.confidence) / denom));
                allowed = std::clamp(needed, it, allowed);
            }
        }
    }
    res.iterations = it;

    std::optional<Eigen::Matrix3d> refit;
    if (static_cast<int>(best_inliers.size()) >= 8)
        refit = detail::fit_fundamental(in, best_inliers);
    if (!refit) {
        res.degenerate = true;
        return res;
    }
    res.fundamental = FundamentalMatrix{*refit};

    std::vector<char> final_mask(in.size(), 0);
    std::size_t final_count = 0;
    for (int k : idx) {
        if (symmetric_epipolar_distance(*res.fundamental, in.ref_points[k], in.cur_points[k]) <=
            p.threshold_px) {
            final_mask[k] = 1;
            ++final_count;
        }
    }

    if (final_count * 2 < static_cast<std::size_t>(n)) {
        res.degenerate = true; // keep the incoming mask
        return res;
    }
    res.matches.inlier_mask = std::move(final_mask);
    res.matches.stage = MatchStage::AfterEpipolar;
    return res;
}

struct RefineResult {
    MatchSet matches;
    std::optional<FundamentalMatrix> fundamental;
    bool degenerate = false;
    int ransac_iterations = 0;
};

// Full second stage: grid filter, then epipolar verification of its
// survivors. Pair ordering is preserved throughout; only masks change.
inline RefineResult refine(const MatchSet& raw, int ref_w, int ref_h, int cur_w, int cur_h,
                           std::mt19937& rng, const GmsParams& gp = {},
                           const RansacParams& rp = {}) {
    RefineResult res;
    if (raw.size() == 0) {
        res.matches = raw;
        res.matches.stage = MatchStage::AfterGms;
        return res;
    }
    res.matches = gms_filter(raw, ref_w, ref_h, cur_w, cur_h, gp);
    RansacResult rr = ransac_fundamental(res.matches, rng, rp);
    res.fundamental = rr.fundamental;
    res.degenerate = rr.degenerate;
    res.ransac_iterations = rr.iterations;
    if (!rr.degenerate) res.matches = std::move(rr.matches);
    return res;
}

} // namespace flowvo
