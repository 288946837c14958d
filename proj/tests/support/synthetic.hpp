#pragma once

// Synthetic RGB-D scene shared by the tests: a closed textured box rendered
// by per-pixel raycasting, deterministic trajectories to fly through it, and
// a writer that lays the frames out as a TUM-format sequence directory.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "flowvo/camera.hpp"
#include "flowvo/image.hpp"
#include "flowvo/png_io.hpp"
#include "flowvo/se3.hpp"
#include "flowvo/trajectory.hpp"

namespace synth {

// Deterministic integer hash -> [0, 1). Explicit mixing, no std::hash, so
// rendered fixtures are identical across platforms and standard libraries.
inline double hash01(std::uint32_t x, std::uint32_t y, std::uint32_t salt) {
    std::uint32_t h = x * 0x8da6b343u + y * 0xd8163841u + salt * 0xcb1ab31fu;
    h ^= h >> 13;
    h *= 0x7feb352du;
    h ^= h >> 15;
    h *= 0x846ca68bu;
    h ^= h >> 16;
    return h * (1.0 / 4294967296.0);
}

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise on an integer lattice, bilinearly smoothed.
inline double value_noise(double u, double v, std::uint32_t salt) {
    const double fu = std::floor(u), fv = std::floor(v);
    const auto iu = static_cast<std::uint32_t>(static_cast<std::int64_t>(fu) & 0xffff);
    const auto iv = static_cast<std::uint32_t>(static_cast<std::int64_t>(fv) & 0xffff);
    const double tu = smoothstep(u - fu), tv = smoothstep(v - fv);
    const double a = hash01(iu, iv, salt), b = hash01(iu + 1, iv, salt);
    const double c = hash01(iu, iv + 1, salt), d = hash01(iu + 1, iv + 1, salt);
    return (a + tu * (b - a)) * (1.0 - tv) + (c + tu * (d - c)) * tv;
}

// Random 8px blocks softened by two box passes. Block corners give the flow
// tracker steep gradients with a smooth basin, so its mean-residual stop
// lands well inside a quarter pixel; value noise alone is too shallow for
// that.
inline flowvo::GrayImage blocks(int w, int h, std::uint32_t salt) {
    std::vector<double> a(static_cast<std::size_t>(w) * h), b(a.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            a[static_cast<std::size_t>(y) * w + x] = hash01(x / 8, y / 8, salt) > 0.5 ? 235.0 : 20.0;
    for (int pass = 0; pass < 2; ++pass) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double sum = 0.0;
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int sx = x + dx, sy = y + dy;
                        if (sx < 0 || sx >= w || sy < 0 || sy >= h) continue;
                        sum += a[static_cast<std::size_t>(sy) * w + sx];
                        ++n;
                    }
                b[static_cast<std::size_t>(y) * w + x] = sum / n;
            }
        a.swap(b);
    }
    flowvo::GrayImage img = flowvo::GrayImage::blank(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = static_cast<std::uint8_t>(
                std::lround(a[static_cast<std::size_t>(y) * w + x]));
    return img;
}

// Whole-pixel roll with clamped borders: an exact displacement oracle.
inline flowvo::GrayImage shift_integer(const flowvo::GrayImage& src, int dx, int dy) {
    flowvo::GrayImage out = flowvo::GrayImage::blank(src.width, src.height);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            const int sx = std::clamp(x - dx, 0, src.width - 1);
            const int sy = std::clamp(y - dy, 0, src.height - 1);
            out.at(x, y) = src.at(sx, sy);
        }
    return out;
}

// Bilinear resample at a fractional displacement.
inline flowvo::GrayImage shift_subpixel(const flowvo::GrayImage& src, double dx, double dy) {
    flowvo::GrayImage out = flowvo::GrayImage::blank(src.width, src.height);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            const double sx = std::clamp(x - dx, 0.0, src.width - 1.000001);
            const double sy = std::clamp(y - dy, 0.0, src.height - 1.000001);
            out.at(x, y) = static_cast<std::uint8_t>(
                std::clamp<long>(std::lround(flowvo::sample_bilinear(src, sx, sy)), 0, 255));
        }
    return out;
}

// Pre-baked multi-octave texture, bilinearly sampled with wrapping.
struct Texture {
    int size = 1024;
    std::vector<float> data;

    static Texture make(std::uint32_t salt) {
        Texture t;
        t.data.resize(static_cast<std::size_t>(t.size) * t.size);
        for (int y = 0; y < t.size; ++y) {
            for (int x = 0; x < t.size; ++x) {
                // the fine octave carries most of the weight: rendered
                // frames need strong pixel-scale gradients for the flow
                // tracker to localize well
                const double n = 0.25 * value_noise(x / 64.0, y / 64.0, salt) +
                                 0.30 * value_noise(x / 16.0, y / 16.0, salt + 101) +
                                 0.45 * value_noise(x / 4.0, y / 4.0, salt + 202);
                t.data[static_cast<std::size_t>(y) * t.size + x] = static_cast<float>(n);
            }
        }
        return t;
    }

    float sample(double u, double v) const {
        u = std::fmod(u, static_cast<double>(size));
        v = std::fmod(v, static_cast<double>(size));
        if (u < 0) u += size;
        if (v < 0) v += size;
        const int x0 = static_cast<int>(u), y0 = static_cast<int>(v);
        const int x1 = (x0 + 1) % size, y1 = (y0 + 1) % size;
        const float tu = static_cast<float>(u - x0), tv = static_cast<float>(v - y0);
        const float a = data[static_cast<std::size_t>(y0) * size + x0];
        const float b = data[static_cast<std::size_t>(y0) * size + x1];
        const float c = data[static_cast<std::size_t>(y1) * size + x0];
        const float d = data[static_cast<std::size_t>(y1) * size + x1];
        return (a + tu * (b - a)) * (1.0f - tv) + (c + tu * (d - c)) * tv;
    }
};

// Closed axis-aligned box: x = +-2, y = +-1.5, z = +-4 metres, each face
// carrying its own texture. Cameras fly inside; every ray hits a face.
struct Room {
    flowvo::CameraIntrinsics k;
    std::vector<Texture> faces;
    double texture_px_per_m = 150.0;

    static const Room& instance() {
        static const Room room = [] {
            Room r;
            r.k.fx = 525.0;
            r.k.fy = 525.0;
            r.k.cx = 319.5;
            r.k.cy = 239.5;
            r.k.depth_scale = 5000.0;
            r.k.width = 640;
            r.k.height = 480;
            r.faces.reserve(6);
            for (std::uint32_t f = 0; f < 6; ++f) r.faces.push_back(Texture::make(7u + 31u * f));
            return r;
        }();
        return room;
    }

    // pose maps world -> camera. Outputs are sized to the intrinsics.
    void render(const flowvo::SE3Pose& pose, flowvo::GrayImage& gray,
                flowvo::DepthImage& depth) const {
        gray = flowvo::GrayImage::blank(k.width, k.height);
        depth = flowvo::DepthImage::blank(k.width, k.height);

        const Eigen::Matrix3d rt = pose.rotation.transpose();
        const Eigen::Vector3d origin = -(rt * pose.translation); // camera centre, world

        // face: axis index, plane coordinate, the two in-plane axes
        struct Face {
            int axis;
            double value;
            int ua, va;
        };
        static const Face kFaces[6] = {{0, -2.0, 1, 2}, {0, 2.0, 1, 2},  {1, -1.5, 0, 2},
                                       {1, 1.5, 0, 2},  {2, -4.0, 0, 1}, {2, 4.0, 0, 1}};
        const double kBound[3] = {2.0, 1.5, 4.0};

        for (int py = 0; py < k.height; ++py) {
            for (int px = 0; px < k.width; ++px) {
                const Eigen::Vector3d dir_cam((px - k.cx) / k.fx, (py - k.cy) / k.fy, 1.0);
                const Eigen::Vector3d dir = rt * dir_cam;

                double best_s = 1e30;
                int best_face = -1;
                for (int f = 0; f < 6; ++f) {
                    const Face& face = kFaces[f];
                    const double da = dir(face.axis);
                    if (std::fabs(da) < 1e-12) continue;
                    const double s = (face.value - origin(face.axis)) / da;
                    if (s <= 1e-9 || s >= best_s) continue;
                    bool inside = true;
                    for (int a = 0; a < 3; ++a) {
                        if (a == face.axis) continue;
                        const double c = origin(a) + s * dir(a);
                        if (c < -kBound[a] - 1e-9 || c > kBound[a] + 1e-9) inside = false;
                    }
                    if (!inside) continue;
                    best_s = s;
                    best_face = f;
                }

                if (best_face < 0) continue; // cannot happen inside the box
                const Face& face = kFaces[best_face];
                const Eigen::Vector3d hit = origin + best_s * dir;
                const float tex = faces[best_face].sample(hit(face.ua) * texture_px_per_m,
                                                          hit(face.va) * texture_px_per_m);
                const int g = static_cast<int>(std::lround(20.0 + 215.0 * tex));
                gray.at(px, py) = static_cast<std::uint8_t>(std::clamp(g, 0, 255));

                // camera-space depth: p_cam = s * dir_cam, whose z is s itself
                const long raw = std::lround(best_s * k.depth_scale);
                depth.at(px, py) = static_cast<std::uint16_t>(std::clamp(raw, 1L, 65535L));
            }
        }
    }
};

// Build a world-to-camera pose from a camera centre and yaw/pitch (radians)
// of the viewing direction (zero angles look along +z).
inline flowvo::SE3Pose camera_pose(const Eigen::Vector3d& centre, double yaw, double pitch) {
    const Eigen::Matrix3d cam_to_world =
        (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()) *
         Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()))
            .toRotationMatrix();
    flowvo::SE3Pose pose;
    pose.rotation = cam_to_world.transpose();
    pose.translation = -(pose.rotation * centre);
    return pose;
}

// Smooth low-speed sway around the box centre; per-frame flow of a few px.
inline std::vector<flowvo::SE3Pose> sway_trajectory(int frames) {
    std::vector<flowvo::SE3Pose> out;
    out.reserve(frames);
    constexpr double kTau = 6.283185307179586;
    for (int i = 0; i < frames; ++i) {
        const Eigen::Vector3d centre(0.40 * std::sin(kTau * i / 180.0),
                                     0.10 * std::sin(kTau * i / 140.0 + 1.0),
                                     0.15 * std::sin(kTau * i / 200.0));
        const double yaw = 0.06 * std::sin(kTau * i / 160.0);
        const double pitch = 0.03 * std::sin(kTau * i / 120.0 + 0.5);
        out.push_back(camera_pose(centre, yaw, pitch));
    }
    return out;
}

// Constant-acceleration sideways slide: per-frame displacement grows
// linearly, so late frame pairs have large image motion.
inline std::vector<flowvo::SE3Pose> accelerating_trajectory(int frames, double accel) {
    std::vector<flowvo::SE3Pose> out;
    out.reserve(frames);
    for (int i = 0; i < frames; ++i)
        out.push_back(camera_pose(Eigen::Vector3d(0.5 * accel * i * i, 0.0, 0.0), 0.0, 0.0));
    return out;
}

// Lateral dolly along +x at constant speed, facing the +z wall: a uniform
// flow field over a fronto-parallel textured plane.
inline std::vector<flowvo::SE3Pose> dolly_trajectory(int frames, double step) {
    std::vector<flowvo::SE3Pose> out;
    out.reserve(frames);
    for (int i = 0; i < frames; ++i)
        out.push_back(camera_pose(Eigen::Vector3d(step * i, 0.0, 0.0), 0.0, 0.0));
    return out;
}

inline std::vector<flowvo::SE3Pose> static_trajectory(int frames) {
    return std::vector<flowvo::SE3Pose>(static_cast<std::size_t>(frames),
                                        flowvo::SE3Pose::identity());
}

// Render every pose and write a TUM-format sequence directory: rgb/, depth/,
// rgb.txt, depth.txt, groundtruth.txt, calibration.txt.
inline void write_tum_fixture(const std::string& dir, const Room& room,
                              const std::vector<flowvo::SE3Pose>& world_to_cam,
                              double t0 = 1000.0, double dt = 1.0 / 30.0) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "rgb");
    fs::create_directories(fs::path(dir) / "depth");

    std::string rgb_list = "# color images\n";
    std::string depth_list = "# depth images\n";
    flowvo::Trajectory gt;

    flowvo::GrayImage gray;
    flowvo::DepthImage depth;
    char stamp[32], line[128];
    for (std::size_t i = 0; i < world_to_cam.size(); ++i) {
        const double ts = t0 + dt * static_cast<double>(i);
        std::snprintf(stamp, sizeof(stamp), "%.6f", ts);

        room.render(world_to_cam[i], gray, depth);
        const std::string rgb_rel = std::string("rgb/") + stamp + ".png";
        const std::string depth_rel = std::string("depth/") + stamp + ".png";
        flowvo::write_png_gray8(gray, (fs::path(dir) / rgb_rel).string());
        flowvo::write_png_gray16(depth, (fs::path(dir) / depth_rel).string());

        std::snprintf(line, sizeof(line), "%s %s\n", stamp, rgb_rel.c_str());
        rgb_list += line;
        std::snprintf(line, sizeof(line), "%s %s\n", stamp, depth_rel.c_str());
        depth_list += line;

        gt.push_back({ts, flowvo::inverse(world_to_cam[i])}); // file holds camera-to-world
    }

    auto dump = [&](const char* name, const std::string& text) {
        std::FILE* f = std::fopen((fs::path(dir) / name).string().c_str(), "wb");
        std::fwrite(text.data(), 1, text.size(), f);
        std::fclose(f);
    };
    dump("rgb.txt", rgb_list);
    dump("depth.txt", depth_list);
    flowvo::write_trajectory(gt, (fs::path(dir) / "groundtruth.txt").string());

    char calib[128];
    std::snprintf(calib, sizeof(calib), "%.1f %.1f %.1f %.1f %.1f %d %d\n", room.k.fx, room.k.fy,
                  room.k.cx, room.k.cy, room.k.depth_scale, room.k.width, room.k.height);
    dump("calibration.txt", calib);
}

// Unique scratch directory under the system temp root.
inline std::string scratch_dir(const std::string& tag) {
    namespace fs = std::filesystem;
    const fs::path p = fs::temp_directory_path() / ("flowvo_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

} // namespace synth
