#include "cowpro/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "cowpro/io.hpp"
#include "cowpro/rng.hpp"

namespace cowpro {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

struct Organ {
    std::string name;
    double cx, cy, cz;   // pixel / slice coordinates
    double ax, ay, az;   // semi-axes
    double intensity;
    bool present = true;
};

// Bright streaks that mimic organ intensity but lack its shape and slice
// coherence; they belong to no ground-truth mask and exist to make plain
// intensity matching insufficient.
struct Artifact {
    double cx, cy;
    double len, width, angle;
    double intensity;
    int z0, z1;  // short inclusive slice range
};

// In-plane radius scale of an ellipsoid at slice z; 0 when the slice is
// outside the organ's z extent.
double z_profile(const Organ& o, int z) {
    const double dz = (static_cast<double>(z) - o.cz) / o.az;
    const double f = 1.0 - dz * dz;
    return f > 0.0 ? std::sqrt(f) : 0.0;
}

std::vector<Organ> make_organs(int s, int z, Rng& rng) {
    const double S = static_cast<double>(s);
    const double Z = static_cast<double>(z);
    auto jitter = [&](double base, double amp) { return base + rng.uniform(-amp, amp); };

    std::vector<Organ> organs;
    // Large bright blob in the left half (its ground-truth quadrants are
    // TL/BL, so the quadrant prior has something to cut): the main
    // evaluation target.
    organs.push_back({"alpha", jitter(0.26 * S, 0.02 * S), jitter(0.50 * S, 0.04 * S),
                      jitter(0.50 * Z, 0.06 * Z), jitter(0.19 * S, 0.015 * S),
                      jitter(0.17 * S, 0.015 * S), jitter(0.44 * Z, 0.04 * Z),
                      jitter(0.80, 0.06), true});
    // Small bright blob, top-right.
    organs.push_back({"beta", jitter(0.76 * S, 0.03 * S), jitter(0.22 * S, 0.03 * S),
                      jitter(0.50 * Z, 0.08 * Z), jitter(0.09 * S, 0.01 * S),
                      jitter(0.09 * S, 0.01 * S), jitter(0.30 * Z, 0.03 * Z),
                      jitter(0.66, 0.05), true});
    // Dark blob, bottom-right; present in most scans.
    organs.push_back({"gamma", jitter(0.74 * S, 0.03 * S), jitter(0.75 * S, 0.03 * S),
                      jitter(0.50 * Z, 0.08 * Z), jitter(0.10 * S, 0.01 * S),
                      jitter(0.08 * S, 0.01 * S), jitter(0.33 * Z, 0.03 * Z),
                      jitter(0.12, 0.04), rng.uniform01() < 0.7});
    // Small bright blob, top-left; present in some scans.
    organs.push_back({"delta", jitter(0.18 * S, 0.02 * S), jitter(0.20 * S, 0.02 * S),
                      jitter(0.50 * Z, 0.08 * Z), jitter(0.07 * S, 0.008 * S),
                      jitter(0.07 * S, 0.008 * S), jitter(0.25 * Z, 0.03 * Z),
                      jitter(0.70, 0.05), rng.uniform01() < 0.5});
    return organs;
}

}  // namespace

DatasetInfo synth_dataset(const std::filesystem::path& out_dir, int n_scans, int slices_per_scan,
                          int image_size, std::uint64_t seed) {
    require(n_scans >= 1, "synth: need at least one scan");
    require(slices_per_scan >= 6, "synth: need at least 6 slices per scan");
    require(image_size >= 32 && image_size % 8 == 0,
            "synth: image_size must be >= 32 and divisible by 8");

    DatasetInfo info;
    info.root = out_dir;
    info.image_size = image_size;
    info.slices_per_scan = slices_per_scan;
    info.pool_split = slices_per_scan / 2;
    info.organs = {"alpha", "beta", "gamma", "delta"};
    for (int i = 0; i < n_scans; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "scan_%03d", i);
        info.scans.push_back(buf);
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "scans", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "scans").string() + ": " + ec.message());

    const int s = image_size;
    const int z_count = slices_per_scan;
    const std::size_t plane = static_cast<std::size_t>(s) * static_cast<std::size_t>(s);
    Rng master(mix64(seed));

    // Which quadrants each organ's ground truth touches, across all scans.
    std::set<std::pair<std::string, int>> organ_quadrants;

    for (int scan = 0; scan < n_scans; ++scan) {
        Rng rng = master.fork(static_cast<std::uint64_t>(scan) + 1);
        std::vector<Organ> organs = make_organs(s, z_count, rng);

        std::vector<Artifact> artifacts;
        const int n_artifacts = 3 + static_cast<int>(rng.randint(4));
        for (int a = 0; a < n_artifacts; ++a) {
            Artifact art;
            art.cx = rng.uniform(0.08, 0.92) * s;
            art.cy = rng.uniform(0.08, 0.92) * s;
            art.len = rng.uniform(0.10, 0.22) * s;
            art.width = rng.uniform(1.2, 2.2);
            art.angle = rng.uniform(0.0, kTau / 2.0);
            art.intensity = rng.uniform(0.70, 0.88);
            art.z0 = static_cast<int>(rng.randint(z_count));
            art.z1 = std::min(z_count - 1, art.z0 + static_cast<int>(rng.randint(3)));
            artifacts.push_back(art);
        }

        // Background texture: two interference patterns plus noise, with a
        // per-scan brightness shift.
        const double base = 0.40 + rng.uniform(-0.05, 0.05);
        const double fx = rng.uniform(1.0, 3.0), fy = rng.uniform(1.0, 3.0);
        const double px = rng.uniform(0.0, 1.0), py = rng.uniform(0.0, 1.0);
        const double fx2 = rng.uniform(4.0, 7.0), fy2 = rng.uniform(4.0, 7.0);
        const double px2 = rng.uniform(0.0, 1.0), py2 = rng.uniform(0.0, 1.0);

        Volume image;
        image.dtype = DType::kFloat32;
        image.dims = {static_cast<std::uint32_t>(z_count), static_cast<std::uint32_t>(s),
                      static_cast<std::uint32_t>(s)};
        image.f32.assign(static_cast<std::size_t>(image.count()), 0.0f);

        std::vector<Volume> masks(organs.size());
        for (auto& m : masks) {
            m.dtype = DType::kUint8;
            m.dims = image.dims;
            m.u8.assign(static_cast<std::size_t>(m.count()), 0);
        }

        for (int z = 0; z < z_count; ++z) {
            std::vector<int> owner(plane, -1);
            for (std::size_t oi = 0; oi < organs.size(); ++oi) {
                const Organ& o = organs[oi];
                if (!o.present) continue;
                const double f = z_profile(o, z);
                if (f <= 0.0) continue;
                const double rx = o.ax * f, ry = o.ay * f;
                if (rx < 1.0 || ry < 1.0) continue;
                const int x0 = std::max(0, static_cast<int>(std::floor(o.cx - rx)));
                const int x1 = std::min(s - 1, static_cast<int>(std::ceil(o.cx + rx)));
                const int y0 = std::max(0, static_cast<int>(std::floor(o.cy - ry)));
                const int y1 = std::min(s - 1, static_cast<int>(std::ceil(o.cy + ry)));
                for (int y = y0; y <= y1; ++y)
                    for (int x = x0; x <= x1; ++x) {
                        const double dx = (static_cast<double>(x) - o.cx) / rx;
                        const double dy = (static_cast<double>(y) - o.cy) / ry;
                        const double r2 = dx * dx + dy * dy;
                        if (r2 > 1.0) continue;
                        const std::size_t pi = static_cast<std::size_t>(y) * static_cast<std::size_t>(s) + static_cast<std::size_t>(x);
                        if (owner[pi] >= 0) continue;  // earlier organs keep their pixels
                        owner[pi] = static_cast<int>(oi);
                        masks[oi].u8[plane * static_cast<std::size_t>(z) + pi] = 1;
                    }
            }
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    const std::size_t pi = static_cast<std::size_t>(y) * static_cast<std::size_t>(s) + static_cast<std::size_t>(x);
                    double v;
                    if (owner[pi] >= 0) {
                        const Organ& o = organs[static_cast<std::size_t>(owner[pi])];
                        const double f = z_profile(o, z);
                        const double dx = (static_cast<double>(x) - o.cx) / (o.ax * f);
                        const double dy = (static_cast<double>(y) - o.cy) / (o.ay * f);
                        // mild interior shading, strong boundary contrast
                        v = o.intensity * (1.0 - 0.12 * (dx * dx + dy * dy));
                    } else {
                        v = base +
                            0.09 * std::sin(kTau * (fx * x / s + px)) * std::sin(kTau * (fy * y / s + py)) +
                            0.05 * std::sin(kTau * (fx2 * x / s + px2)) * std::sin(kTau * (fy2 * y / s + py2));
                        for (const Artifact& art : artifacts) {
                            if (z < art.z0 || z > art.z1) continue;
                            const double ca = std::cos(art.angle), sa = std::sin(art.angle);
                            const double rx = ca * (x - art.cx) + sa * (y - art.cy);
                            const double ry = -sa * (x - art.cx) + ca * (y - art.cy);
                            if (std::abs(rx) <= art.len / 2.0 && std::abs(ry) <= art.width)
                                v = art.intensity;
                        }
                    }
                    v += rng.uniform(-0.04, 0.04);
                    image.f32[plane * static_cast<std::size_t>(z) + pi] =
                        static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
        }

        // Every present organ must be visible on >= 3 consecutive slices.
        for (std::size_t oi = 0; oi < organs.size(); ++oi) {
            if (!organs[oi].present) continue;
            int best_run = 0, run = 0;
            for (int z = 0; z < z_count; ++z) {
                bool nonempty = false;
                for (std::size_t i = 0; i < plane && !nonempty; ++i)
                    nonempty = masks[oi].u8[plane * static_cast<std::size_t>(z) + i] != 0;
                run = nonempty ? run + 1 : 0;
                best_run = std::max(best_run, run);
            }
            require(best_run >= 3, "synth: organ " + organs[oi].name + " in scan " +
                                       std::to_string(scan) + " spans fewer than 3 consecutive slices");
            for (int z = 0; z < z_count; ++z)
                for (int q = 0; q < 4; ++q) {
                    const int ys = (q / 2) * (s / 2), xs = (q % 2) * (s / 2);
                    bool hit = false;
                    for (int y = ys; y < ys + s / 2 && !hit; ++y)
                        for (int x = xs; x < xs + s / 2 && !hit; ++x)
                            hit = masks[oi].u8[plane * static_cast<std::size_t>(z) +
                                               static_cast<std::size_t>(y) * static_cast<std::size_t>(s) +
                                               static_cast<std::size_t>(x)] != 0;
                    if (hit) organ_quadrants.insert({organs[oi].name, q});
                }
        }

        const auto dir = out_dir / "scans" / info.scans[static_cast<std::size_t>(scan)];
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
        write_volume(dir / "image.cwpv", image);
        for (std::size_t oi = 0; oi < organs.size(); ++oi)
            if (organs[oi].present)
                write_volume(dir / ("mask_" + organs[oi].name + ".cwpv"), masks[oi]);
    }

    save_dataset_info(info);

    QuadrantMap qmap;
    for (const auto& organ : info.organs) {
        std::vector<Quadrant> quads;
        for (int q = 0; q < 4; ++q)
            if (organ_quadrants.count({organ, q})) quads.push_back(static_cast<Quadrant>(q));
        if (!quads.empty()) qmap.organs.emplace_back(organ, std::move(quads));
    }
    std::ofstream os(out_dir / "quadrants.txt");
    if (!os) throw IoError("cannot write " + (out_dir / "quadrants.txt").string());
    os << quadrant_map_to_kv(qmap).to_text();

    return info;
}

}  // namespace cowpro
