#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cdrlab/angles.hpp"
#include "cdrlab/csv.hpp"
#include "cdrlab/dataset.hpp"
#include "cdrlab/errors.hpp"
#include "cdrlab/geometry.hpp"
#include "cdrlab/rng.hpp"

namespace cdrlab {

/// Ground truth as a queryable map: position -> (target angles, context id).
using GroundTruthOracle =
    std::function<std::pair<AngleTarget, int>(const Covariate&)>;

// ---- toy regression world ------------------------------------------------

// Scalar covariate on [-1,1], two contexts split at a boundary. The target
// is a fixed smooth curve; the teacher reproduces it exactly in city A and
// adds a smooth positive offset in city B. Labels are stored as
// (azimuth, elevation) with elevation pinned to pi/2 so the angular loss
// reduces to its azimuth term.
struct ToySpec {
    std::size_t labeled = 40;
    std::size_t unlabeled = 2000;
    std::size_t test = 2000;
    double boundary = 0.0;        // context A iff x < boundary
    std::string target = "sine";  // sine | ramp
    double corruption = 2.0;      // teacher offset amplitude in city B
    double noise = 0.0;           // label noise std dev (azimuth only)
};

inline double toy_target(const ToySpec& spec, double x) {
    if (spec.target == "sine") return std::sin(std::numbers::pi * x);
    if (spec.target == "ramp") return x;
    throw ConfigError("unknown toy target '" + spec.target + "'");
}

inline int toy_context(const ToySpec& spec, double x) {
    return x < spec.boundary ? 0 : 1;
}

/// Smooth strictly positive offset shape scaled by the corruption amplitude.
inline double toy_corruption(const ToySpec& spec, double x) {
    return spec.corruption * (0.6 + 0.4 * std::cos(2.0 * std::numbers::pi * x));
}

inline Teacher make_toy_teacher(const ToySpec& spec) {
    return [spec](const Covariate& x) -> Label {
        const double v = x.at(0);
        double az = toy_target(spec, v);
        if (toy_context(spec, v) == 1) az += toy_corruption(spec, v);
        return {az, std::numbers::pi / 2.0};
    };
}

inline GroundTruthOracle make_toy_oracle(const ToySpec& spec) {
    return [spec](const Covariate& x) {
        const double v = x.at(0);
        return std::make_pair(AngleTarget{toy_target(spec, v), std::numbers::pi / 2.0},
                              toy_context(spec, v));
    };
}

struct ToyWorld {
    StratifiedDataset labeled;
    StratifiedDataset unlabeled; // ground truth kept only in y_masked
    StratifiedDataset test;
    GroundTruthOracle oracle;
    Teacher teacher;
};

inline ToyWorld toy_generate(const ToySpec& spec, std::uint64_t seed) {
    Rng base(seed);
    auto draw = [&](Rng rng, std::size_t count, bool labeled) {
        StratifiedDataset ds(2, 1, 2);
        for (std::size_t i = 0; i < count; ++i) {
            const double x = rng.next_double(-1.0, 1.0);
            double az = toy_target(spec, x);
            if (spec.noise > 0.0) az += spec.noise * rng.next_normal();
            Sample s;
            s.x = {x};
            s.context = toy_context(spec, x);
            if (labeled)
                s.y = Label{az, std::numbers::pi / 2.0};
            else
                s.y_masked = Label{az, std::numbers::pi / 2.0};
            ds.add(std::move(s));
        }
        return ds;
    };
    ToyWorld world{draw(base.fork(1), spec.labeled, true),
                   draw(base.fork(2), spec.unlabeled, false),
                   draw(base.fork(3), spec.test, true),
                   make_toy_oracle(spec), make_toy_teacher(spec)};
    return world;
}

// ---- urban beamforming world ----------------------------------------------

// Flat-ground city block: axis-aligned buildings inside a rectangular
// boundary, one elevated base station, devices at a fixed lower height.
// Angles follow the east = 0, counterclockwise azimuth convention in
// [-pi, pi); elevation is the polar angle from zenith, so a transmitter
// looking at the horizon reads pi/2 and looking straight down reads pi.
struct UrbanScene {
    Rect bounds{0.0, 0.0, 600.0, 400.0};
    Vec2 bs{90.0, 200.0};
    double bs_height = 25.0;
    double device_height = 1.5;
    std::vector<Rect> buildings;
};

inline void validate_scene(const UrbanScene& scene) {
    if (!scene.bounds.valid()) throw Error("scene bounds are degenerate");
    if (!(scene.bs_height > 0.0) || scene.device_height < 0.0 ||
        scene.bs_height <= scene.device_height)
        throw Error("base station must sit above device height");
    for (std::size_t i = 0; i < scene.buildings.size(); ++i) {
        const Rect& b = scene.buildings[i];
        if (!b.valid())
            throw Error("building " + std::to_string(i) + " is degenerate");
        if (!b.inside(scene.bounds))
            throw Error("building " + std::to_string(i) + " leaves the scene bounds");
        if (b.contains_closed(scene.bs))
            throw Error("base station is inside building " + std::to_string(i));
    }
    if (!scene.bounds.contains_closed(scene.bs))
        throw Error("base station is outside the scene bounds");
}

inline void check_device_position(const UrbanScene& scene, Vec2 device) {
    if (!scene.bounds.contains_closed(device))
        throw InvalidPositionError("device (" + std::to_string(device.x) + ", " +
                                   std::to_string(device.y) +
                                   ") is outside the scene bounds");
    for (std::size_t i = 0; i < scene.buildings.size(); ++i)
        if (scene.buildings[i].contains_interior(device))
            throw InvalidPositionError("device (" + std::to_string(device.x) +
                                       ", " + std::to_string(device.y) +
                                       ") is inside building " + std::to_string(i));
}

inline bool occluded(const UrbanScene& scene, Vec2 p, Vec2 q,
                     const Rect* skip = nullptr) {
    for (const Rect& b : scene.buildings) {
        if (&b == skip) continue;
        if (segment_crosses_interior(p, q, b)) return true;
    }
    return false;
}

/// True iff the straight base-station-to-device path clears every building.
inline bool los_check(const UrbanScene& scene, Vec2 device) {
    check_device_position(scene, device);
    return !occluded(scene, scene.bs, device);
}

namespace detail {

inline AngleTarget departure_angles(const UrbanScene& scene, Vec2 first_hop,
                                    double horizontal_len) {
    const double dh = scene.bs_height - scene.device_height;
    const Vec2 d = first_hop - scene.bs;
    return {wrap_pi(std::atan2(d.y, d.x)),
            std::numbers::pi / 2.0 + std::atan2(dh, horizontal_len)};
}

} // namespace detail

/// Direct-ray departure angles, buildings ignored. Total on the scene.
inline AngleTarget direct_ray_aod(const UrbanScene& scene, Vec2 device) {
    check_device_position(scene, device);
    return detail::departure_angles(scene, device, (device - scene.bs).norm());
}

/// The geometry-blind labeling function: always the direct ray.
inline AngleTarget teacher_aod(const UrbanScene& scene, Vec2 device) {
    return direct_ray_aod(scene, device);
}

// Strongest-path departure angles. LOS devices take the direct ray. NLOS
// devices take the best single-bounce specular reflection over all building
// walls (image-source construction, both legs unobstructed), ranked by
// received power 0.3 / (3D path length)^2; ties go to the first wall in
// building-then-wall enumeration order. If no bounce is feasible the direct
// ray is used as a fallback label.
inline AngleTarget ground_truth_aod(const UrbanScene& scene, Vec2 device) {
    check_device_position(scene, device);
    if (!occluded(scene, scene.bs, device))
        return detail::departure_angles(scene, device, (device - scene.bs).norm());

    const double dh = scene.bs_height - scene.device_height;
    double best_power = -1.0;
    Vec2 best_point{};
    double best_len = 0.0;
    for (const Rect& building : scene.buildings) {
        for (const WallSegment& wall : rect_walls(building)) {
            // Walls wind counterclockwise, so the building interior lies
            // left of each directed segment; a physical bounce needs the
            // base station and the device strictly on the right, outside.
            const Vec2 along = wall.b - wall.a;
            if (along.cross(scene.bs - wall.a) >= 0.0 ||
                along.cross(device - wall.a) >= 0.0)
                continue;
            const auto [ok, point] = reflection_point(scene.bs, device, wall);
            if (!ok) continue;
            // Both endpoints sit strictly in the exterior half-plane, so
            // the legs stay there too and cannot pass through the
            // reflecting building; testing it anyway only produces false
            // rejections where a leg grazes the wall it bounced off.
            if (occluded(scene, scene.bs, point, &building) ||
                occluded(scene, point, device, &building))
                continue;
            const double len = (point - scene.bs).norm() + (device - point).norm();
            const double power = 0.3 / (len * len + dh * dh);
            if (power > best_power) {
                best_power = power;
                best_point = point;
                best_len = len;
            }
        }
    }
    if (best_power < 0.0) return direct_ray_aod(scene, device);
    return detail::departure_angles(scene, best_point, best_len);
}

inline Teacher make_urban_teacher(const UrbanScene& scene) {
    return [scene](const Covariate& x) -> Label {
        const AngleTarget t = teacher_aod(scene, {x.at(0), x.at(1)});
        return {t.azimuth, t.elevation};
    };
}

inline GroundTruthOracle make_urban_oracle(const UrbanScene& scene) {
    return [scene](const Covariate& x) {
        const Vec2 p{x.at(0), x.at(1)};
        return std::make_pair(ground_truth_aod(scene, p),
                              los_check(scene, p) ? 1 : 0);
    };
}

// ---- urban sampling --------------------------------------------------------

struct UrbanCounts {
    std::size_t train = 30000;
    std::size_t test = 5975;
};

struct UrbanWorld {
    StratifiedDataset train; // fully labeled; splits are applied downstream
    StratifiedDataset test;
    GroundTruthOracle oracle;
    Teacher teacher;
};

/// One uniform free-space position via rejection from the bounding box.
inline Vec2 sample_free_position(const UrbanScene& scene, Rng& rng) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const Vec2 p{rng.next_double(scene.bounds.xmin, scene.bounds.xmax),
                     rng.next_double(scene.bounds.ymin, scene.bounds.ymax)};
        bool blocked = false;
        for (const Rect& b : scene.buildings)
            if (b.contains_interior(p)) {
                blocked = true;
                break;
            }
        if (!blocked) return p;
    }
    throw GenerationError("free space too small: rejection sampling failed");
}

inline UrbanWorld urban_generate(const UrbanScene& scene, const UrbanCounts& counts,
                                 std::uint64_t seed) {
    validate_scene(scene);
    Rng base(seed);
    auto draw = [&](Rng rng, std::size_t count) {
        StratifiedDataset ds(2, 2, 2);
        for (std::size_t i = 0; i < count; ++i) {
            const Vec2 p = sample_free_position(scene, rng);
            const AngleTarget truth = ground_truth_aod(scene, p);
            Sample s;
            s.x = {p.x, p.y};
            s.context = occluded(scene, scene.bs, p) ? 0 : 1; // 1 iff LOS
            s.y = Label{truth.azimuth, truth.elevation};
            ds.add(std::move(s));
        }
        return ds;
    };
    return {draw(base.fork(1), counts.train), draw(base.fork(2), counts.test),
            make_urban_oracle(scene), make_urban_teacher(scene)};
}

// ---- scenes -----------------------------------------------------------------

/// The built-in city block: 600 m x 400 m, eight buildings, base station in
/// the lower-west quarter. A little over half of the free space ends up
/// shadowed, mostly by the central blocker, and almost every shadowed spot
/// still sees a reflecting wall: the west wall bounces backward into the
/// whole central band and the north row covers the rest, so single-bounce
/// paths reach behind the blockers instead of degenerating to the direct
/// ray. The hut just west of the base station gives the predicted azimuth
/// field a place to put its unavoidable wrap line: azimuth winds by 2 pi
/// around the base station, so any continuous model must carry a seam from
/// it to the nearest obstruction, and the natural parking spot is the
/// atan2 branch cut pointing due west. Twelve meters of seam is far
/// cheaper than a seam running fifty meters to the west wall, and the
/// hut's own shadow hides the rest of that ray from the line-of-sight
/// region.
inline UrbanScene default_urban_scene() {
    UrbanScene scene;
    scene.bounds = {0.0, 0.0, 600.0, 400.0};
    scene.bs = {110.0, 70.0};
    scene.bs_height = 25.0;
    scene.device_height = 1.5;
    scene.buildings = {
        {0.0, 340.0, 120.0, 400.0},   {126.0, 340.0, 424.0, 400.0},
        {430.0, 340.0, 600.0, 400.0}, {180.0, 45.0, 245.0, 120.0},
        {0.0, 0.0, 60.0, 160.0},      {300.0, 0.0, 360.0, 30.0},
        {430.0, 0.0, 490.0, 30.0},    {86.0, 66.0, 98.0, 72.0},
    };
    validate_scene(scene);
    return scene;
}

/// Random rectangles with street gaps, then a base station in clear space.
inline UrbanScene random_urban_scene(std::uint64_t seed,
                                     Rect bounds = {0.0, 0.0, 600.0, 400.0}) {
    UrbanScene scene;
    scene.bounds = bounds;
    const double margin = 20.0;
    const double gap = 15.0;
    const Rng base(Rng::splitmix(seed) ^ 0x5CE17EULL);
    // Sequential placement can paint itself into a corner; restart the whole
    // layout instead of failing, so every seed yields a scene.
    for (std::uint64_t layout = 0; layout < 64; ++layout) {
        Rng rng = base.fork(layout);
        scene.buildings.clear();
        const std::size_t count = 8 + rng.next_below(5);
        bool complete = true;
        for (std::size_t i = 0; i < count && complete; ++i) {
            bool placed = false;
            for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
                const double w = rng.next_double(50.0, 120.0);
                const double h = rng.next_double(40.0, 100.0);
                const double x = rng.next_double(bounds.xmin + margin,
                                                 bounds.xmax - margin - w);
                const double y = rng.next_double(bounds.ymin + margin,
                                                 bounds.ymax - margin - h);
                const Rect candidate{x, y, x + w, y + h};
                const Rect inflated{x - gap, y - gap, x + w + gap, y + h + gap};
                bool clear = true;
                for (const Rect& b : scene.buildings)
                    if (b.overlaps(inflated)) {
                        clear = false;
                        break;
                    }
                if (clear) {
                    scene.buildings.push_back(candidate);
                    placed = true;
                }
            }
            complete = placed;
        }
        if (!complete) continue;
        for (int attempt = 0; attempt < 10000; ++attempt) {
            const Vec2 p{rng.next_double(bounds.xmin + margin, bounds.xmax - margin),
                         rng.next_double(bounds.ymin + margin, bounds.ymax - margin)};
            bool clear = true;
            for (const Rect& b : scene.buildings) {
                const Rect inflated{b.xmin - 5.0, b.ymin - 5.0, b.xmax + 5.0,
                                    b.ymax + 5.0};
                if (inflated.contains_closed(p)) {
                    clear = false;
                    break;
                }
            }
            if (clear) {
                scene.bs = p;
                validate_scene(scene);
                return scene;
            }
        }
    }
    throw GenerationError("no viable layout for this seed and bounds");
}

// ---- scene file -------------------------------------------------------------

inline void write_scene_file(const std::string& path, const UrbanScene& scene) {
    validate_scene(scene);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write scene file: " + path);
    out << "cdrlab-scene v1\n";
    out << "bounds " << format_double(scene.bounds.xmin) << " "
        << format_double(scene.bounds.ymin) << " "
        << format_double(scene.bounds.xmax) << " "
        << format_double(scene.bounds.ymax) << "\n";
    out << "bs " << format_double(scene.bs.x) << " " << format_double(scene.bs.y)
        << " " << format_double(scene.bs_height) << "\n";
    out << "device-height " << format_double(scene.device_height) << "\n";
    for (const Rect& b : scene.buildings)
        out << "building " << format_double(b.xmin) << " " << format_double(b.ymin)
            << " " << format_double(b.xmax) << " " << format_double(b.ymax) << "\n";
}

inline UrbanScene read_scene_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot read scene file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FileError("empty scene file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "cdrlab-scene v1")
        throw FileError("bad scene file magic in " + path);
    UrbanScene scene;
    scene.buildings.clear();
    bool have_bounds = false, have_bs = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        auto next = [&]() {
            double v;
            if (!(ss >> v))
                throw FileError("malformed scene line '" + line + "' in " + path);
            return v;
        };
        if (key == "bounds") {
            scene.bounds = {next(), next(), next(), next()};
            have_bounds = true;
        } else if (key == "bs") {
            scene.bs = {next(), next()};
            scene.bs_height = next();
            have_bs = true;
        } else if (key == "device-height") {
            scene.device_height = next();
        } else if (key == "building") {
            scene.buildings.push_back({next(), next(), next(), next()});
        } else {
            throw FileError("unknown scene key '" + key + "' in " + path);
        }
    }
    if (!have_bounds || !have_bs)
        throw FileError("scene file missing bounds or bs: " + path);
    validate_scene(scene);
    return scene;
}

} // namespace cdrlab
