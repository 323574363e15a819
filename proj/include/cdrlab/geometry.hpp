#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "cdrlab/errors.hpp"

namespace cdrlab {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
};

// Axis-aligned rectangle, used for buildings. Occlusion tests work with the
// open interior: grazing along a wall does not count as passing through.
struct Rect {
    double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

    bool valid() const { return xmin < xmax && ymin < ymax; }

    bool contains_interior(Vec2 p) const {
        return p.x > xmin && p.x < xmax && p.y > ymin && p.y < ymax;
    }

    bool contains_closed(Vec2 p) const {
        return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
    }

    bool inside(const Rect& outer) const {
        return xmin >= outer.xmin && ymin >= outer.ymin && xmax <= outer.xmax &&
               ymax <= outer.ymax;
    }

    bool overlaps(const Rect& o) const {
        return xmin < o.xmax && o.xmin < xmax && ymin < o.ymax && o.ymin < ymax;
    }
};

struct WallSegment {
    Vec2 a, b;
};

/// The four walls of a rectangle, counterclockwise from the south wall.
inline std::array<WallSegment, 4> rect_walls(const Rect& r) {
    const Vec2 sw{r.xmin, r.ymin}, se{r.xmax, r.ymin};
    const Vec2 ne{r.xmax, r.ymax}, nw{r.xmin, r.ymax};
    return {WallSegment{sw, se}, WallSegment{se, ne}, WallSegment{ne, nw},
            WallSegment{nw, sw}};
}

/// True iff the open segment p..q passes through the open interior of r.
/// Touching a wall or a corner, or running along a wall, is not a crossing.
inline bool segment_crosses_interior(Vec2 p, Vec2 q, const Rect& r) {
    const Vec2 d = q - p;
    double tlo = 0.0, thi = 1.0;
    const double lo[2] = {r.xmin, r.ymin};
    const double hi[2] = {r.xmax, r.ymax};
    const double pp[2] = {p.x, p.y};
    const double dd[2] = {d.x, d.y};
    for (int axis = 0; axis < 2; ++axis) {
        if (dd[axis] == 0.0) {
            if (pp[axis] <= lo[axis] || pp[axis] >= hi[axis]) return false;
        } else {
            double t1 = (lo[axis] - pp[axis]) / dd[axis];
            double t2 = (hi[axis] - pp[axis]) / dd[axis];
            if (t1 > t2) std::swap(t1, t2);
            tlo = std::max(tlo, t1);
            thi = std::min(thi, t2);
            if (tlo >= thi) return false;
        }
    }
    return tlo < thi;
}

/// Mirror image of p across the infinite line through the wall.
inline Vec2 mirror_across_line(Vec2 p, const WallSegment& wall) {
    const Vec2 u = wall.b - wall.a;
    const double uu = u.dot(u);
    if (uu == 0.0) throw Error("degenerate wall segment");
    const Vec2 w = p - wall.a;
    const Vec2 foot = wall.a + u * (w.dot(u) / uu);
    return foot * 2.0 - p;
}

// One specular bounce off a wall, if geometrically valid: the reflection
// point where the mirror-image ray meets the wall segment. The boolean is
// false when the ray misses the segment or runs parallel to it.
inline std::pair<bool, Vec2> reflection_point(Vec2 source, Vec2 target,
                                              const WallSegment& wall) {
    const Vec2 mirror = mirror_across_line(source, wall);
    const Vec2 u = wall.b - wall.a;
    const Vec2 v = target - mirror;
    const double denom = u.cross(v);
    if (denom == 0.0) return {false, {}};
    // t along mirror->target where it meets the wall line
    const double t = u.cross(wall.a - mirror) / denom;
    if (!(t > 0.0 && t < 1.0)) return {false, {}};
    const Vec2 point = mirror + v * t;
    // s along the wall segment itself
    const double s = (point - wall.a).dot(u) / u.dot(u);
    if (!(s >= 0.0 && s <= 1.0)) return {false, {}};
    return {true, point};
}

} // namespace cdrlab
