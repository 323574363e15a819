#pragma once

#include <cmath>
#include <numbers>

namespace cdrlab {

/// Wrap an angle into [-pi, pi).
inline double wrap_pi(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a + std::numbers::pi, two_pi);
    if (r < 0.0) r += two_pi;
    return r - std::numbers::pi;
}

/// Clamp an elevation into [0, pi].
inline double clamp_elevation(double e) {
    if (e < 0.0) return 0.0;
    if (e > std::numbers::pi) return std::numbers::pi;
    return e;
}

// Azimuth/elevation pair. Azimuth convention is east = 0, counterclockwise
// positive, wrapped to [-pi, pi); elevation is measured from zenith, so the
// horizon sits at pi/2 and larger values point below it.
struct AngleTarget {
    double azimuth = 0.0;
    double elevation = 0.0;

    /// Canonical representative: azimuth in [-pi, pi), elevation in [0, pi].
    AngleTarget normalized() const {
        return {wrap_pi(azimuth), clamp_elevation(elevation)};
    }
};

/// Absolute azimuthal separation in [0, pi].
inline double angular_abs_diff(double a, double b) {
    return std::abs(wrap_pi(a - b));
}

} // namespace cdrlab
