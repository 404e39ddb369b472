#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>

namespace mht {

/// A point or vector in world coordinates (mm).
using Vec3 = Eigen::Vector3d;
using WorldPoint = Vec3;

using Index3 = std::array<int, 3>;

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Deterministic orthonormal pair (u, w) completing `dir` to a right-handed frame.
/// `dir` must be unit length.
inline void orthonormal_frame(const Vec3& dir, Vec3& u, Vec3& w) {
    // Pick the coordinate axis least aligned with dir; ties go to the lower axis.
    int axis = 0;
    double best = std::abs(dir.x());
    for (int i = 1; i < 3; ++i) {
        if (std::abs(dir[i]) < best) {
            best = std::abs(dir[i]);
            axis = i;
        }
    }
    Vec3 e = Vec3::Zero();
    e[axis] = 1.0;
    u = e.cross(dir).normalized();
    w = dir.cross(u);
}

/// Angle between two unit vectors in radians, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace mht
