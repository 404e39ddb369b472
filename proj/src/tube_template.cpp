#include "mht/tube_template.hpp"

#include "mht/errors.hpp"
#include "mht/volume.hpp"

#include <algorithm>
#include <cmath>

namespace mht {

namespace {

// q^e for the common case of a small integer exponent.
double power(double q, double e) {
    const double n = std::round(e);
    if (n == e && n >= 1.0 && n <= 16.0) {
        double out = 1.0;
        double base = q;
        for (unsigned k = static_cast<unsigned>(n); k != 0; k >>= 1) {
            if (k & 1U) out *= base;
            base *= base;
        }
        return out;
    }
    return std::pow(q, e);
}

}  // namespace

void validate_template(const TubeTemplate& t, double r_min, double r_max) {
    if (std::abs(t.direction.norm() - 1.0) > 1e-9) throw InvalidArgument("template direction must be unit length");
    if (!(t.radius >= r_min && t.radius <= r_max)) throw InvalidArgument("template radius outside [r_min, r_max]");
    if (!(t.gamma >= 2.0)) throw InvalidArgument("template gamma must be >= 2");
    if (!t.center.allFinite()) throw InvalidArgument("template center must be finite");
}

double axis_distance_sq(const TubeTemplate& t, const WorldPoint& p) {
    const Vec3 rel = p - t.center;
    const Vec3 perp = rel - rel.dot(t.direction) * t.direction;
    return perp.squaredNorm();
}

double profile_value(double dist_sq, double radius, double gamma) {
    // r^g / (d^g + r^g) rewritten as 1 / (1 + (d^2/r^2)^(g/2)).
    const double q = dist_sq / (radius * radius);
    return 1.0 / (1.0 + power(q, 0.5 * gamma));
}

double template_value(const TubeTemplate& t, const WorldPoint& p) {
    return profile_value(axis_distance_sq(t, p), t.radius, t.gamma);
}

void evaluate_template(const TubeTemplate& t, std::span<const WorldPoint> points, std::span<double> out) {
    const double inv_r2 = 1.0 / (t.radius * t.radius);
    const double half_gamma = 0.5 * t.gamma;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3 rel = points[i] - t.center;
        const double along = rel.dot(t.direction);
        const double d2 = std::max(0.0, rel.squaredNorm() - along * along);
        out[i] = 1.0 / (1.0 + power(d2 * inv_r2, half_gamma));
    }
}

double stencil_weight(double radial, double axial, double window_factor, double radius) {
    const double sr = window_factor * radius;
    const double sa = 0.5 * sr;
    return std::exp(-(radial * radial) / (2.0 * sr * sr) - (axial * axial) / (2.0 * sa * sa));
}

double stencil_step(double window_factor, double radius, const Vec3& spacing_hint) {
    return std::max(spacing_hint.minCoeff(), window_factor * radius / kStencilSamplesPerSigma);
}

SampleStencil build_stencil(const TubeTemplate& t, double window_factor, const Vec3& spacing_hint,
                            const Volume3D* bounds) {
    if (!(window_factor > 0.0)) throw InvalidArgument("weight window factor must be positive");
    if (!(t.radius > 0.0)) throw InvalidArgument("template radius must be positive");

    const double h = stencil_step(window_factor, t.radius, spacing_hint);
    const double radial_extent = 2.0 * window_factor * t.radius;
    const double axial_extent = window_factor * t.radius;
    const int nr = static_cast<int>(std::floor(radial_extent / h + 1e-9));
    const int na = static_cast<int>(std::floor(axial_extent / h + 1e-9));
    const double radial_sq_max = radial_extent * radial_extent * (1.0 + 1e-12);

    Vec3 u, w;
    orthonormal_frame(t.direction, u, w);

    SampleStencil s;
    for (int c = -na; c <= na; ++c) {
        const double axial = c * h;
        for (int b = -nr; b <= nr; ++b) {
            for (int a = -nr; a <= nr; ++a) {
                const double ra = a * h;
                const double rb = b * h;
                const double rho_sq = ra * ra + rb * rb;
                if (rho_sq > radial_sq_max) continue;
                const WorldPoint p = t.center + ra * u + rb * w + axial * t.direction;
                if (bounds != nullptr && !bounds->contains(p)) continue;
                s.points.push_back(p);
                s.weights.push_back(stencil_weight(std::sqrt(rho_sq), axial, window_factor, t.radius));
            }
        }
    }
    if (s.points.size() < kMinStencilPoints) throw DegenerateStencil("fewer than 16 in-bounds stencil points");
    return s;
}

}  // namespace mht
