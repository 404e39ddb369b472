#pragma once

#include "mht/geometry.hpp"

#include <span>
#include <vector>

namespace mht {

class Volume3D;

/// Idealized straight tube: intensity profile r^g / (d^g + r^g) around the
/// axis through `center` along `direction`.
struct TubeTemplate {
    WorldPoint center{0.0, 0.0, 0.0};
    Vec3 direction{0.0, 0.0, 1.0};  ///< unit length
    double radius = 1.0;            ///< mm
    double gamma = 8.0;             ///< profile steepness, >= 2
};

/// Throws InvalidArgument unless |direction| = 1 (1e-9), r in [r_min, r_max], gamma >= 2.
void validate_template(const TubeTemplate& t, double r_min, double r_max);

/// Squared distance (mm^2) from p to the template axis.
double axis_distance_sq(const TubeTemplate& t, const WorldPoint& p);

/// Profile as a function of squared axis distance; 1 on the axis, 0.5 at d = r.
double profile_value(double dist_sq, double radius, double gamma);

/// Template value in [0, 1] at p.
double template_value(const TubeTemplate& t, const WorldPoint& p);

/// Evaluates the template at every point; `out` must have the same length.
void evaluate_template(const TubeTemplate& t, std::span<const WorldPoint> points, std::span<double> out);

/// Sample points and localizing weights used by the template fit.
struct SampleStencil {
    std::vector<WorldPoint> points;
    std::vector<double> weights;

    std::size_t size() const { return points.size(); }
};

inline constexpr std::size_t kMinStencilPoints = 16;

/// Grid samples per Gaussian sigma; the grid never gets finer than the voxel spacing.
inline constexpr double kStencilSamplesPerSigma = 4.0;

/// Asymmetric Gaussian window weight for a point at radial distance `radial`
/// and axial offset `axial` from the template center: radial sigma f*r, axial
/// sigma f*r/2.
double stencil_weight(double radial, double axial, double window_factor, double radius);

/// Grid step used by build_stencil for a given window.
double stencil_step(double window_factor, double radius, const Vec3& spacing_hint);

/// Builds the deterministic sampling stencil around the template: a grid in the
/// template frame covering radial distance <= 2*f*r and axial offset <= f*r.
/// When `bounds` is given, points that cannot be sampled are dropped. Throws
/// DegenerateStencil when fewer than kMinStencilPoints remain.
SampleStencil build_stencil(const TubeTemplate& t, double window_factor, const Vec3& spacing_hint,
                            const Volume3D* bounds = nullptr);

}  // namespace mht
