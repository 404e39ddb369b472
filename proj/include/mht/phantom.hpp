#pragma once

#include "mht/centerline.hpp"
#include "mht/volume.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mht {

/// Generator parameters for a synthetic binary tube tree.
struct PhantomSpec {
    Index3 dims{96, 96, 120};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};
    /// Start of the trunk axis; defaults to the x/y center, 3 trunk radii above the lower z face.
    std::optional<WorldPoint> root;
    Vec3 root_direction{0.0, 0.0, 1.0};
    double trunk_radius = 4.0;
    double radius_decay = 0.7;
    int generations = 2;
    double branch_angle = 35.0;   ///< degrees between each child and its parent direction
    double segment_length = 40.0; ///< trunk length; children scale with their radius
    double contrast = 1.0;
    double background = 0.0;
    double noise_sigma = 0.1;
    double gamma = 8.0;
    std::uint64_t rng_seed = 1;

    void validate() const;
    WorldPoint root_point() const;
};

nlohmann::json to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);

/// Straight tube piece with hemispherical ends.
struct TubeSegment {
    WorldPoint a;
    WorldPoint b;
    double radius = 1.0;
    int branch_id = 0;
    int parent_id = -1;
    bool free_start = false;  ///< ends not attached to another segment
    bool free_end = false;
};

struct RasterParams {
    double contrast = 1.0;
    double background = 0.0;
    double noise_sigma = 0.0;
    double gamma = 8.0;
    std::uint64_t rng_seed = 1;
};

struct GroundTruth {
    CenterlineSet centerlines;
    std::vector<WorldPoint> bifurcation_points;
    double analytic_tube_volume = 0.0;  ///< mm^3
    std::vector<TubeSegment> segments;
};

/// Squared distance from p to the segment [a, b].
double segment_distance_sq(const WorldPoint& a, const WorldPoint& b, const WorldPoint& p);

/// Standard normal variate that depends only on (seed, index).
double hashed_gaussian(std::uint64_t seed, std::uint64_t index);

/// value = m + k * max_s profile(dist(p, s), r_s) + noise. Voxel noise is a
/// pure function of (seed, voxel index), so the result is bit-reproducible.
Volume3D rasterize_segments(const Index3& dims, const Vec3& spacing, const Vec3& origin,
                            std::span<const TubeSegment> segments, const RasterParams& params);

/// Branch layout of the binary tree described by `spec`. Throws DoesNotFit
/// when a segment comes closer than two radii to the volume boundary.
std::vector<TubeSegment> phantom_segments(const PhantomSpec& spec);

/// Volume of the union of the segment capsules: cylinders, a hemisphere at
/// every free end and at every junction, minus the stretch of each child
/// cylinder inside its parent's junction ball. Overlap between sibling
/// cylinders is not subtracted.
double analytic_tube_volume(std::span<const TubeSegment> segments);

/// Chains sampled along each segment at `spacing` mm, one per branch.
CenterlineSet segment_centerlines(std::span<const TubeSegment> segments, double spacing = 0.5);

struct Phantom {
    Volume3D volume;
    GroundTruth truth;
};

Phantom generate_phantom(const PhantomSpec& spec);

}  // namespace mht
