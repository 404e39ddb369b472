#pragma once

#include "mht/centerline.hpp"
#include "mht/volume.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mht {

enum class Polarity { Below, Above };

std::string to_string(Polarity p);
Polarity parse_polarity(const std::string& s);

/// Voxel passes when value < threshold (Below) or value > threshold (Above).
bool passes(double value, double threshold, Polarity polarity);

struct RegionGrowResult {
    Index3 dims{0, 0, 0};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};
    std::vector<std::uint8_t> mask;  ///< x-fastest, same layout as Volume3D
    std::size_t voxel_count = 0;
    bool leaked = false;  ///< voxel_count above the configured ceiling

    bool at(int i, int j, int k) const;
    Volume3D to_volume() const;
};

/// 6-connected flood fill from `seed`. `leak_ceiling` is a voxel count used
/// only to set the leaked flag. Throws SeedPredicateFailed or OutOfBounds.
RegionGrowResult region_grow(const Volume3D& vol, const Index3& seed, double threshold, Polarity polarity,
                             std::optional<std::size_t> leak_ceiling = std::nullopt);

/// Centerline of a grown region: voxels are grouped into shells of equal
/// 6-connected path distance from `seed` (`shell_width` voxels thick), every
/// 26-connected component of a shell contributes its centroid, and centroids
/// are chained from shell to shell, splitting where a component has several
/// successors. Radii are the equivalent-circle radius of each component.
CenterlineSet mask_centerlines(const RegionGrowResult& region, const Index3& seed, int shell_width = 2);

}  // namespace mht
