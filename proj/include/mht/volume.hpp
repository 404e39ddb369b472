#pragma once

#include "mht/geometry.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace mht {

/// Dense 3-D scalar grid with anisotropic spacing. Voxel (i, j, k) is stored at
/// i + dims[0] * (j + dims[1] * k), i.e. x varies fastest (MetaImage order).
/// Immutable once constructed.
class Volume3D {
public:
    Volume3D() = default;
    /// Throws InvalidArgument when the invariants (positive dims and spacing,
    /// matching length, finite values) do not hold.
    Volume3D(Index3 dims, Vec3 spacing, Vec3 origin, std::vector<double> data);
    /// Convenience: constant-valued volume.
    Volume3D(Index3 dims, Vec3 spacing, Vec3 origin, double fill);

    const Index3& dims() const { return dims_; }
    const Vec3& spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }
    std::span<const double> data() const { return data_; }
    std::size_t size() const { return data_.size(); }
    double voxel_volume() const { return spacing_.prod(); }

    std::size_t linear_index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims_[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
    }
    double at(int i, int j, int k) const { return data_[linear_index(i, j, k)]; }
    bool contains_index(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims_[0] && j < dims_[1] && k < dims_[2];
    }

    Vec3 world_to_voxel(const WorldPoint& p) const {
        return ((p - origin_).array() / spacing_.array()).matrix();
    }
    WorldPoint voxel_to_world(const Vec3& c) const {
        return origin_ + (c.array() * spacing_.array()).matrix();
    }
    WorldPoint voxel_center(int i, int j, int k) const { return voxel_to_world(Vec3(i, j, k)); }
    /// Nearest voxel index of a world point (may lie outside the grid).
    Index3 nearest_voxel(const WorldPoint& p) const;

    /// True if p maps into [0, dims-1] on every axis, i.e. it can be sampled.
    bool contains(const WorldPoint& p) const;

    /// Trilinear interpolation of the 8 enclosing voxels. Throws OutOfBounds
    /// when p lies outside the sampleable region.
    double sample(const WorldPoint& p) const;

    /// Same as sample() but reports out-of-bounds through the return value.
    bool try_sample(const WorldPoint& p, double& value) const;

    /// World-space extent of the sampleable region (voxel centers 0 and dims-1).
    Vec3 world_min() const { return origin_; }
    Vec3 world_max() const;

private:
    Index3 dims_{0, 0, 0};
    Vec3 spacing_{1.0, 1.0, 1.0};
    Vec3 origin_{0.0, 0.0, 0.0};
    std::vector<double> data_;
};

/// Free-function forms of the volume operations.
inline Vec3 world_to_voxel(const Volume3D& vol, const WorldPoint& p) { return vol.world_to_voxel(p); }
inline double sample_trilinear(const Volume3D& vol, const WorldPoint& p) { return vol.sample(p); }

/// On-disk element types for MetaImage payloads.
enum class ElementType { Short, Float, Double, UChar };

/// Reads a MetaImage (.mhd header + raw payload, or a single .mha file).
/// Throws ParseError, IoError or UnsupportedElementType.
Volume3D load_volume(const std::filesystem::path& path);

/// Writes `<stem>.mhd` + `<stem>.raw`. Values are converted to the requested
/// element type; Double preserves data bit-exactly.
void save_volume(const Volume3D& vol, const std::filesystem::path& path,
                 ElementType type = ElementType::Double);

}  // namespace mht
