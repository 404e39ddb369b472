#include "mht/volume.hpp"

#include "mht/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mht {

namespace {

constexpr double kEdgeSlack = 1e-9;

std::size_t checked_count(const Index3& dims) {
    for (int d : dims)
        if (d <= 0) throw InvalidArgument("volume dims must be positive");
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
}

// Splits a continuous coordinate into a base index and fraction such that
// base + 1 stays inside [0, n-1]. Returns false when c is outside the grid.
bool split_axis(double c, int n, int& base, double& frac) {
    if (!(c >= -kEdgeSlack && c <= (n - 1) + kEdgeSlack)) return false;
    if (n == 1) {
        base = 0;
        frac = 0.0;
        return true;
    }
    c = std::clamp(c, 0.0, static_cast<double>(n - 1));
    base = std::min(static_cast<int>(std::floor(c)), n - 2);
    frac = c - base;
    return true;
}

}  // namespace

Volume3D::Volume3D(Index3 dims, Vec3 spacing, Vec3 origin, std::vector<double> data)
    : dims_(dims), spacing_(spacing), origin_(origin), data_(std::move(data)) {
    if (data_.size() != checked_count(dims_)) {
        std::ostringstream msg;
        msg << "volume data length " << data_.size() << " does not match dims product "
            << checked_count(dims_);
        throw InvalidArgument(msg.str());
    }
    for (int a = 0; a < 3; ++a) {
        if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a]))
            throw InvalidArgument("volume spacing must be positive and finite");
        if (!std::isfinite(origin_[a])) throw InvalidArgument("volume origin must be finite");
    }
    if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); }))
        throw InvalidArgument("volume contains non-finite values");
}

Volume3D::Volume3D(Index3 dims, Vec3 spacing, Vec3 origin, double fill)
    : Volume3D(dims, spacing, origin, std::vector<double>(checked_count(dims), fill)) {}

Index3 Volume3D::nearest_voxel(const WorldPoint& p) const {
    const Vec3 c = world_to_voxel(p);
    return {static_cast<int>(std::lround(c.x())), static_cast<int>(std::lround(c.y())),
            static_cast<int>(std::lround(c.z()))};
}

Vec3 Volume3D::world_max() const {
    return voxel_to_world(Vec3(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1));
}

bool Volume3D::contains(const WorldPoint& p) const {
    const Vec3 c = world_to_voxel(p);
    for (int a = 0; a < 3; ++a)
        if (!(c[a] >= -kEdgeSlack && c[a] <= (dims_[a] - 1) + kEdgeSlack)) return false;
    return true;
}

bool Volume3D::try_sample(const WorldPoint& p, double& value) const {
    const Vec3 c = world_to_voxel(p);
    int b[3];
    double f[3];
    for (int a = 0; a < 3; ++a)
        if (!split_axis(c[a], dims_[a], b[a], f[a])) return false;

    const int dx = dims_[0] > 1 ? 1 : 0;
    const std::size_t sy = dims_[1] > 1 ? static_cast<std::size_t>(dims_[0]) : 0;
    const std::size_t sz =
        dims_[2] > 1 ? static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) : 0;
    const double* v = data_.data() + linear_index(b[0], b[1], b[2]);

    const double c00 = v[0] + f[0] * (v[dx] - v[0]);
    const double c10 = v[sy] + f[0] * (v[sy + dx] - v[sy]);
    const double c01 = v[sz] + f[0] * (v[sz + dx] - v[sz]);
    const double c11 = v[sz + sy] + f[0] * (v[sz + sy + dx] - v[sz + sy]);
    const double c0 = c00 + f[1] * (c10 - c00);
    const double c1 = c01 + f[1] * (c11 - c01);
    value = c0 + f[2] * (c1 - c0);
    return true;
}

double Volume3D::sample(const WorldPoint& p) const {
    double value = 0.0;
    if (!try_sample(p, value)) {
        std::ostringstream msg;
        msg << "sample point (" << p.x() << ", " << p.y() << ", " << p.z() << ") outside volume";
        throw OutOfBounds(msg.str());
    }
    return value;
}

}  // namespace mht
