#pragma once

// Small volume builders shared by the unit and acceptance tests.

#include "mht/phantom.hpp"
#include "mht/volume.hpp"

#include <vector>

namespace testsupport {

using mht::Vec3;

// Straight tube from a to b (hemispherical caps) in a cube of side n, 1 mm voxels.
inline mht::Volume3D tube_volume(int n, const Vec3& a, const Vec3& b, double r, double noise, std::uint64_t seed = 1,
                                 double contrast = 1.0, double background = 0.0, double gamma = 8.0) {
    mht::TubeSegment s;
    s.a = a;
    s.b = b;
    s.radius = r;
    s.free_start = s.free_end = true;
    mht::RasterParams p;
    p.contrast = contrast;
    p.background = background;
    p.noise_sigma = noise;
    p.gamma = gamma;
    p.rng_seed = seed;
    const std::vector<mht::TubeSegment> segs{s};
    return mht::rasterize_segments({n, n, n}, Vec3::Ones(), Vec3::Zero(), segs, p);
}

// Pure Gaussian noise volume.
inline mht::Volume3D noise_volume(int n, double sigma, std::uint64_t seed, double mean = 0.0) {
    std::vector<double> d(static_cast<std::size_t>(n) * n * n);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = mean + sigma * mht::hashed_gaussian(seed, i);
    return mht::Volume3D({n, n, n}, Vec3::Ones(), Vec3::Zero(), std::move(d));
}

// Copy of `v` with every value mapped to a * value + b.
inline mht::Volume3D affine_map(const mht::Volume3D& v, double a, double b) {
    std::vector<double> d(v.data().begin(), v.data().end());
    for (auto& x : d) x = a * x + b;
    return mht::Volume3D(v.dims(), v.spacing(), v.origin(), std::move(d));
}

}  // namespace testsupport
