#include "mht/phantom.hpp"

#include "mht/errors.hpp"
#include "mht/tube_template.hpp"

#include <algorithm>
#include <cmath>

namespace mht {

void PhantomSpec::validate() const {
    for (int d : dims)
        if (d <= 0) throw InvalidArgument("phantom dims must be positive");
    for (int a = 0; a < 3; ++a)
        if (!(spacing[a] > 0.0)) throw InvalidArgument("phantom spacing must be positive");
    if (!(trunk_radius > 0.0)) throw InvalidArgument("trunk radius must be positive");
    if (!(radius_decay > 0.0 && radius_decay <= 1.0)) throw InvalidArgument("radius decay must lie in (0, 1]");
    if (generations < 0) throw InvalidArgument("generations must be >= 0");
    if (!(branch_angle > 0.0 && branch_angle < 90.0)) throw InvalidArgument("branch angle must lie in (0, 90)");
    if (!(segment_length > 0.0)) throw InvalidArgument("segment length must be positive");
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
    if (!(gamma >= 2.0)) throw InvalidArgument("gamma must be >= 2");
    if (!(root_direction.norm() > 0.0)) throw InvalidArgument("root direction must be nonzero");
}

WorldPoint PhantomSpec::root_point() const {
    if (root) return *root;
    WorldPoint p = origin;
    p.x() += 0.5 * (dims[0] - 1) * spacing.x();
    p.y() += 0.5 * (dims[1] - 1) * spacing.y();
    p.z() += 3.0 * trunk_radius;
    return p;
}

nlohmann::json to_json(const PhantomSpec& s) {
    nlohmann::json j;
    j["dims"] = s.dims;
    j["spacing"] = {s.spacing.x(), s.spacing.y(), s.spacing.z()};
    j["origin"] = {s.origin.x(), s.origin.y(), s.origin.z()};
    const WorldPoint r = s.root_point();
    j["root"] = {r.x(), r.y(), r.z()};
    j["root_direction"] = {s.root_direction.x(), s.root_direction.y(), s.root_direction.z()};
    j["trunk_radius"] = s.trunk_radius;
    j["radius_decay"] = s.radius_decay;
    j["generations"] = s.generations;
    j["branch_angle"] = s.branch_angle;
    j["segment_length"] = s.segment_length;
    j["contrast"] = s.contrast;
    j["background"] = s.background;
    j["noise_sigma"] = s.noise_sigma;
    j["gamma"] = s.gamma;
    j["rng_seed"] = s.rng_seed;
    return j;
}

PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
    PhantomSpec s;
    auto vec3 = [&](const char* key, Vec3& out) {
        if (!j.contains(key)) return;
        const auto& a = j.at(key);
        if (!a.is_array() || a.size() != 3) throw ParseError(std::string("phantom spec: '") + key + "' needs 3 numbers");
        out = Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
    };
    try {
        if (j.contains("dims")) {
            const auto& a = j.at("dims");
            if (!a.is_array() || a.size() != 3) throw ParseError("phantom spec: 'dims' needs 3 integers");
            s.dims = {a[0].get<int>(), a[1].get<int>(), a[2].get<int>()};
        }
        vec3("spacing", s.spacing);
        vec3("origin", s.origin);
        if (j.contains("root")) {
            Vec3 r;
            vec3("root", r);
            s.root = r;
        }
        vec3("root_direction", s.root_direction);
        s.trunk_radius = j.value("trunk_radius", s.trunk_radius);
        s.radius_decay = j.value("radius_decay", s.radius_decay);
        s.generations = j.value("generations", s.generations);
        s.branch_angle = j.value("branch_angle", s.branch_angle);
        s.segment_length = j.value("segment_length", s.segment_length);
        s.contrast = j.value("contrast", s.contrast);
        s.background = j.value("background", s.background);
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.gamma = j.value("gamma", s.gamma);
        s.rng_seed = j.value("rng_seed", s.rng_seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("phantom spec: ") + e.what());
    }
    s.validate();
    return s;
}

double segment_distance_sq(const WorldPoint& a, const WorldPoint& b, const WorldPoint& p) {
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + t * ab)).squaredNorm();
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double to_unit_open(std::uint64_t bits) {
    // 53 random bits mapped into (0, 1)
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double hashed_gaussian(std::uint64_t seed, std::uint64_t index) {
    const std::uint64_t h = splitmix64(splitmix64(seed) ^ index);
    const double u1 = to_unit_open(h);
    const double u2 = to_unit_open(splitmix64(h));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

Volume3D rasterize_segments(const Index3& dims, const Vec3& spacing, const Vec3& origin,
                            std::span<const TubeSegment> segments, const RasterParams& params) {
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    std::vector<double> data(n);
    // Beyond this distance every profile is below 1e-12 of the contrast.
    std::vector<double> reach2;
    for (const auto& s : segments) {
        const double reach = s.radius * std::pow(1e12, 1.0 / params.gamma);
        reach2.push_back(reach * reach);
    }
    std::size_t idx = 0;
    for (int k = 0; k < dims[2]; ++k) {
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i, ++idx) {
                const WorldPoint p = origin + Vec3(i * spacing.x(), j * spacing.y(), k * spacing.z());
                double best = 0.0;
                for (std::size_t s = 0; s < segments.size(); ++s) {
                    const double d2 = segment_distance_sq(segments[s].a, segments[s].b, p);
                    if (d2 > reach2[s]) continue;
                    best = std::max(best, profile_value(d2, segments[s].radius, params.gamma));
                }
                double v = params.background + params.contrast * best;
                if (params.noise_sigma > 0.0) v += params.noise_sigma * hashed_gaussian(params.rng_seed, idx);
                data[idx] = v;
            }
        }
    }
    return Volume3D(dims, spacing, origin, std::move(data));
}

std::vector<TubeSegment> phantom_segments(const PhantomSpec& spec) {
    spec.validate();
    std::vector<TubeSegment> segs;
    struct Pending {
        WorldPoint start;
        Vec3 dir;
        double radius;
        double length;
        int parent;
        int generation;
        double roll;  ///< azimuth of the split plane
    };
    std::vector<Pending> queue;
    queue.push_back({spec.root_point(), spec.root_direction.normalized(), spec.trunk_radius, spec.segment_length, -1, 0, 0.0});
    const double angle = deg_to_rad(spec.branch_angle);
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const Pending cur = queue[qi];
        TubeSegment s;
        s.a = cur.start;
        s.b = cur.start + cur.length * cur.dir;
        s.radius = cur.radius;
        s.branch_id = static_cast<int>(qi);
        s.parent_id = cur.parent;
        s.free_start = cur.parent < 0;
        s.free_end = cur.generation == spec.generations;
        segs.push_back(s);
        if (cur.generation == spec.generations) continue;
        Vec3 u, w;
        orthonormal_frame(cur.dir, u, w);
        const Vec3 side = std::cos(cur.roll) * u + std::sin(cur.roll) * w;
        const double r_child = cur.radius * spec.radius_decay;
        const double l_child = cur.length * spec.radius_decay;
        for (double sign : {1.0, -1.0}) {
            const Vec3 d = (std::cos(angle) * cur.dir + sign * std::sin(angle) * side).normalized();
            queue.push_back({s.b, d, r_child, l_child, s.branch_id, cur.generation + 1, cur.roll + kPi / 2.0});
        }
    }

    const Vec3 lo = spec.origin;
    const Vec3 hi = spec.origin + Vec3((spec.dims[0] - 1) * spec.spacing.x(), (spec.dims[1] - 1) * spec.spacing.y(),
                                       (spec.dims[2] - 1) * spec.spacing.z());
    for (const auto& s : segs) {
        for (const WorldPoint& p : {s.a, s.b}) {
            for (int a = 0; a < 3; ++a) {
                if (p[a] - 2.0 * s.radius < lo[a] || p[a] + 2.0 * s.radius > hi[a])
                    throw DoesNotFit("branch " + std::to_string(s.branch_id) +
                                     " comes within two radii of the volume boundary");
            }
        }
    }
    return segs;
}

double analytic_tube_volume(std::span<const TubeSegment> segments) {
    double v = 0.0;
    for (const auto& s : segments) {
        const double r = s.radius;
        const double hemisphere = 2.0 / 3.0 * kPi * r * r * r;
        v += kPi * r * r * (s.b - s.a).norm();
        // Free ends are capped, and a junction keeps the parent's full end cap.
        if (s.free_start) v += hemisphere;
        v += hemisphere;
        if (s.parent_id >= 0 && static_cast<std::size_t>(s.parent_id) < segments.size()) {
            // The child's first stretch and start cap lie inside the parent's
            // junction ball; remove the part of its cylinder counted twice.
            const double big = segments[static_cast<std::size_t>(s.parent_id)].radius;
            if (r <= big) v -= 2.0 / 3.0 * kPi * (big * big * big - std::pow(big * big - r * r, 1.5));
        }
    }
    return v;
}

CenterlineSet segment_centerlines(std::span<const TubeSegment> segments, double spacing) {
    if (!(spacing > 0.0)) throw InvalidArgument("centerline spacing must be positive");
    CenterlineSet set;
    for (const auto& s : segments) {
        Centerline c;
        c.branch_id = s.branch_id;
        const double len = (s.b - s.a).norm();
        const int n = std::max(1, static_cast<int>(std::ceil(len / spacing - 1e-9)));
        for (int i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) / n;
            c.points.push_back(s.a + t * (s.b - s.a));
            c.radii.push_back(s.radius);
        }
        set.chains.push_back(std::move(c));
    }
    return set;
}

Phantom generate_phantom(const PhantomSpec& spec) {
    Phantom out;
    out.truth.segments = phantom_segments(spec);
    RasterParams rp;
    rp.contrast = spec.contrast;
    rp.background = spec.background;
    rp.noise_sigma = spec.noise_sigma;
    rp.gamma = spec.gamma;
    rp.rng_seed = spec.rng_seed;
    out.volume = rasterize_segments(spec.dims, spec.spacing, spec.origin, out.truth.segments, rp);
    out.truth.centerlines = segment_centerlines(out.truth.segments, 0.5);
    for (const auto& s : out.truth.segments)
        if (!s.free_end) out.truth.bifurcation_points.push_back(s.b);
    out.truth.analytic_tube_volume = analytic_tube_volume(out.truth.segments);
    return out;
}

}  // namespace mht
