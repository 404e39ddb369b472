#include "mht/baseline.hpp"

#include "mht/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

namespace mht {

std::string to_string(Polarity p) { return p == Polarity::Below ? "below" : "above"; }

Polarity parse_polarity(const std::string& s) {
    if (s == "below") return Polarity::Below;
    if (s == "above") return Polarity::Above;
    throw InvalidArgument("polarity must be 'below' or 'above', got '" + s + "'");
}

bool passes(double value, double threshold, Polarity polarity) {
    return polarity == Polarity::Below ? value < threshold : value > threshold;
}

bool RegionGrowResult::at(int i, int j, int k) const {
    return mask[static_cast<std::size_t>(i) +
                static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k)] != 0;
}

Volume3D RegionGrowResult::to_volume() const {
    std::vector<double> data(mask.begin(), mask.end());
    return Volume3D(dims, spacing, origin, std::move(data));
}

namespace {

constexpr int kFace[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};

struct Grid {
    Index3 dims;
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    Index3 coords(std::size_t idx) const {
        const int i = static_cast<int>(idx % dims[0]);
        const std::size_t rest = idx / dims[0];
        return {i, static_cast<int>(rest % dims[1]), static_cast<int>(rest / dims[1])};
    }
    bool inside(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }
};

}  // namespace

RegionGrowResult region_grow(const Volume3D& vol, const Index3& seed, double threshold, Polarity polarity,
                             std::optional<std::size_t> leak_ceiling) {
    if (!vol.contains_index(seed[0], seed[1], seed[2])) throw OutOfBounds("region growing seed outside the volume");
    if (!passes(vol.at(seed[0], seed[1], seed[2]), threshold, polarity))
        throw SeedPredicateFailed("seed voxel value " + std::to_string(vol.at(seed[0], seed[1], seed[2])) + " is not " +
                                  to_string(polarity) + " threshold " + std::to_string(threshold));
    RegionGrowResult r;
    r.dims = vol.dims();
    r.spacing = vol.spacing();
    r.origin = vol.origin();
    r.mask.assign(vol.size(), 0);
    const Grid g{vol.dims()};
    const auto data = vol.data();

    std::deque<std::size_t> queue;
    const std::size_t s = g.index(seed[0], seed[1], seed[2]);
    r.mask[s] = 1;
    queue.push_back(s);
    while (!queue.empty()) {
        const std::size_t cur = queue.front();
        queue.pop_front();
        ++r.voxel_count;
        const Index3 c = g.coords(cur);
        for (const auto& d : kFace) {
            const int i = c[0] + d[0], j = c[1] + d[1], k = c[2] + d[2];
            if (!g.inside(i, j, k)) continue;
            const std::size_t n = g.index(i, j, k);
            if (r.mask[n] || !passes(data[n], threshold, polarity)) continue;
            r.mask[n] = 1;
            queue.push_back(n);
        }
    }
    r.leaked = leak_ceiling && r.voxel_count > *leak_ceiling;
    return r;
}

CenterlineSet mask_centerlines(const RegionGrowResult& region, const Index3& seed, int shell_width) {
    if (shell_width < 1) throw InvalidArgument("shell width must be >= 1");
    const Grid g{region.dims};
    if (!g.inside(seed[0], seed[1], seed[2]) || !region.at(seed[0], seed[1], seed[2]))
        throw InvalidArgument("centerline seed must lie inside the region");

    // Path distance from the seed inside the mask.
    constexpr int kUnset = std::numeric_limits<int>::max();
    std::vector<int> dist(region.mask.size(), kUnset);
    std::vector<std::size_t> order;
    std::deque<std::size_t> queue;
    const std::size_t s = g.index(seed[0], seed[1], seed[2]);
    dist[s] = 0;
    queue.push_back(s);
    while (!queue.empty()) {
        const std::size_t cur = queue.front();
        queue.pop_front();
        order.push_back(cur);
        const Index3 c = g.coords(cur);
        for (const auto& d : kFace) {
            const int i = c[0] + d[0], j = c[1] + d[1], k = c[2] + d[2];
            if (!g.inside(i, j, k)) continue;
            const std::size_t n = g.index(i, j, k);
            if (!region.mask[n] || dist[n] != kUnset) continue;
            dist[n] = dist[cur] + 1;
            queue.push_back(n);
        }
    }

    // Connected components of each shell, in BFS order so labels are deterministic.
    std::vector<int> label(region.mask.size(), -1);
    struct Component {
        int shell = 0;
        Vec3 sum = Vec3::Zero();
        std::size_t count = 0;
        int parent = -1;
        std::vector<int> children;
    };
    std::vector<Component> comps;
    for (std::size_t start : order) {
        if (label[start] >= 0) continue;
        const int shell = dist[start] / shell_width;
        const int id = static_cast<int>(comps.size());
        comps.push_back(Component{shell, Vec3::Zero(), 0, -1, {}});
        std::map<int, std::size_t> contacts;  // earlier-shell component -> touching voxels
        std::deque<std::size_t> q{start};
        label[start] = id;
        while (!q.empty()) {
            const std::size_t cur = q.front();
            q.pop_front();
            const Index3 c = g.coords(cur);
            comps[id].sum += Vec3(c[0], c[1], c[2]);
            ++comps[id].count;
            for (int dk = -1; dk <= 1; ++dk)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int di = -1; di <= 1; ++di) {
                        if (!di && !dj && !dk) continue;
                        const int i = c[0] + di, j = c[1] + dj, k = c[2] + dk;
                        if (!g.inside(i, j, k)) continue;
                        const std::size_t n = g.index(i, j, k);
                        if (dist[n] == kUnset) continue;
                        const int nshell = dist[n] / shell_width;
                        if (nshell == shell && label[n] < 0) {
                            label[n] = id;
                            q.push_back(n);
                        } else if (nshell == shell - 1 && label[n] >= 0) {
                            ++contacts[label[n]];
                        }
                    }
        }
        if (!contacts.empty()) {
            auto best = std::max_element(contacts.begin(), contacts.end(),
                                         [](const auto& a, const auto& b) { return a.second < b.second; });
            comps[id].parent = best->first;
            comps[best->first].children.push_back(id);
        }
    }

    const Vec3 spacing = region.spacing;
    const double voxel_volume = spacing.prod();
    const double shell_thickness = shell_width * spacing.minCoeff();
    auto centroid = [&](const Component& c) {
        const Vec3 v = c.sum / static_cast<double>(c.count);
        return WorldPoint(region.origin + (v.array() * spacing.array()).matrix());
    };
    auto radius = [&](const Component& c) {
        return std::sqrt(static_cast<double>(c.count) * voxel_volume / shell_thickness / kPi);
    };

    CenterlineSet set;
    int next_id = 0;
    // Chains start at roots and at every child of a component with several children.
    std::vector<std::pair<int, int>> starts;  // (component, predecessor or -1)
    for (std::size_t i = 0; i < comps.size(); ++i)
        if (comps[i].parent < 0) starts.emplace_back(static_cast<int>(i), -1);
    for (std::size_t si = 0; si < starts.size(); ++si) {
        auto [cur, pred] = starts[si];
        Centerline chain;
        chain.branch_id = next_id++;
        if (pred >= 0) {
            chain.points.push_back(centroid(comps[pred]));
            chain.radii.push_back(radius(comps[pred]));
        }
        while (true) {
            chain.points.push_back(centroid(comps[cur]));
            chain.radii.push_back(radius(comps[cur]));
            const auto& kids = comps[cur].children;
            if (kids.size() == 1) {
                cur = kids.front();
                continue;
            }
            for (int k : kids) starts.emplace_back(k, cur);
            break;
        }
        set.chains.push_back(std::move(chain));
    }
    return set;
}

}  // namespace mht
