#include "mht/tracker.hpp"

#include <cmath>

namespace mht {

std::optional<BifurcationSplit> detect_bifurcation(std::span<const LocalHypothesis> leaves, double kappa) {
    const int n = static_cast<int>(leaves.size());
    if (n < 2) return std::nullopt;
    auto center = [&](int i) -> const WorldPoint& { return leaves[static_cast<std::size_t>(i)].fit.tmpl.center; };

    int ia = 0, ib = 1;
    double far = -1.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d = (center(i) - center(j)).squaredNorm();
            if (d > far) {
                far = d;
                ia = i;
                ib = j;
            }
        }
    Vec3 ca = center(ia), cb = center(ib);
    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            const int a = (center(i) - ca).squaredNorm() <= (center(i) - cb).squaredNorm() ? 0 : 1;
            if (assign[static_cast<std::size_t>(i)] != a) {
                assign[static_cast<std::size_t>(i)] = a;
                changed = true;
            }
        }
        Vec3 sa = Vec3::Zero(), sb = Vec3::Zero();
        int na = 0, nb = 0;
        for (int i = 0; i < n; ++i) {
            if (assign[static_cast<std::size_t>(i)] == 0) {
                sa += center(i);
                ++na;
            } else {
                sb += center(i);
                ++nb;
            }
        }
        if (na == 0 || nb == 0) return std::nullopt;
        ca = sa / na;
        cb = sb / nb;
        if (!changed) break;
    }

    BifurcationSplit split;
    double ra = 0.0, rb = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& h = leaves[static_cast<std::size_t>(i)];
        if (assign[static_cast<std::size_t>(i)] == 0) {
            split.cluster_a.push_back(i);
            ra += h.fit.tmpl.radius;
            if (split.best_a < 0 || h.raw_score > leaves[static_cast<std::size_t>(split.best_a)].raw_score) split.best_a = i;
        } else {
            split.cluster_b.push_back(i);
            rb += h.fit.tmpl.radius;
            if (split.best_b < 0 || h.raw_score > leaves[static_cast<std::size_t>(split.best_b)].raw_score) split.best_b = i;
        }
    }
    ra /= static_cast<double>(split.cluster_a.size());
    rb /= static_cast<double>(split.cluster_b.size());
    if (!((ca - cb).norm() > kappa * (ra + rb))) return std::nullopt;
    return split;
}

}  // namespace mht
