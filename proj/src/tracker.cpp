#include "mht/tracker.hpp"

#include "mht/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_map>

namespace mht {

std::string to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::BelowGlobalThreshold: return "BelowGlobalThreshold";
        case TerminationReason::OutOfBounds: return "OutOfBounds";
        case TerminationReason::RadiusOutOfRange: return "RadiusOutOfRange";
        case TerminationReason::MaxSteps: return "MaxSteps";
        case TerminationReason::RevisitedTerritory: return "RevisitedTerritory";
        case TerminationReason::FitFailure: return "FitFailure";
        case TerminationReason::Bifurcation: return "Bifurcation";
    }
    return "Unknown";
}

std::vector<Vec3> candidate_directions(const Vec3& current, double max_angle_deg, int n_rings) {
    if (!(current.norm() > 0.0)) throw InvalidArgument("candidate direction needs a nonzero current direction");
    if (n_rings < 1) throw InvalidArgument("need at least one ring of directions");
    const Vec3 v = current.normalized();
    Vec3 u, w;
    orthonormal_frame(v, u, w);
    std::vector<Vec3> out{v};
    const double ring_step = deg_to_rad(max_angle_deg) / n_rings;
    for (int j = 1; j <= n_rings; ++j) {
        const double theta = j * ring_step;
        const int count = std::max(1, static_cast<int>(std::ceil(2.0 * kPi * std::sin(theta) / ring_step - 1e-9)));
        for (int k = 0; k < count; ++k) {
            const double phi = 2.0 * kPi * k / count;
            const Vec3 d = std::cos(theta) * v + std::sin(theta) * (std::cos(phi) * u + std::sin(phi) * w);
            out.push_back(d.normalized());
        }
    }
    return out;
}

DeadEnd StepOutcome::dead_end_kind() const {
    if (ahead_out_of_bounds) return DeadEnd::Boundary;
    return 2 * out_of_bounds >= attempted && out_of_bounds > 0 ? DeadEnd::Boundary : DeadEnd::Failure;
}

TerminationReason StepOutcome::dominant_reason() const {
    if (dead_end_kind() == DeadEnd::Boundary) return TerminationReason::OutOfBounds;
    if (radius_at_bound > failed + weak) return TerminationReason::RadiusOutOfRange;
    return TerminationReason::FitFailure;
}

namespace {

// Allowed change of direction beyond the search cone, since the fit may rotate.
constexpr double kTurnSlackDeg = 10.0;
constexpr double kContrastMemory = 0.25;
// Ancestor territory is open to a child only this many junction radii around the junction.
constexpr double kAncestorExemption = 3.0;

// Distance from p to the nearest face of the sampleable box.
double boundary_distance(const Volume3D& vol, const WorldPoint& p) {
    const Vec3 lo = vol.world_min(), hi = vol.world_max();
    double d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) d = std::min({d, p[a] - lo[a], hi[a] - p[a]});
    return d;
}

}  // namespace

StepOutcome step_branch(const Volume3D& vol, const LocalHypothesis& tip, const TrackerConfig& cfg, int step_index,
                        int origin_branch) {
    StepOutcome out;
    const TubeTemplate& t = tip.fit.tmpl;
    const FitConfig fcfg = cfg.fit_config();
    const double ref_contrast = tip.reference_contrast > 0.0 ? tip.reference_contrast : tip.fit.contrast;
    const double step = cfg.step_length_factor * t.radius;
    const auto dirs = candidate_directions(t.direction, cfg.max_search_angle, cfg.n_angle_rings);

    struct Candidate {
        LocalHypothesis h;
        std::size_t order;
    };
    std::vector<Candidate> kept;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        ++out.attempted;
        auto boundary_hit = [&] {
            ++out.out_of_bounds;
            if (i == 0) out.ahead_out_of_bounds = true;
        };
        TubeTemplate init;
        init.center = t.center + step * dirs[i];
        init.direction = dirs[i];
        init.radius = std::clamp(t.radius, cfg.r_min, cfg.r_max);
        init.gamma = cfg.gamma;
        if (!vol.contains(init.center)) {
            boundary_hit();
            continue;
        }
        FitResult fit;
        try {
            fit = fit_template(vol, init, fcfg);
        } catch (const FitFailed&) {
            // A stencil cut off by the boundary is a boundary event, not a bad fit.
            if (boundary_distance(vol, init.center) < 2.0 * cfg.weight_window_factor * init.radius)
                boundary_hit();
            else
                ++out.failed;
            continue;
        }
        if (!vol.contains(fit.tmpl.center)) {
            boundary_hit();
            continue;
        }
        if (fit.radius_at_bound) {
            ++out.radius_at_bound;
            continue;
        }
        if (std::isnan(fit.t_stat)) {
            ++out.failed;
            continue;
        }
        if (!(fit.contrast > 0.0) || fit.contrast < cfg.min_contrast_ratio * ref_contrast) {
            ++out.weak;
            continue;
        }
        if (fit.tmpl.direction.dot(dirs[i]) < 0.0) fit.tmpl.direction = -fit.tmpl.direction;
        if (rad_to_deg(angle_between(fit.tmpl.direction, t.direction)) > cfg.max_search_angle + kTurnSlackDeg) {
            ++out.failed;
            continue;
        }
        kept.push_back({make_hypothesis(fit, step_index, origin_branch), i});
        // Slow average, so a fading tube end cannot lower the bar step by step.
        kept.back().h.reference_contrast = (1.0 - kContrastMemory) * ref_contrast + kContrastMemory * fit.contrast;
    }

    std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
        if (a.h.raw_score != b.h.raw_score) return a.h.raw_score > b.h.raw_score;
        if (a.h.fit.tmpl.radius != b.h.fit.tmpl.radius) return a.h.fit.tmpl.radius < b.h.fit.tmpl.radius;
        return a.order < b.order;
    });
    // The fit cannot resolve axial position, so fits on a common axis are one hypothesis.
    const double merge = cfg.duplicate_distance * t.radius;
    const double merge_angle = deg_to_rad(cfg.duplicate_angle);
    for (auto& c : kept) {
        const bool dup = std::any_of(out.hypotheses.begin(), out.hypotheses.end(), [&](const LocalHypothesis& h) {
            return axis_distance_sq(h.fit.tmpl, c.h.fit.tmpl.center) < merge * merge &&
                   angle_between(h.fit.tmpl.direction, c.h.fit.tmpl.direction) < merge_angle;
        });
        if (dup) {
            ++out.duplicates;
            continue;
        }
        if (static_cast<int>(out.hypotheses.size()) >= cfg.max_candidates_per_step) break;
        out.hypotheses.push_back(std::move(c.h));
    }
    return out;
}

namespace {

// Voxel ownership by committed branches. Several branches may own a voxel.
class VisitedMask {
public:
    explicit VisitedMask(const Volume3D& vol) : vol_(&vol) {}

    void mark(const WorldPoint& c, double radius, int branch) {
        const Vec3 lo = vol_->world_to_voxel(c - Vec3::Constant(radius));
        const Vec3 hi = vol_->world_to_voxel(c + Vec3::Constant(radius));
        const auto& d = vol_->dims();
        const double r2 = radius * radius;
        for (int k = std::max(0, static_cast<int>(std::ceil(lo.z()))); k <= std::min(d[2] - 1, static_cast<int>(std::floor(hi.z()))); ++k)
            for (int j = std::max(0, static_cast<int>(std::ceil(lo.y()))); j <= std::min(d[1] - 1, static_cast<int>(std::floor(hi.y()))); ++j)
                for (int i = std::max(0, static_cast<int>(std::ceil(lo.x()))); i <= std::min(d[0] - 1, static_cast<int>(std::floor(hi.x()))); ++i) {
                    if ((vol_->voxel_center(i, j, k) - c).squaredNorm() > r2) continue;
                    auto& owners = owners_[vol_->linear_index(i, j, k)];
                    if (std::find(owners.begin(), owners.end(), branch) == owners.end()) owners.push_back(branch);
                }
    }

    /// True if the voxel at p is owned by a branch outside `allowed`.
    bool foreign(const WorldPoint& p, const std::vector<int>& allowed) const {
        const Index3 v = vol_->nearest_voxel(p);
        if (!vol_->contains_index(v[0], v[1], v[2])) return false;
        const auto it = owners_.find(vol_->linear_index(v[0], v[1], v[2]));
        if (it == owners_.end()) return false;
        for (int o : it->second)
            if (std::find(allowed.begin(), allowed.end(), o) == allowed.end()) return true;
        return false;
    }

private:
    const Volume3D* vol_;
    std::unordered_map<std::size_t, std::vector<int>> owners_;
};

BranchPoint to_point(const LocalHypothesis& h) {
    return {h.fit.tmpl.center, h.fit.tmpl.direction, h.fit.tmpl.radius, h.raw_score, h.rank_score, h.uid};
}

struct Task {
    std::optional<int> parent;
    int generation = 0;
    std::vector<int> ancestry;  ///< ids of all ancestors
    std::optional<HypothesisTree> tree;
    std::vector<BranchPoint> prefix;
};

struct TaskResult {
    Branch branch;
    std::vector<Task> children;
};

class BranchRunner {
public:
    BranchRunner(const Volume3D& vol, const TrackerConfig& cfg, const TrackOptions& opts, const VisitedMask& visited)
        : vol_(vol), cfg_(cfg), opts_(opts), visited_(visited) {}

    TaskResult run(int id, Task task, bool may_split) const {
        TaskResult res;
        Branch& b = res.branch;
        b.id = id;
        b.parent_id = task.parent;
        b.generation = task.generation;
        b.points = task.prefix;
        b.inherited_points = task.parent ? 1 : 0;
        HypothesisTree tree = std::move(*task.tree);
        if (opts_.dump_trees) b.tree_at_start = tree.to_json();

        std::vector<int> near_junction = task.ancestry;
        near_junction.push_back(id);
        const std::vector<int> elsewhere{id};
        const bool has_junction = task.parent.has_value() && !task.prefix.empty();
        const BranchPoint junction = has_junction ? task.prefix.front() : BranchPoint{};
        auto allowed_at = [&](const WorldPoint& p) -> const std::vector<int>& {
            if (has_junction && (p - junction.center).norm() <= kAncestorExemption * junction.radius)
                return near_junction;
            return elsewhere;
        };
        std::unordered_map<std::uint64_t, TerminationReason> dead_reasons;

        int steps = 0;
        while (true) {
            grow(tree, id, dead_reasons);
            const Decision dec = tree.decide_and_commit();
            if (dec.kind == DecisionKind::BelowThreshold) {
                b.termination_reason = TerminationReason::BelowGlobalThreshold;
                break;
            }
            if (dec.kind == DecisionKind::Exhausted) {
                const auto it = dead_reasons.find(tree.node(tree.root()).hyp.uid);
                b.termination_reason = it != dead_reasons.end() ? it->second : TerminationReason::FitFailure;
                break;
            }
            const LocalHypothesis& c = dec.committed;
            if (!vol_.contains(c.fit.tmpl.center)) {
                b.termination_reason = TerminationReason::OutOfBounds;
                break;
            }
            if (c.fit.tmpl.radius < cfg_.r_min || c.fit.tmpl.radius > cfg_.r_max) {
                b.termination_reason = TerminationReason::RadiusOutOfRange;
                break;
            }
            // Hypotheses created by an ancestor before a split lie in inherited territory.
            if (c.origin_branch == id && visited_.foreign(c.fit.tmpl.center, allowed_at(c.fit.tmpl.center))) {
                b.termination_reason = TerminationReason::RevisitedTerritory;
                break;
            }
            b.points.push_back(to_point(c));
            if (++steps >= cfg_.max_steps_per_branch) {
                b.termination_reason = TerminationReason::MaxSteps;
                break;
            }
            if (may_split && try_split(tree, id, task, b, res.children)) {
                b.termination_reason = TerminationReason::Bifurcation;
                break;
            }
        }
        if (opts_.dump_trees) b.tree_at_end = tree.to_json();
        return res;
    }

private:
    void grow(HypothesisTree& tree, int id, std::unordered_map<std::uint64_t, TerminationReason>& dead_reasons) const {
        while (true) {
            const auto expandable = tree.expandable_leaves();
            if (expandable.empty()) return;
            int depth = std::numeric_limits<int>::max();
            for (int leaf : expandable) depth = std::min(depth, tree.node(leaf).depth);
            for (int leaf : expandable) {
                if (tree.node(leaf).depth != depth) continue;
                const LocalHypothesis tip = tree.node(leaf).hyp;
                StepOutcome out = step_branch(vol_, tip, cfg_, tip.step_index + 1, id);
                const auto ids = tree.expand_leaf(leaf, std::move(out.hypotheses), out.dead_end_kind());
                if (ids.empty()) dead_reasons[tip.uid] = out.dominant_reason();
            }
            if (cfg_.scoring_mode == ScoringMode::RankBased && cfg_.rank_scope == RankScope::Step)
                tree.rank_depth(depth + 1);
            tree.prune();
        }
    }

    bool try_split(HypothesisTree& tree, int id, const Task& task, Branch& b, std::vector<Task>& children) const {
        const auto live = tree.live_leaves();
        if (live.size() < 2) return false;
        std::vector<LocalHypothesis> hyps;
        for (int leaf : live) hyps.push_back(tree.node(leaf).hyp);
        const auto split = detect_bifurcation(hyps, cfg_.bifurcation_separation_factor);
        if (!split) return false;

        auto uids = [&](const std::vector<int>& idx) {
            std::vector<std::uint64_t> out;
            for (int i : idx) out.push_back(hyps[static_cast<std::size_t>(i)].uid);
            return out;
        };
        const std::vector<std::uint64_t> cluster_uids[2] = {uids(split->cluster_a), uids(split->cluster_b)};
        const LocalHypothesis best[2] = {hyps[static_cast<std::size_t>(split->best_a)],
                                         hyps[static_cast<std::size_t>(split->best_b)]};

        // The parent keeps the stretch both best continuations share.
        const auto pa = tree.path_to(live[static_cast<std::size_t>(split->best_a)]);
        const auto pb = tree.path_to(live[static_cast<std::size_t>(split->best_b)]);
        std::size_t common = 0;
        while (common < pa.size() && common < pb.size() && pa[common] == pb[common]) ++common;
        if (common > 0) {
            for (const auto& h : tree.advance_to(pa[common - 1])) b.points.push_back(to_point(h));
        }
        const BranchPoint junction = b.points.back();

        std::vector<int> ancestry = task.ancestry;
        ancestry.push_back(id);
        for (int side = 0; side < 2; ++side) {
            Task child;
            child.parent = id;
            child.generation = task.generation + 1;
            child.ancestry = ancestry;
            child.prefix.push_back(junction);
            if (cfg_.scoring_mode == ScoringMode::RankBased) {
                // Inherit the hypothesis tree restricted to this cluster.
                std::vector<int> keep;
                for (auto u : cluster_uids[side]) {
                    const int nid = tree.find_uid(u);
                    if (nid >= 0) keep.push_back(nid);
                }
                child.tree = tree.restricted_to(keep);
            } else {
                // Restart from the detected point with a fresh tree.
                const int nid = tree.find_uid(best[side].uid);
                for (int p : tree.path_to(nid)) child.prefix.push_back(to_point(tree.node(p).hyp));
                LocalHypothesis root = best[side];
                root.rank_score = 1.0;
                child.tree.emplace(root, cfg_.tree_config());
            }
            children.push_back(std::move(child));
        }
        return true;
    }

    const Volume3D& vol_;
    const TrackerConfig& cfg_;
    const TrackOptions& opts_;
    const VisitedMask& visited_;
};

std::optional<LocalHypothesis> seed_hypothesis(const Volume3D& vol, const WorldPoint& seed, std::optional<Vec3> seed_dir,
                                               const TrackerConfig& cfg) {
    std::vector<Vec3> probes;
    if (seed_dir) {
        if (!(seed_dir->norm() > 0.0)) throw InvalidArgument("seed direction must be nonzero");
        probes.push_back(seed_dir->normalized());
    } else {
        for (int a = 0; a < 3; ++a)
            for (double s : {1.0, -1.0}) {
                Vec3 d = Vec3::Zero();
                d[a] = s;
                probes.push_back(d);
            }
    }
    std::optional<LocalHypothesis> best;
    for (const Vec3& d : probes) {
        TubeTemplate init{seed, d, cfg.initial_radius, cfg.gamma};
        FitResult fit;
        try {
            fit = fit_template(vol, init, cfg.fit_config());
        } catch (const FitFailed&) {
            continue;
        }
        if (!vol.contains(fit.tmpl.center) || fit.radius_at_bound || !(fit.contrast > 0.0) || std::isnan(fit.t_stat))
            continue;
        if (fit.tmpl.direction.dot(d) < 0.0) fit.tmpl.direction = -fit.tmpl.direction;
        if (!best || fit.t_stat > best->raw_score) best = make_hypothesis(fit, 0, 0);
    }
    if (best) best->rank_score = 1.0;
    return best;
}

// Removes from later branches the leading points that duplicate territory of
// earlier non-ancestor branches, then drops branches left without own points.
void dedup_branches(const Volume3D& vol, std::vector<Branch>& branches) {
    VisitedMask mask(vol);
    std::map<int, std::vector<int>> ancestry;
    std::map<int, std::size_t> pos;
    for (std::size_t i = 0; i < branches.size(); ++i) pos[branches[i].id] = i;
    for (auto& b : branches) {
        std::vector<int> allowed{b.id};
        for (auto p = b.parent_id; p; p = branches[pos[*p]].parent_id) allowed.push_back(*p);
        std::size_t first = b.inherited_points;
        while (first < b.points.size() && mask.foreign(b.points[first].center, allowed)) ++first;
        if (first > b.inherited_points) {
            // The last duplicated point becomes the junction so the chain stays connected.
            b.points.erase(b.points.begin(), b.points.begin() + static_cast<std::ptrdiff_t>(first - 1));
            b.inherited_points = 1;
        }
        for (std::size_t i = b.inherited_points; i < b.points.size(); ++i)
            mask.mark(b.points[i].center, b.points[i].radius, b.id);
    }

    std::map<int, std::optional<int>> parent_of;
    for (const auto& b : branches) parent_of[b.id] = b.parent_id;
    std::vector<Branch> kept;
    std::map<int, int> renumber;
    for (auto& b : branches) {
        if (b.points.size() <= b.inherited_points) {
            renumber[b.id] = -1;
            continue;
        }
        auto p = b.parent_id;
        while (p && renumber.count(*p) && renumber[*p] < 0) p = parent_of[*p];
        b.parent_id = p ? std::optional<int>(renumber.at(*p)) : std::nullopt;
        renumber[b.id] = static_cast<int>(kept.size());
        b.id = static_cast<int>(kept.size());
        kept.push_back(std::move(b));
    }
    branches = std::move(kept);
}

// A split that left a single child is no bifurcation: the child continues its parent.
void merge_single_children(std::vector<Branch>& branches) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < branches.size() && !changed; ++i) {
            std::vector<std::size_t> kids;
            for (std::size_t j = 0; j < branches.size(); ++j)
                if (branches[j].parent_id == branches[i].id) kids.push_back(j);
            if (kids.size() != 1) continue;
            Branch child = std::move(branches[kids.front()]);
            Branch& parent = branches[i];
            parent.points.insert(parent.points.end(),
                                 child.points.begin() + static_cast<std::ptrdiff_t>(child.inherited_points),
                                 child.points.end());
            parent.termination_reason = child.termination_reason;
            if (!child.tree_at_end.is_null()) parent.tree_at_end = std::move(child.tree_at_end);
            for (auto& b : branches)
                if (b.parent_id == child.id) b.parent_id = parent.id;
            branches.erase(branches.begin() + static_cast<std::ptrdiff_t>(kids.front()));
            changed = true;
        }
    }
    std::map<int, int> renumber;
    for (std::size_t i = 0; i < branches.size(); ++i) renumber[branches[i].id] = static_cast<int>(i);
    for (auto& b : branches) {
        b.id = renumber.at(b.id);
        if (b.parent_id) b.parent_id = renumber.at(*b.parent_id);
    }
}

}  // namespace

TrackedTree track_tree(const Volume3D& vol, const WorldPoint& seed, std::optional<Vec3> seed_dir,
                       const TrackerConfig& cfg, const TrackOptions& opts) {
    cfg.validate();
    if (opts.workers < 1) throw InvalidArgument("workers must be >= 1");
    if (!vol.contains(seed)) throw SeedFitFailed("seed point lies outside the volume");
    auto root = seed_hypothesis(vol, seed, seed_dir, cfg);
    if (!root) throw SeedFitFailed("no admissible template fit at the seed point");

    TrackedTree out;
    out.seed = seed;
    Task first;
    first.tree.emplace(*root, cfg.tree_config());
    first.prefix.push_back(to_point(first.tree->node(first.tree->root()).hyp));
    std::vector<Task> generation;
    generation.push_back(std::move(first));

    VisitedMask visited(vol);
    int next_id = 0;
    while (!generation.empty()) {
        const bool may_split = next_id + 3 * static_cast<int>(generation.size()) <= cfg.max_branches;
        const int base_id = next_id;
        std::vector<TaskResult> results(generation.size());
        BranchRunner runner(vol, cfg, opts, visited);

        std::atomic<std::size_t> cursor{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto work = [&] {
            while (true) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= generation.size()) return;
                try {
                    results[i] = runner.run(base_id + static_cast<int>(i), std::move(generation[i]), may_split);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        };
        const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(opts.workers), generation.size());
        if (n_threads <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }
        if (failure) std::rethrow_exception(failure);

        next_id += static_cast<int>(generation.size());
        std::vector<Task> next;
        for (auto& r : results) {
            const Branch& b = r.branch;
            for (std::size_t i = b.inherited_points; i < b.points.size(); ++i)
                visited.mark(b.points[i].center, b.points[i].radius, b.id);
            for (auto& c : r.children) next.push_back(std::move(c));
            out.branches.push_back(std::move(r.branch));
        }
        generation = std::move(next);
    }
    dedup_branches(vol, out.branches);
    merge_single_children(out.branches);
    return out;
}

CenterlineSet extract_centerlines(const TrackedTree& t) {
    CenterlineSet set;
    for (const auto& b : t.branches) {
        Centerline c;
        c.branch_id = b.id;
        for (const auto& p : b.points) {
            c.points.push_back(p.center);
            c.radii.push_back(p.radius);
        }
        set.chains.push_back(std::move(c));
    }
    return set;
}

nlohmann::json to_json(const TrackedTree& t) {
    nlohmann::json j;
    j["seed"] = {t.seed.x(), t.seed.y(), t.seed.z()};
    nlohmann::json branches = nlohmann::json::array();
    for (const auto& b : t.branches) {
        nlohmann::json jb;
        jb["id"] = b.id;
        jb["parent_id"] = b.parent_id ? nlohmann::json(*b.parent_id) : nlohmann::json(nullptr);
        jb["generation"] = b.generation;
        jb["termination_reason"] = to_string(b.termination_reason);
        jb["inherited_points"] = b.inherited_points;
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : b.points) {
            pts.push_back({{"center", {p.center.x(), p.center.y(), p.center.z()}},
                           {"direction", {p.direction.x(), p.direction.y(), p.direction.z()}},
                           {"radius", p.radius},
                           {"raw_score", std::isfinite(p.raw_score) ? nlohmann::json(p.raw_score) : nlohmann::json(nullptr)},
                           {"rank_score", p.rank_score ? nlohmann::json(*p.rank_score) : nlohmann::json(nullptr)},
                           {"uid", p.uid}});
        }
        jb["points"] = std::move(pts);
        branches.push_back(std::move(jb));
    }
    j["branches"] = std::move(branches);
    return j;
}

}  // namespace mht
