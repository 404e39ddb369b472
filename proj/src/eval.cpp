#include "mht/eval.hpp"

#include "mht/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mht {

namespace {

double dist_sq(const WorldPoint& a, const WorldPoint& b) { return (a - b).squaredNorm(); }

}  // namespace

KdTree::KdTree(std::vector<WorldPoint> points) : points_(std::move(points)) {
    std::vector<int> idx(points_.size());
    std::iota(idx.begin(), idx.end(), 0);
    nodes_.reserve(points_.size());
    root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int KdTree::build(std::vector<int>& idx, int lo, int hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const int mid = lo + (hi - lo) / 2;
    std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                     [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{idx[mid], axis, -1, -1});
    const int left = build(idx, lo, mid, depth + 1);
    const int right = build(idx, mid + 1, hi, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::search(int node, const WorldPoint& q, double& best) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const WorldPoint& p = points_[n.point];
    best = std::min(best, dist_sq(p, q));
    const double diff = q[n.axis] - p[n.axis];
    const int near = diff < 0.0 ? n.left : n.right;
    const int far = diff < 0.0 ? n.right : n.left;
    search(near, q, best);
    if (diff * diff <= best) search(far, q, best);
}

double KdTree::nearest_distance_sq(const WorldPoint& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(root_, q, best);
    return best;
}

double brute_force_nearest_distance_sq(std::span<const WorldPoint> points, const WorldPoint& q) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : points) best = std::min(best, dist_sq(p, q));
    return best;
}

int ErrorReport::matched_reference_branches(double min_fraction) const {
    return static_cast<int>(std::count_if(ref_branches.begin(), ref_branches.end(),
                                          [&](const BranchError& b) { return b.fraction_within >= min_fraction; }));
}

nlohmann::json to_json(const ErrorReport& r) {
    auto rows = [](const std::vector<BranchError>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& b : v)
            a.push_back({{"branch_id", b.branch_id},
                         {"n_points", b.n_points},
                         {"mean_distance", b.mean_distance},
                         {"fraction_within", b.fraction_within}});
        return a;
    };
    return {{"d_err", r.d_err},
            {"fp_term", r.fp_term},
            {"fn_term", r.fn_term},
            {"w", r.w},
            {"n_op", r.n_op},
            {"n_ref", r.n_ref},
            {"match_tolerance", r.match_tolerance},
            {"matched_reference_branches", r.matched_reference_branches()},
            {"op_branches", rows(r.op_branches)},
            {"ref_branches", rows(r.ref_branches)}};
}

namespace {

// Mean nearest distance from every point of `from` to `to`, plus per-chain rows.
double directed_term(const CenterlineSet& from, const KdTree& to, double tol, std::vector<BranchError>& rows) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& c : from.chains) {
        BranchError row;
        row.branch_id = c.branch_id;
        row.n_points = c.points.size();
        double sum = 0.0;
        std::size_t within = 0;
        for (const auto& p : c.points) {
            const double d = std::sqrt(to.nearest_distance_sq(p));
            sum += d;
            total += d;
            if (d <= tol) ++within;
        }
        n += c.points.size();
        row.mean_distance = sum / static_cast<double>(c.points.size());
        row.fraction_within = static_cast<double>(within) / static_cast<double>(c.points.size());
        rows.push_back(row);
    }
    return total / static_cast<double>(n);
}

}  // namespace

ErrorReport centerline_distance(const CenterlineSet& op, const CenterlineSet& ref, double w, double match_tolerance) {
    if (!(w >= 0.0 && w <= 1.0)) throw InvalidArgument("w must lie in [0, 1]");
    op.validate();
    ref.validate();
    if (op.point_count() == 0) throw EmptyCenterline("output centerline set is empty");
    if (ref.point_count() == 0) throw EmptyCenterline("reference centerline set is empty");

    ErrorReport r;
    r.w = w;
    r.match_tolerance = match_tolerance;
    r.n_op = op.point_count();
    r.n_ref = ref.point_count();
    const KdTree op_tree(op.all_points());
    const KdTree ref_tree(ref.all_points());
    r.fp_term = directed_term(op, ref_tree, match_tolerance, r.op_branches);
    r.fn_term = directed_term(ref, op_tree, match_tolerance, r.ref_branches);
    r.d_err = w * r.fp_term + (1.0 - w) * r.fn_term;
    return r;
}

Centerline densify_chain(const Centerline& chain, double max_spacing) {
    if (!(max_spacing > 0.0)) throw InvalidArgument("max_spacing must be positive");
    if (chain.points.size() < 2) return chain;
    Centerline out;
    out.branch_id = chain.branch_id;
    const bool radii = chain.has_radii();
    out.points.push_back(chain.points.front());
    if (radii) out.radii.push_back(chain.radii.front());
    for (std::size_t i = 1; i < chain.points.size(); ++i) {
        const WorldPoint& a = chain.points[i - 1];
        const WorldPoint& b = chain.points[i];
        const double len = (b - a).norm();
        const int n = std::max(1, static_cast<int>(std::ceil(len / max_spacing)));
        for (int s = 1; s <= n; ++s) {
            const double t = static_cast<double>(s) / n;
            out.points.push_back(s == n ? b : WorldPoint(a + t * (b - a)));
            if (radii) out.radii.push_back(s == n ? chain.radii[i] : chain.radii[i - 1] + t * (chain.radii[i] - chain.radii[i - 1]));
        }
    }
    return out;
}

CenterlineSet densify(const CenterlineSet& set, double max_spacing) {
    CenterlineSet out;
    for (const auto& c : set.chains) out.chains.push_back(densify_chain(c, max_spacing));
    return out;
}

}  // namespace mht
