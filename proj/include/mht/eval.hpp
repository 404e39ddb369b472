#pragma once

#include "mht/centerline.hpp"

#include "json.hpp"

#include <span>
#include <vector>

namespace mht {

/// Static 3-D KD-tree for exact nearest-neighbour queries. Distances are
/// computed with the same expression as the brute-force search, so the two
/// agree bit for bit.
class KdTree {
public:
    explicit KdTree(std::vector<WorldPoint> points);

    std::size_t size() const { return points_.size(); }
    /// Squared distance to the nearest stored point; +inf for an empty tree.
    double nearest_distance_sq(const WorldPoint& q) const;

private:
    struct Node {
        int point = -1;
        int axis = 0;
        int left = -1;
        int right = -1;
    };
    int build(std::vector<int>& idx, int lo, int hi, int depth);
    void search(int node, const WorldPoint& q, double& best) const;

    std::vector<WorldPoint> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

double brute_force_nearest_distance_sq(std::span<const WorldPoint> points, const WorldPoint& q);

struct BranchError {
    int branch_id = 0;
    std::size_t n_points = 0;
    double mean_distance = 0.0;    ///< mm, to the other set
    double fraction_within = 0.0;  ///< share of points within the match tolerance
};

struct ErrorReport {
    double d_err = 0.0;
    double fp_term = 0.0;  ///< mean distance from output points to the reference
    double fn_term = 0.0;  ///< mean distance from reference points to the output
    double w = 0.5;
    std::size_t n_op = 0;
    std::size_t n_ref = 0;
    double match_tolerance = 1.5;
    std::vector<BranchError> op_branches;
    std::vector<BranchError> ref_branches;

    /// Reference branches with at least `min_fraction` of points within the match tolerance.
    int matched_reference_branches(double min_fraction = 0.8) const;
};

nlohmann::json to_json(const ErrorReport& r);

/// d_err = w * fp_term + (1 - w) * fn_term over the raw point sets.
/// Throws EmptyCenterline or InvalidArgument (w outside [0, 1]).
ErrorReport centerline_distance(const CenterlineSet& op, const CenterlineSet& ref, double w = 0.5,
                                double match_tolerance = 1.5);

/// Linear resampling so consecutive points are at most max_spacing apart.
/// Endpoints and original vertices are kept; radii are interpolated.
Centerline densify_chain(const Centerline& chain, double max_spacing);
CenterlineSet densify(const CenterlineSet& set, double max_spacing);

}  // namespace mht
