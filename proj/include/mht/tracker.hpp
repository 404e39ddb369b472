#pragma once

#include "mht/centerline.hpp"
#include "mht/fitting.hpp"
#include "mht/hypothesis.hpp"
#include "mht/volume.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mht {

struct TrackerConfig {
    ScoringMode scoring_mode = ScoringMode::RankBased;
    RankScope rank_scope = RankScope::Siblings;
    double weight_window_factor = 1.0;
    double step_length_factor = 1.1;
    double max_search_angle = 70.0;  ///< degrees
    int n_angle_rings = 2;
    std::optional<double> local_threshold;  ///< OriginalSNR only
    double global_threshold = 0.7;
    int search_depth = 6;
    double r_min = 1.0;
    double r_max = 10.0;
    double gamma = 8.0;
    int max_steps_per_branch = 500;
    double bifurcation_separation_factor = 1.0;  ///< kappa
    int max_candidates_per_step = 12;

    double initial_radius = 3.0;        ///< radius of the seed fit start
    std::size_t max_leaves = 16;        ///< beam on live leaves of a hypothesis tree
    int max_branches = 64;              ///< no further splits once reached
    double duplicate_distance = 0.5;    ///< siblings on a common axis (within this times r_prev) are merged
    double duplicate_angle = 15.0;      ///< degrees; direction tolerance of the merge
    double min_contrast_ratio = 0.5;    ///< child contrast must reach this share of the tip contrast
    int fit_max_iterations = 20;
    bool dead_end_penalty = true;

    /// Throws InvalidArgument.
    void validate() const;
    FitConfig fit_config() const;
    TreeConfig tree_config() const;
};

/// Parameter sets of the two tracker variants.
TrackerConfig modified_mht_preset();
TrackerConfig original_mht_preset();

/// `key = value` lines, `#` comments. Unknown keys are errors. Keys not
/// present keep their value from `base`. Throws ParseError.
TrackerConfig parse_tracker_config(std::istream& is, const TrackerConfig& base = {});
TrackerConfig load_tracker_config(const std::filesystem::path& path, const TrackerConfig& base = {});
std::string to_config_text(const TrackerConfig& cfg);
nlohmann::json to_json(const TrackerConfig& cfg);

/// Center direction plus rings of directions at polar angles j * max / n_rings.
std::vector<Vec3> candidate_directions(const Vec3& current, double max_angle_deg, int n_rings);

enum class TerminationReason {
    BelowGlobalThreshold,
    OutOfBounds,
    RadiusOutOfRange,
    MaxSteps,
    RevisitedTerritory,
    FitFailure,
    Bifurcation,  ///< branch handed over to two children
};

std::string to_string(TerminationReason r);

/// Candidate continuations of one tip plus bookkeeping on the dropped ones.
struct StepOutcome {
    std::vector<LocalHypothesis> hypotheses;
    int attempted = 0;
    int out_of_bounds = 0;
    int radius_at_bound = 0;
    int failed = 0;          ///< fit error or non-finite score
    int weak = 0;            ///< contrast too low relative to the tip
    int duplicates = 0;
    bool ahead_out_of_bounds = false;  ///< the straight-ahead candidate hit the boundary

    DeadEnd dead_end_kind() const;
    TerminationReason dominant_reason() const;
};

/// Fits a template for every candidate direction at distance
/// step_length_factor * r_prev from the tip. Keeps admissible fits (center
/// in bounds, radius not pinned at a bound, contrast positive and at least
/// min_contrast_ratio times the running path contrast), merges
/// near-duplicates and caps the list at max_candidates_per_step by raw score.
StepOutcome step_branch(const Volume3D& vol, const LocalHypothesis& tip, const TrackerConfig& cfg, int step_index,
                        int origin_branch);

struct BifurcationSplit {
    int best_a = -1;  ///< index into the input of the best leaf of cluster A
    int best_b = -1;
    std::vector<int> cluster_a;
    std::vector<int> cluster_b;
};

/// 2-means on leaf centers (initialized with the two mutually farthest
/// leaves, at most 50 iterations). Reports a split when the centroid distance
/// exceeds kappa * (mean radius A + mean radius B).
std::optional<BifurcationSplit> detect_bifurcation(std::span<const LocalHypothesis> leaves, double kappa);

struct BranchPoint {
    WorldPoint center;
    Vec3 direction;
    double radius = 0.0;
    double raw_score = 0.0;
    std::optional<double> rank_score;
    std::uint64_t uid = 0;
};

struct Branch {
    int id = 0;
    std::optional<int> parent_id;
    int generation = 0;
    std::vector<BranchPoint> points;
    std::size_t inherited_points = 0;  ///< leading points copied from the parent junction
    TerminationReason termination_reason = TerminationReason::FitFailure;
    nlohmann::json tree_at_start;  ///< filled when dumps are requested
    nlohmann::json tree_at_end;
};

struct TrackedTree {
    WorldPoint seed;
    std::vector<Branch> branches;
};

struct TrackOptions {
    int workers = 1;
    bool dump_trees = false;
};

/// Deferred-decision tracking of a whole tree from one seed. Branches are
/// processed generation by generation: a branch only sees territory committed
/// by earlier generations, so results do not depend on the worker count.
/// Duplicated points between same-generation branches are removed afterwards
/// in branch-id order. Throws SeedFitFailed.
TrackedTree track_tree(const Volume3D& vol, const WorldPoint& seed, std::optional<Vec3> seed_dir,
                       const TrackerConfig& cfg, const TrackOptions& opts = {});

CenterlineSet extract_centerlines(const TrackedTree& t);

nlohmann::json to_json(const TrackedTree& t);

}  // namespace mht
