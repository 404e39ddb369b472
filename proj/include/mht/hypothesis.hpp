#pragma once

#include "mht/fitting.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mht {

enum class ScoringMode { OriginalSNR, RankBased };

/// Which hypotheses are ranked against each other in RankBased mode.
enum class RankScope {
    Siblings,  ///< children of one leaf
    Step,      ///< every hypothesis created at the same tracking step
};

std::string to_string(ScoringMode mode);
ScoringMode parse_scoring_mode(const std::string& s);
std::string to_string(RankScope scope);
RankScope parse_rank_scope(const std::string& s);

/// One fitted template at one tracking step.
struct LocalHypothesis {
    FitResult fit;
    double raw_score = 0.0;             ///< t-statistic of the fit
    std::optional<double> rank_score;   ///< in [0, 1] once ranked
    int step_index = 0;
    int origin_branch = -1;             ///< branch whose expansion created it
    std::uint64_t uid = 0;              ///< assigned by the tree on insertion
    double reference_contrast = 0.0;    ///< running contrast of the path; 0 means use fit.contrast
};

LocalHypothesis make_hypothesis(const FitResult& fit, int step_index, int origin_branch = -1);

/// Ranks a set of competing hypotheses: best raw score gets 1, worst 0,
/// linear in between. Ties go to the smaller fitted radius, then to the
/// earlier element. Throws EmptyHypothesisSet.
void rank_siblings(std::span<LocalHypothesis> hyps);

/// Score a node contributes to a global hypothesis under `mode`.
double node_score(const LocalHypothesis& h, ScoringMode mode);

/// Mean of the per-node scores along a path.
double global_score(std::span<const double> path_scores);

struct TreeConfig {
    int search_depth = 6;
    ScoringMode mode = ScoringMode::RankBased;
    RankScope rank_scope = RankScope::Siblings;
    std::optional<double> local_threshold;  ///< OriginalSNR only
    double global_threshold = 0.7;
    std::size_t max_leaves = 64;            ///< beam on live leaves
    /// A leaf whose expansion failed adds a local score of 0 for the failed step.
    bool dead_end_penalty = true;

    void validate() const;
};

/// Root-to-leaf path (excluding the committed root) with its mean score.
struct GlobalHypothesis {
    std::vector<int> path;  ///< node ids, root child first
    int leaf_depth = 0;
    double score = 0.0;
};

/// Why an expanded leaf has no children.
enum class DeadEnd {
    Failure,   ///< no admissible continuation; penalized when configured
    Boundary,  ///< continuation left the volume; the path is complete
};

enum class DecisionKind { Committed, BelowThreshold, Exhausted };

struct Decision {
    DecisionKind kind = DecisionKind::Exhausted;
    LocalHypothesis committed;  ///< valid when kind == Committed
    double best_score = 0.0;
    std::vector<std::uint64_t> best_path;  ///< uids of the winning global hypothesis
};

/// Deferred-decision tree rooted at the last committed hypothesis. Node ids
/// are indices valid until the next commit or restriction.
class HypothesisTree {
public:
    struct Node {
        LocalHypothesis hyp;
        int parent = -1;
        std::vector<int> children;
        int depth = 0;
        bool expanded = false;  ///< expanded leaves without children are dead ends
        DeadEnd dead_end = DeadEnd::Failure;
    };

    HypothesisTree(LocalHypothesis root, TreeConfig cfg);

    const TreeConfig& config() const { return cfg_; }
    int root() const { return 0; }
    const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    std::size_t node_count() const { return nodes_.size(); }

    /// Deepest node depth below the root.
    int depth() const;
    /// All leaves below the root, live or dead.
    std::vector<int> leaves() const;
    /// Leaves that may still be expanded (depth < search depth, not expanded).
    std::vector<int> expandable_leaves() const;
    /// Leaves that are not dead ends.
    std::vector<int> live_leaves() const;

    /// Attaches the candidates as children of `leaf`. In OriginalSNR mode
    /// candidates below the local threshold are dropped first; in RankBased
    /// mode with sibling scope the survivors are ranked. Returns the new ids.
    /// When nothing survives the leaf becomes a dead end of kind `if_empty`.
    std::vector<int> expand_leaf(int leaf, std::vector<LocalHypothesis> candidates,
                                 DeadEnd if_empty = DeadEnd::Failure);

    bool is_dead_end(int id) const;

    /// Ranks every node at `depth` together (step-scope ranking).
    void rank_depth(int depth);

    std::vector<int> path_to(int id) const;
    /// Mean node score along the path to `id`; a penalized dead end counts as
    /// one more step scoring 0.
    double path_score(int id) const;
    GlobalHypothesis global_hypothesis(int leaf) const;
    std::vector<GlobalHypothesis> global_hypotheses() const;

    /// Index of the best global hypothesis: highest score, then deeper, then
    /// earlier in node order. Empty when the root has no children.
    std::optional<GlobalHypothesis> best_global_hypothesis() const;

    /// Drops leaves whose global score is below the global threshold and keeps
    /// at most max_leaves of the remaining live ones. Never empties the tree:
    /// when the best hypothesis itself is below threshold nothing is removed.
    void prune();

    /// Commits the first step of the best global hypothesis and re-roots the
    /// tree there, discarding the other root subtrees.
    Decision decide_and_commit();

    /// Commits every node on the path to `id` and re-roots the tree there.
    /// Returns the committed hypotheses in order.
    std::vector<LocalHypothesis> advance_to(int id);

    /// Node id holding the hypothesis with this uid, or -1.
    int find_uid(std::uint64_t uid) const;

    /// Copy of the tree keeping only the given leaves and their ancestors.
    HypothesisTree restricted_to(std::span<const int> keep) const;

    /// Committed lineage, oldest first; the last entry is the current root.
    const std::vector<LocalHypothesis>& history() const { return history_; }

    nlohmann::json to_json() const;
    std::string to_text() const;

private:
    int add_node(LocalHypothesis h, int parent);
    void remove_subtrees(const std::vector<bool>& doomed);
    void rebuild_from(int new_root);

    TreeConfig cfg_;
    std::vector<Node> nodes_;
    std::vector<LocalHypothesis> history_;
    std::uint64_t next_uid_ = 1;
};

nlohmann::json to_json(const LocalHypothesis& h);

}  // namespace mht
