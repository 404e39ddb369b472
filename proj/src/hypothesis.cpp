#include "mht/hypothesis.hpp"

#include "mht/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace mht {

namespace {

constexpr std::size_t kMaxHistory = 32;

// Total order used for ranking: larger raw score first, then smaller radius,
// then original position. NaN scores sort last.
bool ranks_before(const LocalHypothesis& a, std::size_t ia, const LocalHypothesis& b, std::size_t ib) {
    const double sa = std::isnan(a.raw_score) ? -std::numeric_limits<double>::infinity() : a.raw_score;
    const double sb = std::isnan(b.raw_score) ? -std::numeric_limits<double>::infinity() : b.raw_score;
    if (sa != sb) return sa > sb;
    if (a.fit.tmpl.radius != b.fit.tmpl.radius) return a.fit.tmpl.radius < b.fit.tmpl.radius;
    return ia < ib;
}

template <class Get>
void assign_ranks(std::size_t n, Get&& get) {
    if (n == 0) throw EmptyHypothesisSet("cannot rank an empty hypothesis set");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ranks_before(get(a), a, get(b), b); });
    if (n == 1) {
        get(0).rank_score = 1.0;
        return;
    }
    const double denom = static_cast<double>(n - 1);
    for (std::size_t pos = 0; pos < n; ++pos) {
        // rank = pos + 1, score = (N - rank) / (N - 1)
        get(order[pos]).rank_score = static_cast<double>(n - 1 - pos) / denom;
    }
}

}  // namespace

std::string to_string(ScoringMode mode) {
    return mode == ScoringMode::OriginalSNR ? "original_snr" : "rank_based";
}

ScoringMode parse_scoring_mode(const std::string& s) {
    if (s == "original_snr" || s == "OriginalSNR" || s == "org") return ScoringMode::OriginalSNR;
    if (s == "rank_based" || s == "RankBased" || s == "mod") return ScoringMode::RankBased;
    throw InvalidArgument("unknown scoring mode '" + s + "'");
}

std::string to_string(RankScope scope) { return scope == RankScope::Siblings ? "siblings" : "step"; }

RankScope parse_rank_scope(const std::string& s) {
    if (s == "siblings") return RankScope::Siblings;
    if (s == "step") return RankScope::Step;
    throw InvalidArgument("unknown rank scope '" + s + "'");
}

LocalHypothesis make_hypothesis(const FitResult& fit, int step_index, int origin_branch) {
    LocalHypothesis h;
    h.fit = fit;
    h.raw_score = fit.t_stat;
    h.step_index = step_index;
    h.origin_branch = origin_branch;
    return h;
}

void rank_siblings(std::span<LocalHypothesis> hyps) {
    assign_ranks(hyps.size(), [&](std::size_t i) -> LocalHypothesis& { return hyps[i]; });
}

double node_score(const LocalHypothesis& h, ScoringMode mode) {
    if (mode == ScoringMode::OriginalSNR) return h.raw_score;
    return h.rank_score.value_or(0.0);
}

double global_score(std::span<const double> path_scores) {
    if (path_scores.empty()) return 0.0;
    double sum = 0.0;
    for (double s : path_scores) sum += s;
    return sum / static_cast<double>(path_scores.size());
}

void TreeConfig::validate() const {
    if (search_depth < 1) throw InvalidArgument("search depth must be >= 1");
    if (max_leaves < 1) throw InvalidArgument("max_leaves must be >= 1");
    if (mode == ScoringMode::RankBased && local_threshold.has_value())
        throw InvalidArgument("rank-based scoring takes no local threshold");
}

HypothesisTree::HypothesisTree(LocalHypothesis root, TreeConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    root.uid = next_uid_++;
    if (!root.rank_score) root.rank_score = 1.0;
    nodes_.push_back(Node{root, -1, {}, 0, false});
    history_.push_back(root);
}

int HypothesisTree::add_node(LocalHypothesis h, int parent) {
    h.uid = next_uid_++;
    const int id = static_cast<int>(nodes_.size());
    const int depth = nodes_[static_cast<std::size_t>(parent)].depth + 1;
    nodes_.push_back(Node{std::move(h), parent, {}, depth, false});
    nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
    return id;
}

int HypothesisTree::depth() const {
    int d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.depth);
    return d;
}

std::vector<int> HypothesisTree::leaves() const {
    std::vector<int> out;
    for (std::size_t i = 1; i < nodes_.size(); ++i)
        if (nodes_[i].children.empty()) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> HypothesisTree::expandable_leaves() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.children.empty() && !n.expanded && n.depth < cfg_.search_depth) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<int> HypothesisTree::live_leaves() const {
    std::vector<int> out;
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.children.empty() && !n.expanded) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<int> HypothesisTree::expand_leaf(int leaf, std::vector<LocalHypothesis> candidates, DeadEnd if_empty) {
    Node& n = nodes_.at(static_cast<std::size_t>(leaf));
    if (!n.children.empty() || n.depth >= cfg_.search_depth)
        throw InvalidArgument("expand_leaf needs an unexpanded leaf above the search depth");
    n.expanded = true;
    n.dead_end = if_empty;

    if (cfg_.mode == ScoringMode::OriginalSNR && cfg_.local_threshold) {
        const double thr = *cfg_.local_threshold;
        std::erase_if(candidates, [thr](const LocalHypothesis& h) { return !(h.raw_score >= thr); });
    }
    if (candidates.empty()) return {};
    if (cfg_.mode == ScoringMode::RankBased && cfg_.rank_scope == RankScope::Siblings)
        rank_siblings(candidates);

    std::vector<int> ids;
    ids.reserve(candidates.size());
    for (auto& c : candidates) ids.push_back(add_node(std::move(c), leaf));
    return ids;
}

bool HypothesisTree::is_dead_end(int id) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(id));
    return n.expanded && n.children.empty();
}

void HypothesisTree::rank_depth(int depth) {
    std::vector<int> ids;
    for (std::size_t i = 1; i < nodes_.size(); ++i)
        if (nodes_[i].depth == depth) ids.push_back(static_cast<int>(i));
    if (ids.empty()) return;
    assign_ranks(ids.size(),
                 [&](std::size_t i) -> LocalHypothesis& { return nodes_[static_cast<std::size_t>(ids[i])].hyp; });
}

std::vector<int> HypothesisTree::path_to(int id) const {
    std::vector<int> path;
    for (int cur = id; cur > 0; cur = nodes_.at(static_cast<std::size_t>(cur)).parent) path.push_back(cur);
    std::reverse(path.begin(), path.end());
    return path;
}

double HypothesisTree::path_score(int id) const {
    const auto path = path_to(id);
    std::vector<double> scores;
    scores.reserve(path.size());
    for (int p : path) scores.push_back(node_score(nodes_[static_cast<std::size_t>(p)].hyp, cfg_.mode));
    if (cfg_.dead_end_penalty && id > 0 && is_dead_end(id) &&
        nodes_[static_cast<std::size_t>(id)].dead_end == DeadEnd::Failure)
        scores.push_back(0.0);
    return global_score(scores);
}

GlobalHypothesis HypothesisTree::global_hypothesis(int leaf) const {
    GlobalHypothesis g;
    g.path = path_to(leaf);
    g.leaf_depth = static_cast<int>(g.path.size());
    g.score = path_score(leaf);
    return g;
}

std::vector<GlobalHypothesis> HypothesisTree::global_hypotheses() const {
    std::vector<GlobalHypothesis> out;
    for (int leaf : leaves()) out.push_back(global_hypothesis(leaf));
    return out;
}

std::optional<GlobalHypothesis> HypothesisTree::best_global_hypothesis() const {
    std::optional<GlobalHypothesis> best;
    for (int leaf : leaves()) {
        GlobalHypothesis g = global_hypothesis(leaf);
        if (!best || g.score > best->score || (g.score == best->score && g.leaf_depth > best->leaf_depth))
            best = std::move(g);
    }
    return best;
}

void HypothesisTree::remove_subtrees(const std::vector<bool>& doomed_in) {
    std::vector<bool> doomed = doomed_in;
    doomed[0] = false;
    // Descendants of doomed nodes go too; nodes are stored parents-first.
    for (std::size_t i = 1; i < nodes_.size(); ++i)
        if (doomed[static_cast<std::size_t>(nodes_[i].parent)]) doomed[i] = true;
    // Ancestors left without children were only kept alive by doomed descendants.
    for (std::size_t i = nodes_.size(); i-- > 1;) {
        if (doomed[i]) continue;
        const Node& n = nodes_[i];
        if (n.children.empty()) continue;
        const bool all_gone = std::all_of(n.children.begin(), n.children.end(),
                                          [&](int c) { return doomed[static_cast<std::size_t>(c)]; });
        if (all_gone) doomed[i] = true;
    }

    std::vector<int> remap(nodes_.size(), -1);
    std::vector<Node> kept;
    kept.reserve(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (doomed[i]) continue;
        remap[i] = static_cast<int>(kept.size());
        kept.push_back(std::move(nodes_[i]));
    }
    for (auto& n : kept) {
        if (n.parent >= 0) n.parent = remap[static_cast<std::size_t>(n.parent)];
        std::vector<int> children;
        for (int c : n.children)
            if (remap[static_cast<std::size_t>(c)] >= 0) children.push_back(remap[static_cast<std::size_t>(c)]);
        n.children = std::move(children);
    }
    nodes_ = std::move(kept);
}

void HypothesisTree::prune() {
    const auto best = best_global_hypothesis();
    if (!best || best->score < cfg_.global_threshold) return;

    std::vector<bool> doomed(nodes_.size(), false);
    std::vector<std::pair<double, int>> ranked;
    for (int leaf : leaves()) {
        const double s = path_score(leaf);
        if (s < cfg_.global_threshold)
            doomed[static_cast<std::size_t>(leaf)] = true;
        else if (!is_dead_end(leaf))
            ranked.emplace_back(s, leaf);
    }
    if (ranked.size() > cfg_.max_leaves) {
        std::stable_sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t i = cfg_.max_leaves; i < ranked.size(); ++i)
            doomed[static_cast<std::size_t>(ranked[i].second)] = true;
    }
    if (std::none_of(doomed.begin(), doomed.end(), [](bool b) { return b; })) return;
    remove_subtrees(doomed);
}

void HypothesisTree::rebuild_from(int new_root) {
    std::vector<Node> out;
    std::vector<int> remap(nodes_.size(), -1);
    std::vector<int> queue{new_root};
    const int base_depth = nodes_[static_cast<std::size_t>(new_root)].depth;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const int id = queue[qi];
        remap[static_cast<std::size_t>(id)] = static_cast<int>(out.size());
        Node n = nodes_[static_cast<std::size_t>(id)];
        n.depth -= base_depth;
        out.push_back(std::move(n));
        for (int c : nodes_[static_cast<std::size_t>(id)].children) queue.push_back(c);
    }
    for (auto& n : out) {
        n.parent = n.parent >= 0 ? remap[static_cast<std::size_t>(n.parent)] : -1;
        for (int& c : n.children) c = remap[static_cast<std::size_t>(c)];
    }
    out[0].parent = -1;
    nodes_ = std::move(out);
}

Decision HypothesisTree::decide_and_commit() {
    Decision d;
    const auto best = best_global_hypothesis();
    if (!best) {
        d.kind = DecisionKind::Exhausted;
        return d;
    }
    d.best_score = best->score;
    for (int id : best->path) d.best_path.push_back(nodes_[static_cast<std::size_t>(id)].hyp.uid);
    if (best->score < cfg_.global_threshold) {
        d.kind = DecisionKind::BelowThreshold;
        return d;
    }
    const int first = best->path.front();
    d.kind = DecisionKind::Committed;
    d.committed = nodes_[static_cast<std::size_t>(first)].hyp;
    rebuild_from(first);
    history_.push_back(d.committed);
    if (history_.size() > kMaxHistory) history_.erase(history_.begin());
    return d;
}

std::vector<LocalHypothesis> HypothesisTree::advance_to(int id) {
    const auto path = path_to(id);
    std::vector<LocalHypothesis> committed;
    if (path.empty()) return committed;
    for (int p : path) {
        committed.push_back(nodes_[static_cast<std::size_t>(p)].hyp);
        history_.push_back(committed.back());
    }
    while (history_.size() > kMaxHistory) history_.erase(history_.begin());
    rebuild_from(id);
    return committed;
}

int HypothesisTree::find_uid(std::uint64_t uid) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].hyp.uid == uid) return static_cast<int>(i);
    return -1;
}

HypothesisTree HypothesisTree::restricted_to(std::span<const int> keep) const {
    std::vector<bool> wanted(nodes_.size(), false);
    wanted[0] = true;
    for (int leaf : keep)
        for (int cur = leaf; cur >= 0 && !wanted[static_cast<std::size_t>(cur)];
             cur = nodes_[static_cast<std::size_t>(cur)].parent)
            wanted[static_cast<std::size_t>(cur)] = true;
    std::vector<bool> doomed(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) doomed[i] = !wanted[i];
    HypothesisTree copy = *this;
    copy.remove_subtrees(doomed);
    return copy;
}

nlohmann::json to_json(const LocalHypothesis& h) {
    nlohmann::json j;
    j["uid"] = h.uid;
    j["step"] = h.step_index;
    j["origin_branch"] = h.origin_branch;
    j["raw_score"] = std::isfinite(h.raw_score) ? nlohmann::json(h.raw_score) : nlohmann::json(nullptr);
    j["rank_score"] = h.rank_score ? nlohmann::json(*h.rank_score) : nlohmann::json(nullptr);
    const auto& t = h.fit.tmpl;
    j["center"] = {t.center.x(), t.center.y(), t.center.z()};
    j["direction"] = {t.direction.x(), t.direction.y(), t.direction.z()};
    j["radius"] = t.radius;
    j["contrast"] = h.fit.contrast;
    j["background"] = h.fit.background;
    return j;
}

nlohmann::json HypothesisTree::to_json() const {
    std::function<nlohmann::json(int)> rec = [&](int id) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        nlohmann::json j = mht::to_json(n.hyp);
        j["depth"] = n.depth;
        if (n.expanded && n.children.empty())
            j["dead_end"] = n.dead_end == DeadEnd::Boundary ? "boundary" : "failure";
        nlohmann::json kids = nlohmann::json::array();
        for (int c : n.children) kids.push_back(rec(c));
        j["children"] = std::move(kids);
        return j;
    };
    nlohmann::json out;
    out["scoring_mode"] = to_string(cfg_.mode);
    out["search_depth"] = cfg_.search_depth;
    out["global_threshold"] = cfg_.global_threshold;
    out["local_threshold"] = cfg_.local_threshold ? nlohmann::json(*cfg_.local_threshold) : nlohmann::json(nullptr);
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : history_) hist.push_back(mht::to_json(h));
    out["history"] = std::move(hist);
    out["root"] = rec(0);
    return out;
}

std::string HypothesisTree::to_text() const {
    std::ostringstream os;
    std::function<void(int)> rec = [&](int id) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        const auto& c = n.hyp.fit.tmpl.center;
        os << std::string(static_cast<std::size_t>(2 * n.depth), ' ') << '#' << n.hyp.uid << " step "
           << n.hyp.step_index << " l=" << n.hyp.raw_score;
        if (n.hyp.rank_score) os << " rank=" << *n.hyp.rank_score;
        os << " r=" << n.hyp.fit.tmpl.radius << " at (" << c.x() << ", " << c.y() << ", " << c.z() << ")";
        if (n.expanded && n.children.empty())
            os << (n.dead_end == DeadEnd::Boundary ? " [boundary]" : " [dead end]");
        os << '\n';
        for (int ch : n.children) rec(ch);
    };
    rec(0);
    return os.str();
}

}  // namespace mht
