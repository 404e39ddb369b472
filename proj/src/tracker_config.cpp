#include "mht/errors.hpp"
#include "mht/tracker.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mht {

void TrackerConfig::validate() const {
    if (!(weight_window_factor > 0.0)) throw InvalidArgument("weight_window_factor must be positive");
    if (!(step_length_factor > 0.0)) throw InvalidArgument("step_length_factor must be positive");
    if (!(max_search_angle > 0.0 && max_search_angle < 90.0))
        throw InvalidArgument("max_search_angle must lie in (0, 90) degrees");
    if (n_angle_rings < 1) throw InvalidArgument("n_angle_rings must be >= 1");
    if (search_depth < 1) throw InvalidArgument("search_depth must be >= 1");
    if (!(r_min > 0.0 && r_min < r_max)) throw InvalidArgument("need 0 < r_min < r_max");
    if (!(gamma >= 2.0)) throw InvalidArgument("gamma must be >= 2");
    if (max_steps_per_branch < 1) throw InvalidArgument("max_steps_per_branch must be >= 1");
    if (!(bifurcation_separation_factor > 0.0)) throw InvalidArgument("bifurcation_separation_factor must be positive");
    if (max_candidates_per_step < 1) throw InvalidArgument("max_candidates_per_step must be >= 1");
    if (!(initial_radius >= r_min && initial_radius <= r_max))
        throw InvalidArgument("initial_radius must lie in [r_min, r_max]");
    if (max_leaves < 1) throw InvalidArgument("max_leaves must be >= 1");
    if (max_branches < 1) throw InvalidArgument("max_branches must be >= 1");
    if (!(duplicate_distance >= 0.0)) throw InvalidArgument("duplicate_distance must be >= 0");
    if (!(duplicate_angle >= 0.0)) throw InvalidArgument("duplicate_angle must be >= 0");
    if (!(min_contrast_ratio >= 0.0 && min_contrast_ratio <= 1.0))
        throw InvalidArgument("min_contrast_ratio must lie in [0, 1]");
    if (fit_max_iterations < 1) throw InvalidArgument("fit_max_iterations must be >= 1");
    if (scoring_mode == ScoringMode::RankBased && local_threshold)
        throw InvalidArgument("rank-based scoring takes no local threshold");
    fit_config().validate();
    tree_config().validate();
}

FitConfig TrackerConfig::fit_config() const {
    FitConfig f;
    f.max_iterations = fit_max_iterations;
    f.r_min = r_min;
    f.r_max = r_max;
    f.weight_window_factor = weight_window_factor;
    f.gamma = gamma;
    return f;
}

TreeConfig TrackerConfig::tree_config() const {
    TreeConfig t;
    t.search_depth = search_depth;
    t.mode = scoring_mode;
    t.rank_scope = rank_scope;
    t.local_threshold = scoring_mode == ScoringMode::OriginalSNR ? local_threshold : std::nullopt;
    t.global_threshold = global_threshold;
    t.max_leaves = max_leaves;
    t.dead_end_penalty = dead_end_penalty;
    return t;
}

TrackerConfig modified_mht_preset() { return TrackerConfig{}; }

TrackerConfig original_mht_preset() {
    TrackerConfig c;
    c.scoring_mode = ScoringMode::OriginalSNR;
    c.weight_window_factor = 3.0;
    c.step_length_factor = 1.5;
    c.max_search_angle = 60.0;
    c.n_angle_rings = 3;
    c.local_threshold = 2.0;
    c.global_threshold = 4.0;
    return c;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
        throw ParseError("config key '" + key + "': expected a number, got '" + v + "'");
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ParseError("config key '" + key + "': expected an integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParseError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

using Setter = std::function<void(TrackerConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"scoring_mode", [](TrackerConfig& c, const std::string&, const std::string& v) { c.scoring_mode = parse_scoring_mode(v); }},
        {"rank_scope", [](TrackerConfig& c, const std::string&, const std::string& v) { c.rank_scope = parse_rank_scope(v); }},
        {"weight_window_factor", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.weight_window_factor = to_double(k, v); }},
        {"step_length_factor", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.step_length_factor = to_double(k, v); }},
        {"max_search_angle", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.max_search_angle = to_double(k, v); }},
        {"n_angle_rings", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.n_angle_rings = static_cast<int>(to_int(k, v)); }},
        {"local_threshold", [](TrackerConfig& c, const std::string& k, const std::string& v) {
             if (v == "none" || v.empty())
                 c.local_threshold.reset();
             else
                 c.local_threshold = to_double(k, v);
         }},
        {"global_threshold", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.global_threshold = to_double(k, v); }},
        {"search_depth", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.search_depth = static_cast<int>(to_int(k, v)); }},
        {"r_min", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.r_min = to_double(k, v); }},
        {"r_max", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.r_max = to_double(k, v); }},
        {"gamma", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.gamma = to_double(k, v); }},
        {"max_steps_per_branch", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.max_steps_per_branch = static_cast<int>(to_int(k, v)); }},
        {"bifurcation_separation_factor", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.bifurcation_separation_factor = to_double(k, v); }},
        {"max_candidates_per_step", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.max_candidates_per_step = static_cast<int>(to_int(k, v)); }},
        {"initial_radius", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.initial_radius = to_double(k, v); }},
        {"max_leaves", [](TrackerConfig& c, const std::string& k, const std::string& v) {
             const long long n = to_int(k, v);
             if (n < 1) throw ParseError("config key 'max_leaves' must be >= 1");
             c.max_leaves = static_cast<std::size_t>(n);
         }},
        {"max_branches", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.max_branches = static_cast<int>(to_int(k, v)); }},
        {"duplicate_distance", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.duplicate_distance = to_double(k, v); }},
        {"duplicate_angle", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.duplicate_angle = to_double(k, v); }},
        {"min_contrast_ratio", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.min_contrast_ratio = to_double(k, v); }},
        {"fit_max_iterations", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.fit_max_iterations = static_cast<int>(to_int(k, v)); }},
        {"dead_end_penalty", [](TrackerConfig& c, const std::string& k, const std::string& v) { c.dead_end_penalty = to_bool(k, v); }},
    };
    return table;
}

}  // namespace

TrackerConfig parse_tracker_config(std::istream& is, const TrackerConfig& base) {
    TrackerConfig cfg = base;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        try {
            it->second(cfg, key, value);
        } catch (const InvalidArgument& e) {
            throw ParseError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    try {
        cfg.validate();
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("invalid tracker config: ") + e.what());
    }
    return cfg;
}

TrackerConfig load_tracker_config(const std::filesystem::path& path, const TrackerConfig& base) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path.string());
    return parse_tracker_config(is, base);
}

std::string to_config_text(const TrackerConfig& c) {
    std::ostringstream os;
    os << "scoring_mode = " << to_string(c.scoring_mode) << '\n'
       << "rank_scope = " << to_string(c.rank_scope) << '\n'
       << "weight_window_factor = " << fmt(c.weight_window_factor) << '\n'
       << "step_length_factor = " << fmt(c.step_length_factor) << '\n'
       << "max_search_angle = " << fmt(c.max_search_angle) << '\n'
       << "n_angle_rings = " << c.n_angle_rings << '\n'
       << "local_threshold = " << (c.local_threshold ? fmt(*c.local_threshold) : std::string("none")) << '\n'
       << "global_threshold = " << fmt(c.global_threshold) << '\n'
       << "search_depth = " << c.search_depth << '\n'
       << "r_min = " << fmt(c.r_min) << '\n'
       << "r_max = " << fmt(c.r_max) << '\n'
       << "gamma = " << fmt(c.gamma) << '\n'
       << "max_steps_per_branch = " << c.max_steps_per_branch << '\n'
       << "bifurcation_separation_factor = " << fmt(c.bifurcation_separation_factor) << '\n'
       << "max_candidates_per_step = " << c.max_candidates_per_step << '\n'
       << "initial_radius = " << fmt(c.initial_radius) << '\n'
       << "max_leaves = " << c.max_leaves << '\n'
       << "max_branches = " << c.max_branches << '\n'
       << "duplicate_distance = " << fmt(c.duplicate_distance) << '\n'
       << "duplicate_angle = " << fmt(c.duplicate_angle) << '\n'
       << "min_contrast_ratio = " << fmt(c.min_contrast_ratio) << '\n'
       << "fit_max_iterations = " << c.fit_max_iterations << '\n'
       << "dead_end_penalty = " << (c.dead_end_penalty ? "true" : "false") << '\n';
    return os.str();
}

nlohmann::json to_json(const TrackerConfig& c) {
    nlohmann::json j;
    j["scoring_mode"] = to_string(c.scoring_mode);
    j["rank_scope"] = to_string(c.rank_scope);
    j["weight_window_factor"] = c.weight_window_factor;
    j["step_length_factor"] = c.step_length_factor;
    j["max_search_angle"] = c.max_search_angle;
    j["n_angle_rings"] = c.n_angle_rings;
    j["local_threshold"] = c.local_threshold ? nlohmann::json(*c.local_threshold) : nlohmann::json(nullptr);
    j["global_threshold"] = c.global_threshold;
    j["search_depth"] = c.search_depth;
    j["r_min"] = c.r_min;
    j["r_max"] = c.r_max;
    j["gamma"] = c.gamma;
    j["max_steps_per_branch"] = c.max_steps_per_branch;
    j["bifurcation_separation_factor"] = c.bifurcation_separation_factor;
    j["max_candidates_per_step"] = c.max_candidates_per_step;
    j["initial_radius"] = c.initial_radius;
    j["max_leaves"] = c.max_leaves;
    j["max_branches"] = c.max_branches;
    j["duplicate_distance"] = c.duplicate_distance;
    j["duplicate_angle"] = c.duplicate_angle;
    j["min_contrast_ratio"] = c.min_contrast_ratio;
    j["fit_max_iterations"] = c.fit_max_iterations;
    j["dead_end_penalty"] = c.dead_end_penalty;
    return j;
}

}  // namespace mht
