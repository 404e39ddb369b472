#include "commands.hpp"

#include "mht/errors.hpp"
#include "mht/eval.hpp"
#include "mht/phantom.hpp"
#include "mht/tracker.hpp"
#include "mht/volume.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#ifndef MHT_VERSION
#define MHT_VERSION "0.0.0"
#endif
#ifndef MHT_PRESET_DIR
#define MHT_PRESET_DIR "presets"
#endif

namespace mht::cli {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void write_json(const json& j, const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// One manifest per run. Paths are stored as given so a manifest replays from
// the same working directory.
struct Manifest {
    json j;

    Manifest(const std::string& command, const std::vector<std::string>& argv) {
        j["tool"] = "airway_mht";
        j["version"] = MHT_VERSION;
        j["command"] = command;
        j["argv"] = argv;
        j["inputs"] = json::object();
        j["outputs"] = json::object();
        j["timings_ms"] = json::object();
    }

    void write(const fs::path& path) { write_json(j, path); }
};

WorldPoint resolve_seed(const SeedArg& s, const Volume3D& vol) {
    if (s.world) return *s.world;
    if (s.voxel) {
        const auto& v = *s.voxel;
        if (v.size() != 3 || !vol.contains_index(v[0], v[1], v[2]))
            throw InvalidArgument("--seed-voxel must be three indices inside the volume");
        return vol.voxel_center(v[0], v[1], v[2]);
    }
    throw InvalidArgument("a seed is required (--seed or --seed-voxel)");
}

// Bundled preset files take precedence; the compiled-in sets cover a moved install.
TrackerConfig base_preset(const std::string& name) {
    TrackerConfig builtin;
    if (name == "mod-mht")
        builtin = modified_mht_preset();
    else if (name == "org-mht")
        builtin = original_mht_preset();
    else
        throw InvalidArgument("unknown preset '" + name + "' (mod-mht | org-mht)");
    const fs::path file = fs::path(MHT_PRESET_DIR) / (name + ".preset");
    if (fs::exists(file)) return load_tracker_config(file, TrackerConfig{});
    return builtin;
}

fs::path manifest_path_for(const fs::path& out_file) {
    fs::path p = out_file;
    p.replace_extension(".manifest.json");
    return p;
}

std::string fmt_mm(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

// Runs `body`, mapping library errors to exit codes.
template <typename F>
int guarded(const char* what, F&& body) {
    try {
        return body();
    } catch (const SeedFitFailed& e) {
        std::cerr << what << ": seed fit failed: " << e.what() << '\n';
        return kSeedFailed;
    } catch (const SeedPredicateFailed& e) {
        std::cerr << what << ": seed rejected: " << e.what() << '\n';
        return kSeedFailed;
    } catch (const ParseError& e) {
        std::cerr << what << ": " << e.what() << '\n';
        return kInputError;
    } catch (const IoError& e) {
        std::cerr << what << ": " << e.what() << '\n';
        return kInputError;
    } catch (const InvalidArgument& e) {
        std::cerr << what << ": " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << what << ": " << e.what() << '\n';
        return kRuntimeError;
    }
}

}  // namespace

int cmd_phantom(const PhantomArgs& a, const std::vector<std::string>& argv) {
    return guarded("phantom", [&] {
        const auto t0 = Clock::now();
        Manifest m("phantom", argv);
        PhantomSpec spec;
        if (a.spec) {
            spec = phantom_spec_from_json(read_json(*a.spec));
            m.j["inputs"]["spec"] = a.spec->string();
        }
        ensure_dir(a.out);
        const Phantom ph = generate_phantom(spec);
        const double gen_ms = ms_since(t0);

        save_volume(ph.volume, a.out / "volume.mhd");
        write_centerlines_csv(ph.truth.centerlines, a.out / "truth.csv");
        write_json(to_json(spec), a.out / "spec.json");
        json truth;
        truth["bifurcation_points"] = json::array();
        for (const auto& p : ph.truth.bifurcation_points) truth["bifurcation_points"].push_back(vec_json(p));
        truth["analytic_tube_volume_mm3"] = ph.truth.analytic_tube_volume;
        truth["root"] = vec_json(spec.root_point());
        truth["root_direction"] = vec_json(spec.root_direction.normalized());
        truth["branches"] = ph.truth.centerlines.chains.size();
        write_json(truth, a.out / "truth.json");

        m.j["config"] = to_json(spec);
        m.j["rng_seeds"] = {{"noise", spec.rng_seed}};
        m.j["outputs"] = {{"volume", (a.out / "volume.mhd").string()},
                          {"truth_centerlines", (a.out / "truth.csv").string()},
                          {"truth", (a.out / "truth.json").string()},
                          {"spec", (a.out / "spec.json").string()}};
        m.j["timings_ms"] = {{"generate", gen_ms}, {"total", ms_since(t0)}};
        m.write(a.out / "manifest.json");
        std::cout << "phantom: " << ph.truth.centerlines.chains.size() << " branches -> " << a.out.string() << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_track(const TrackArgs& a, const std::vector<std::string>& argv) {
    return guarded("track", [&] {
        const auto t0 = Clock::now();
        Manifest m("track", argv);
        TrackerConfig cfg = base_preset(a.preset);
        if (a.config) cfg = load_tracker_config(*a.config, cfg);
        cfg.validate();
        if (a.workers < 1) throw InvalidArgument("--workers must be >= 1");

        const Volume3D vol = load_volume(a.volume);
        const double load_ms = ms_since(t0);
        const WorldPoint seed = resolve_seed(a.seed, vol);
        ensure_dir(a.out);

        const auto t1 = Clock::now();
        TrackOptions opts;
        opts.workers = a.workers;
        opts.dump_trees = a.dump_tree;
        const TrackedTree tree = track_tree(vol, seed, a.seed_dir, cfg, opts);
        const double track_ms = ms_since(t1);

        write_centerlines_csv(extract_centerlines(tree), a.out / "centerlines.csv");
        write_json(to_json(tree), a.out / "tree.json");
        m.j["outputs"] = {{"centerlines", (a.out / "centerlines.csv").string()},
                          {"tree", (a.out / "tree.json").string()}};
        if (a.dump_tree) {
            json dump = json::array();
            for (const auto& b : tree.branches)
                dump.push_back({{"branch_id", b.id}, {"at_start", b.tree_at_start}, {"at_end", b.tree_at_end}});
            write_json(dump, a.out / "hypothesis_trees.json");
            m.j["outputs"]["hypothesis_trees"] = (a.out / "hypothesis_trees.json").string();
        }

        m.j["label"] = a.label.value_or(a.preset);
        m.j["inputs"] = {{"volume", a.volume.string()}};
        if (a.config) m.j["inputs"]["config"] = a.config->string();
        m.j["preset"] = a.preset;
        m.j["config"] = to_json(cfg);
        m.j["config_text"] = to_config_text(cfg);
        m.j["seed_mm"] = vec_json(seed);
        m.j["seed_direction"] = a.seed_dir ? vec_json(*a.seed_dir) : json(nullptr);
        m.j["workers"] = a.workers;
        m.j["rng_seeds"] = json::object();  // tracking draws no random numbers
        m.j["timings_ms"] = {{"load", load_ms}, {"track", track_ms}, {"total", ms_since(t0)}};
        m.write(a.out / "manifest.json");

        std::map<std::string, int> reasons;
        for (const auto& b : tree.branches) ++reasons[to_string(b.termination_reason)];
        std::cout << "track: " << tree.branches.size() << " branches";
        for (const auto& [r, n] : reasons) std::cout << ", " << r << " " << n;
        std::cout << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_rg(const RgArgs& a, const std::vector<std::string>& argv) {
    return guarded("rg", [&] {
        const auto t0 = Clock::now();
        Manifest m("rg", argv);
        const Polarity pol = parse_polarity(a.polarity);
        const Volume3D vol = load_volume(a.volume);
        const WorldPoint seed_mm = resolve_seed(a.seed, vol);
        const Index3 seed = vol.nearest_voxel(seed_mm);
        ensure_dir(a.out);

        const auto t1 = Clock::now();
        const RegionGrowResult region = region_grow(vol, seed, a.threshold, pol, a.leak_ceiling);
        const double grow_ms = ms_since(t1);
        const CenterlineSet lines = mask_centerlines(region, seed, a.shell_width);

        save_volume(region.to_volume(), a.out / "mask.mhd", ElementType::UChar);
        write_centerlines_csv(lines, a.out / "centerlines.csv");

        m.j["label"] = a.label.value_or("rg-" + to_string(pol));
        m.j["inputs"] = {{"volume", a.volume.string()}};
        m.j["config"] = {{"threshold", a.threshold},
                         {"polarity", to_string(pol)},
                         {"shell_width", a.shell_width},
                         {"leak_ceiling", a.leak_ceiling ? json(*a.leak_ceiling) : json(nullptr)}};
        m.j["seed_mm"] = vec_json(seed_mm);
        m.j["seed_voxel"] = {seed[0], seed[1], seed[2]};
        m.j["result"] = {{"voxel_count", region.voxel_count}, {"leaked", region.leaked}};
        m.j["rng_seeds"] = json::object();
        m.j["outputs"] = {{"mask", (a.out / "mask.mhd").string()}, {"centerlines", (a.out / "centerlines.csv").string()}};
        m.j["timings_ms"] = {{"grow", grow_ms}, {"total", ms_since(t0)}};
        m.write(a.out / "manifest.json");
        std::cout << "rg: " << region.voxel_count << " voxels" << (region.leaked ? " (leaked)" : "") << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
    return guarded("eval", [&] {
        const auto t0 = Clock::now();
        Manifest m("eval", argv);
        if (a.spacing < 0.0) throw InvalidArgument("--spacing must be >= 0");
        CenterlineSet op = read_centerlines_csv(a.op);
        CenterlineSet ref = read_centerlines_csv(a.ref);
        if (a.spacing > 0.0) {
            op = densify(op, a.spacing);
            ref = densify(ref, a.spacing);
        }
        const ErrorReport rep = centerline_distance(op, ref, a.w, a.match_tolerance);
        json j = to_json(rep);
        j["densify_spacing"] = a.spacing;
        j["matched_reference_branches"] = rep.matched_reference_branches();
        j["reference_branches"] = rep.ref_branches.size();
        if (a.out.has_parent_path()) ensure_dir(a.out.parent_path());
        write_json(j, a.out);

        m.j["inputs"] = {{"op", a.op.string()}, {"ref", a.ref.string()}};
        m.j["config"] = {{"w", a.w}, {"densify_spacing", a.spacing}, {"match_tolerance", a.match_tolerance}};
        m.j["rng_seeds"] = json::object();
        m.j["outputs"] = {{"report", a.out.string()}};
        m.j["timings_ms"] = {{"total", ms_since(t0)}};
        m.write(manifest_path_for(a.out));

        std::ostringstream os;
        os << std::setprecision(17) << rep.d_err;
        std::cout << os.str() << '\n';
        return static_cast<int>(kOk);
    });
}

int cmd_compare(const CompareArgs& a, const std::vector<std::string>& argv) {
    return guarded("compare", [&] {
        const auto t0 = Clock::now();
        Manifest m("compare", argv);
        if (a.runs.size() < 2) throw InvalidArgument("compare needs at least two run directories");

        // case -> method -> d_err. The case is the directory holding the input
        // volume, the method is the run label.
        std::map<std::string, std::map<std::string, double>> table;
        std::vector<std::string> methods;
        for (const auto& run : a.runs) {
            const fs::path report = run / "report.json";
            if (!fs::exists(report)) throw IoError("missing report " + report.string());
            const json man = read_json(run / "manifest.json");
            const json rep = read_json(report);
            const std::string method = man.value("label", run.filename().string());
            std::string case_name = run.parent_path().filename().string();
            if (man.contains("inputs") && man["inputs"].contains("volume"))
                case_name = fs::path(man["inputs"]["volume"].get<std::string>()).parent_path().filename().string();
            if (std::find(methods.begin(), methods.end(), method) == methods.end()) methods.push_back(method);
            if (table[case_name].count(method)) throw InvalidArgument("duplicate run for " + case_name + " / " + method);
            table[case_name][method] = rep.at("d_err").get<double>();
        }
        std::sort(methods.begin(), methods.end());

        std::ostringstream csv, md;
        csv << "case";
        md << "| case |";
        for (const auto& me : methods) {
            csv << ',' << me;
            md << ' ' << me << " |";
        }
        csv << '\n';
        md << "\n|---|";
        for (std::size_t i = 0; i < methods.size(); ++i) md << "---|";
        md << '\n';
        std::map<std::string, std::vector<double>> per_method;
        for (const auto& [c, row] : table) {
            csv << c;
            md << "| " << c << " |";
            for (const auto& me : methods) {
                const auto it = row.find(me);
                if (it == row.end()) {
                    csv << ',';
                    md << " - |";
                    continue;
                }
                per_method[me].push_back(it->second);
                csv << ',' << std::setprecision(17) << it->second;
                md << ' ' << fmt_mm(it->second) << " |";
            }
            csv << '\n';
            md << '\n';
        }
        md << "| **median** |";
        json medians = json::object();
        for (const auto& me : methods) {
            auto v = per_method[me];
            std::sort(v.begin(), v.end());
            const double med = v.empty() ? 0.0 : (v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]));
            medians[me] = med;
            md << ' ' << fmt_mm(med) << " |";
        }
        md << '\n';

        if (a.out.has_parent_path()) ensure_dir(a.out.parent_path());
        {
            std::ofstream os(a.out);
            if (!os) throw IoError("cannot write " + a.out.string());
            os << csv.str();
        }
        fs::path md_path = a.out;
        md_path.replace_extension(".md");
        {
            std::ofstream os(md_path);
            if (!os) throw IoError("cannot write " + md_path.string());
            os << md.str();
        }
        m.j["inputs"]["runs"] = json::array();
        for (const auto& r : a.runs) m.j["inputs"]["runs"].push_back(r.string());
        m.j["rng_seeds"] = json::object();
        m.j["medians"] = medians;
        m.j["outputs"] = {{"csv", a.out.string()}, {"markdown", md_path.string()}};
        m.j["timings_ms"] = {{"total", ms_since(t0)}};
        m.write(manifest_path_for(a.out));
        std::cout << md.str();
        return static_cast<int>(kOk);
    });
}

}  // namespace mht::cli
