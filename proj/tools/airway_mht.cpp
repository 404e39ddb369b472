// airway_mht: phantom generation, tracking, region-growing baselines and
// centerline evaluation from the command line.

#include "commands.hpp"

#include "CLI11.hpp"

#include <array>
#include <string>
#include <vector>

namespace {

using namespace mht::cli;

void add_seed_options(CLI::App* sub, SeedArg& seed, std::array<double, 3>& world, std::vector<int>& voxel) {
    auto* w = sub->add_option("--seed", world, "Seed point in world mm (x y z)")->expected(3);
    auto* v = sub->add_option("--seed-voxel", voxel, "Seed as voxel index (i j k), converted to mm")->expected(3);
    w->excludes(v);
    (void)seed;
}

void finish_seed(SeedArg& seed, const CLI::App* sub, const std::array<double, 3>& world, const std::vector<int>& voxel) {
    if (sub->count("--seed")) seed.world = mht::Vec3(world[0], world[1], world[2]);
    if (sub->count("--seed-voxel")) seed.voxel = voxel;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Airway tree extraction by multiple hypothesis tracking"};
    app.require_subcommand(1);
    const std::vector<std::string> args(argv, argv + argc);

    PhantomArgs pa;
    auto* phantom = app.add_subcommand("phantom", "Generate a synthetic tube-tree volume with ground truth");
    phantom->add_option("--spec", pa.spec, "Phantom spec JSON (defaults when omitted)")->check(CLI::ExistingFile);
    phantom->add_option("--out", pa.out, "Output directory")->required();

    TrackArgs ta;
    std::array<double, 3> t_seed{};
    std::vector<int> t_seed_voxel;
    std::array<double, 3> t_dir{};
    auto* track = app.add_subcommand("track", "Track a tree from one seed");
    track->add_option("--volume", ta.volume, "Input MetaImage (.mhd/.mha)")->required()->check(CLI::ExistingFile);
    track->add_option("--preset", ta.preset, "Base parameter set: mod-mht | org-mht")
        ->check(CLI::IsMember({"mod-mht", "org-mht"}));
    track->add_option("--config", ta.config, "key = value overrides on top of the preset")->check(CLI::ExistingFile);
    add_seed_options(track, ta.seed, t_seed, t_seed_voxel);
    track->add_option("--seed-dir", t_dir, "Initial direction (x y z); probes the axes when omitted")->expected(3);
    track->add_option("--out", ta.out, "Output directory")->required();
    track->add_option("--workers", ta.workers, "Branches tracked in parallel within a generation")
        ->check(CLI::PositiveNumber);
    track->add_flag("--dump-tree", ta.dump_tree, "Write hypothesis trees at the start and end of every branch");
    track->add_option("--label", ta.label, "Method name used by compare (default: preset name)");

    RgArgs ra;
    std::array<double, 3> r_seed{};
    std::vector<int> r_seed_voxel;
    auto* rg = app.add_subcommand("rg", "Region-growing baseline");
    rg->add_option("--volume", ra.volume, "Input MetaImage")->required()->check(CLI::ExistingFile);
    rg->add_option("--threshold", ra.threshold, "Intensity or probability threshold")->required();
    rg->add_option("--polarity", ra.polarity, "below | above")->check(CLI::IsMember({"below", "above"}));
    add_seed_options(rg, ra.seed, r_seed, r_seed_voxel);
    rg->add_option("--out", ra.out, "Output directory")->required();
    rg->add_option("--leak-ceiling", ra.leak_ceiling, "Voxel count above which the result is flagged as leaked");
    rg->add_option("--shell-width", ra.shell_width, "Geodesic shell thickness for mask centerlines, voxels")
        ->check(CLI::PositiveNumber);
    rg->add_option("--label", ra.label, "Method name used by compare (default: rg-<polarity>)");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Centerline distance between an output and a reference");
    eval->add_option("--op", ea.op, "Output centerline CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--ref", ea.ref, "Reference centerline CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--w", ea.w, "Weight of the false-positive term")->check(CLI::Range(0.0, 1.0));
    eval->add_option("--spacing", ea.spacing, "Resample both sets to this spacing in mm first (0 = off)");
    eval->add_option("--match-tolerance", ea.match_tolerance, "Distance for per-branch match fractions, mm");
    eval->add_option("--out", ea.out, "Report JSON path")->required();

    CompareArgs ca;
    auto* compare = app.add_subcommand("compare", "Table of d_err per method and case");
    compare->add_option("runs", ca.runs, "Run directories holding manifest.json and report.json")
        ->required()
        ->check(CLI::ExistingDirectory);
    compare->add_option("--out", ca.out, "Output CSV; a Markdown table is written next to it")->required();

    CLI11_PARSE(app, argc, argv);

    if (*phantom) return cmd_phantom(pa, args);
    if (*track) {
        finish_seed(ta.seed, track, t_seed, t_seed_voxel);
        if (track->count("--seed-dir")) ta.seed_dir = mht::Vec3(t_dir[0], t_dir[1], t_dir[2]);
        return cmd_track(ta, args);
    }
    if (*rg) {
        finish_seed(ra.seed, rg, r_seed, r_seed_voxel);
        return cmd_rg(ra, args);
    }
    if (*eval) return cmd_eval(ea, args);
    if (*compare) return cmd_compare(ca, args);
    return kUsage;
}
