#pragma once

#include "mht/baseline.hpp"
#include "mht/geometry.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mht::cli {

namespace fs = std::filesystem;

/// Exit codes shared by all subcommands.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kInputError = 2,
    kSeedFailed = 3,
    kRuntimeError = 4,
};

/// A seed in world mm, or a voxel index converted once the volume is loaded.
struct SeedArg {
    std::optional<Vec3> world;
    std::optional<std::vector<int>> voxel;
};

struct PhantomArgs {
    std::optional<fs::path> spec;
    fs::path out;
};

struct TrackArgs {
    fs::path volume;
    std::string preset = "mod-mht";
    std::optional<fs::path> config;
    SeedArg seed;
    std::optional<Vec3> seed_dir;
    fs::path out;
    int workers = 1;
    bool dump_tree = false;
    std::optional<std::string> label;
};

struct RgArgs {
    fs::path volume;
    double threshold = 0.5;
    std::string polarity = "above";
    SeedArg seed;
    fs::path out;
    std::optional<std::size_t> leak_ceiling;
    int shell_width = 2;
    std::optional<std::string> label;
};

struct EvalArgs {
    fs::path op;
    fs::path ref;
    double w = 0.5;
    double spacing = 0.5;  ///< densification before comparison; 0 disables
    double match_tolerance = 1.5;
    fs::path out;
};

struct CompareArgs {
    std::vector<fs::path> runs;
    fs::path out;
};

int cmd_phantom(const PhantomArgs& a, const std::vector<std::string>& argv);
int cmd_track(const TrackArgs& a, const std::vector<std::string>& argv);
int cmd_rg(const RgArgs& a, const std::vector<std::string>& argv);
int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv);
int cmd_compare(const CompareArgs& a, const std::vector<std::string>& argv);

}  // namespace mht::cli
