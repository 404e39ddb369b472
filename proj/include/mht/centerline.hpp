#pragma once

#include "mht/geometry.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace mht {

/// One ordered point chain. `radii` is either empty or parallel to `points`.
struct Centerline {
    int branch_id = 0;
    std::vector<WorldPoint> points;
    std::vector<double> radii;

    bool has_radii() const { return !radii.empty(); }
};

struct CenterlineSet {
    std::vector<Centerline> chains;

    std::size_t point_count() const;
    std::vector<WorldPoint> all_points() const;
    /// Throws InvalidArgument on empty chains, mismatched radii or non-finite
    /// coordinates.
    void validate() const;
};

/// CSV with header `branch_id,point_index,x_mm,y_mm,z_mm,radius_mm`. A missing
/// radius is written as an empty field. Numbers use the shortest round-trip
/// representation so output is byte-stable.
void write_centerlines_csv(const CenterlineSet& set, std::ostream& os);
void write_centerlines_csv(const CenterlineSet& set, const std::filesystem::path& path);

/// Rows are grouped by branch_id in order of first appearance and sorted by
/// point_index within a branch. Throws ParseError or IoError.
CenterlineSet read_centerlines_csv(std::istream& is);
CenterlineSet read_centerlines_csv(const std::filesystem::path& path);

}  // namespace mht
