#include "mht/centerline.hpp"

#include "mht/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace mht {

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string trim(std::string s) {
    const auto notspace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    return s;
}

template <class T>
T parse_number(const std::string& field, std::size_t line_no) {
    T value{};
    const char* first = field.data();
    const char* last = first + field.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
        throw ParseError("centerline csv line " + std::to_string(line_no) + ": bad number '" + field + "'");
    return value;
}

}  // namespace

std::size_t CenterlineSet::point_count() const {
    std::size_t n = 0;
    for (const auto& c : chains) n += c.points.size();
    return n;
}

std::vector<WorldPoint> CenterlineSet::all_points() const {
    std::vector<WorldPoint> out;
    out.reserve(point_count());
    for (const auto& c : chains) out.insert(out.end(), c.points.begin(), c.points.end());
    return out;
}

void CenterlineSet::validate() const {
    for (const auto& c : chains) {
        if (c.points.empty()) throw InvalidArgument("centerline chain " + std::to_string(c.branch_id) + " is empty");
        if (c.has_radii() && c.radii.size() != c.points.size())
            throw InvalidArgument("centerline chain " + std::to_string(c.branch_id) + " has mismatched radii");
        for (const auto& p : c.points)
            if (!p.allFinite()) throw InvalidArgument("non-finite centerline coordinate");
    }
}

void write_centerlines_csv(const CenterlineSet& set, std::ostream& os) {
    os << "branch_id,point_index,x_mm,y_mm,z_mm,radius_mm\n";
    for (const auto& c : set.chains) {
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            const auto& p = c.points[i];
            os << c.branch_id << ',' << i << ',' << format_double(p.x()) << ',' << format_double(p.y()) << ','
               << format_double(p.z()) << ',';
            if (c.has_radii() && std::isfinite(c.radii[i])) os << format_double(c.radii[i]);
            os << '\n';
        }
    }
}

void write_centerlines_csv(const CenterlineSet& set, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_centerlines_csv(set, os);
    if (!os) throw IoError("failed writing " + path.string());
}

CenterlineSet read_centerlines_csv(std::istream& is) {
    struct Row {
        std::size_t index;
        WorldPoint p;
        double radius;
    };
    std::vector<int> order;
    std::map<int, std::vector<Row>> rows;

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (trim(line).rfind("branch_id", 0) == 0) continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(trim(f));
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (fields.size() != 6)
            throw ParseError("centerline csv line " + std::to_string(line_no) + ": expected 6 fields");
        const int id = parse_number<int>(fields[0], line_no);
        Row r;
        r.index = parse_number<std::size_t>(fields[1], line_no);
        r.p = WorldPoint(parse_number<double>(fields[2], line_no), parse_number<double>(fields[3], line_no),
                         parse_number<double>(fields[4], line_no));
        r.radius = fields[5].empty() ? std::nan("") : parse_number<double>(fields[5], line_no);
        if (!rows.count(id)) order.push_back(id);
        rows[id].push_back(r);
    }
    if (is.bad()) throw IoError("error reading centerline csv");

    CenterlineSet set;
    for (int id : order) {
        auto& rs = rows[id];
        std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.index < b.index; });
        Centerline c;
        c.branch_id = id;
        const bool any_radius = std::any_of(rs.begin(), rs.end(), [](const Row& r) { return !std::isnan(r.radius); });
        for (const auto& r : rs) {
            c.points.push_back(r.p);
            if (any_radius) c.radii.push_back(r.radius);
        }
        set.chains.push_back(std::move(c));
    }
    set.validate();
    return set;
}

CenterlineSet read_centerlines_csv(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return read_centerlines_csv(is);
}

}  // namespace mht
