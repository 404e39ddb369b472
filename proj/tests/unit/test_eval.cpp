#include "doctest.h"

#include "mht/errors.hpp"
#include "mht/eval.hpp"
#include "oracles/oracles.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace mht;

namespace {

CenterlineSet set_of(std::vector<std::vector<WorldPoint>> chains) {
    CenterlineSet s;
    int id = 0;
    for (auto& c : chains) {
        Centerline ch;
        ch.branch_id = id++;
        ch.points = std::move(c);
        s.chains.push_back(std::move(ch));
    }
    return s;
}

CenterlineSet random_set(std::mt19937_64& rng, int max_points) {
    std::uniform_int_distribution<int> nchains(1, 4), npts(1, max_points / 4);
    // Coarse lattice coordinates make exact ties common.
    std::uniform_int_distribution<int> coord(-20, 20);
    std::vector<std::vector<WorldPoint>> chains(static_cast<std::size_t>(nchains(rng)));
    for (auto& c : chains)
        for (int i = npts(rng); i > 0; --i) c.push_back(WorldPoint(coord(rng), coord(rng), coord(rng)) * 0.5);
    return set_of(chains);
}

double arc_length(const std::vector<WorldPoint>& pts) {
    double s = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) s += (pts[i] - pts[i - 1]).norm();
    return s;
}

}  // namespace

TEST_CASE("hand cases") {
    const auto a = set_of({{WorldPoint(1, 2, 3), WorldPoint(4, 5, 6)}});
    CHECK(centerline_distance(a, a).d_err == 0.0);

    const Vec3 t(3, -4, 12);  // length 13
    const auto p = set_of({{WorldPoint(1, 1, 1)}});
    const auto q = set_of({{WorldPoint(1, 1, 1) + t}});
    const ErrorReport r = centerline_distance(p, q, 0.5);
    CHECK(std::abs(r.d_err - 13.0) <= 1e-12);

    const auto op = set_of({{WorldPoint(0, 0, 0)}});
    const auto ref = set_of({{WorldPoint(0, 0, 0), WorldPoint(0, 0, 10)}});
    const ErrorReport h = centerline_distance(op, ref, 0.5);
    CHECK(h.fp_term == 0.0);
    CHECK(std::abs(h.fn_term - 5.0) <= 1e-12);
    CHECK(std::abs(h.d_err - 2.5) <= 1e-12);
    CHECK(h.n_op == 1u);
    CHECK(h.n_ref == 2u);
}

TEST_CASE("KD search equals brute force exactly") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-30, 30);
    for (int inst = 0; inst < 100; ++inst) {
        std::vector<WorldPoint> pts;
        const int n = 1 + inst * 2;
        for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
        if (inst % 3 == 0)  // exact duplicates and lattice ties
            for (int i = 0; i < n / 2; ++i) pts.push_back(WorldPoint(std::round(pts[i].x()), std::round(pts[i].y()), 0));
        const KdTree kd(pts);
        for (int qn = 0; qn < 50; ++qn) {
            const WorldPoint q(u(rng), u(rng), qn % 2 ? 0.0 : u(rng));
            CHECK(kd.nearest_distance_sq(q) == brute_force_nearest_distance_sq(pts, q));
        }
    }
    CHECK(std::isinf(KdTree({}).nearest_distance_sq(WorldPoint::Zero())));
}

TEST_CASE("terms match the exhaustive oracle and the weighting") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> uw(0, 1);
    for (int inst = 0; inst < 100; ++inst) {
        const CenterlineSet op = random_set(rng, 200);
        const CenterlineSet ref = random_set(rng, 200);
        const double w = inst == 0 ? 0.0 : inst == 1 ? 1.0 : uw(rng);
        const ErrorReport r = centerline_distance(op, ref, w);
        const auto po = op.all_points(), pr = ref.all_points();
        CHECK(r.fp_term == doctest::Approx(oracle::mean_nearest(po, pr)).epsilon(1e-12));
        CHECK(r.fn_term == doctest::Approx(oracle::mean_nearest(pr, po)).epsilon(1e-12));
        CHECK(std::abs(r.d_err - (w * r.fp_term + (1 - w) * r.fn_term)) <= 1e-12);
        CHECK(r.d_err >= 0.0);

        const ErrorReport s = centerline_distance(ref, op, w);
        CHECK(s.fp_term == r.fn_term);
        CHECK(s.fn_term == r.fp_term);
        if (inst % 2 == 0) {
            CHECK(centerline_distance(ref, op, 0.5).d_err == centerline_distance(op, ref, 0.5).d_err);
        }
    }
}

TEST_CASE("zero exactly when the sets cover each other") {
    const auto a = set_of({{WorldPoint(0, 0, 0), WorldPoint(1, 0, 0)}, {WorldPoint(1, 0, 0)}});
    const auto b = set_of({{WorldPoint(1, 0, 0), WorldPoint(0, 0, 0), WorldPoint(0, 0, 0)}});
    CHECK(centerline_distance(a, b).d_err == 0.0);
    const auto c = set_of({{WorldPoint(0, 0, 0), WorldPoint(1, 0, 1e-9)}});
    CHECK(centerline_distance(a, c).d_err > 0.0);
}

TEST_CASE("adding a reference point to the output never raises the false-positive term") {
    std::mt19937_64 rng(77);
    for (int inst = 0; inst < 50; ++inst) {
        CenterlineSet op = random_set(rng, 80);
        const CenterlineSet ref = random_set(rng, 80);
        const double before = centerline_distance(op, ref).fp_term;
        const auto pr = ref.all_points();
        op.chains.front().points.push_back(pr[static_cast<std::size_t>(inst) % pr.size()]);
        CHECK(centerline_distance(op, ref).fp_term <= before);
    }
}

TEST_CASE("per-branch rows and matching") {
    const auto ref = set_of({{WorldPoint(0, 0, 0), WorldPoint(0, 0, 1), WorldPoint(0, 0, 2), WorldPoint(0, 0, 3), WorldPoint(0, 0, 4)},
                             {WorldPoint(10, 0, 0), WorldPoint(11, 0, 0)}});
    const auto op = set_of({{WorldPoint(1, 0, 0), WorldPoint(1, 0, 1), WorldPoint(1, 0, 2), WorldPoint(1, 0, 3)}});
    const ErrorReport r = centerline_distance(op, ref, 0.5, 1.5);
    REQUIRE(r.ref_branches.size() == 2u);
    CHECK(r.ref_branches[0].fraction_within == 1.0);
    CHECK(r.ref_branches[1].fraction_within == 0.0);
    CHECK(r.matched_reference_branches() == 1);
    const auto j = to_json(r);
    CHECK(j.at("matched_reference_branches") == 1);
    CHECK(j.at("ref_branches").size() == 2u);
}

TEST_CASE("errors") {
    const auto a = set_of({{WorldPoint(0, 0, 0)}});
    CHECK_THROWS_AS(centerline_distance(CenterlineSet{}, a), EmptyCenterline);
    CHECK_THROWS_AS(centerline_distance(a, CenterlineSet{}), EmptyCenterline);
    CHECK_THROWS_AS(centerline_distance(a, a, 1.5), InvalidArgument);
    CHECK_THROWS_AS(centerline_distance(set_of({{}}), a), InvalidArgument);
}

TEST_CASE("densify") {
    Centerline c;
    c.points = {WorldPoint(0, 0, 0), WorldPoint(10, 0, 0)};
    c.radii = {1.0, 3.0};
    const Centerline d = densify_chain(c, 2.0);
    REQUIRE(d.points.size() == 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(d.points[i].x() == doctest::Approx(2.0 * i).epsilon(1e-14));
        CHECK(d.radii[i] == doctest::Approx(1.0 + 0.4 * i).epsilon(1e-14));
    }

    Centerline dense;
    dense.points = {WorldPoint(0, 0, 0), WorldPoint(0.3, 0, 0), WorldPoint(0.5, 0.1, 0)};
    const Centerline same = densify_chain(dense, 0.5);
    CHECK(same.points == dense.points);

    Centerline bent;
    bent.points = {WorldPoint(0, 0, 0), WorldPoint(3, 4, 0), WorldPoint(3, 4, 7.3)};
    const Centerline b = densify_chain(bent, 0.7);
    CHECK(b.points.front() == bent.points.front());
    CHECK(b.points.back() == bent.points.back());
    CHECK(std::abs(arc_length(b.points) - 12.3) <= 1e-9);
    for (std::size_t i = 1; i < b.points.size(); ++i) CHECK((b.points[i] - b.points[i - 1]).norm() <= 0.7 + 1e-12);
    CHECK_THROWS_AS(densify_chain(bent, 0.0), InvalidArgument);
}

TEST_CASE("centerline CSV round trip") {
    CenterlineSet s;
    Centerline a;
    a.branch_id = 4;
    a.points = {WorldPoint(0.1, 1.0 / 3.0, -2e-17), WorldPoint(1e10, 5, 6)};
    a.radii = {1.25, 2.0 / 7.0};
    Centerline b;
    b.branch_id = 1;
    b.points = {WorldPoint(7, 8, 9)};
    s.chains = {a, b};
    std::ostringstream os;
    write_centerlines_csv(s, os);
    CHECK(os.str().rfind("branch_id,point_index,x_mm,y_mm,z_mm,radius_mm\n", 0) == 0);
    std::istringstream is(os.str());
    const CenterlineSet back = read_centerlines_csv(is);
    REQUIRE(back.chains.size() == 2u);
    CHECK(back.chains[0].branch_id == 4);
    CHECK(back.chains[0].points == a.points);
    CHECK(back.chains[0].radii == a.radii);
    CHECK(back.chains[1].branch_id == 1);
    CHECK_FALSE(back.chains[1].has_radii());
    std::ostringstream again;
    write_centerlines_csv(back, again);
    CHECK(again.str() == os.str());

    std::istringstream bad("branch_id,point_index,x_mm,y_mm,z_mm,radius_mm\n0,0,1,2\n");
    CHECK_THROWS_AS(read_centerlines_csv(bad), ParseError);
    std::istringstream nan("branch_id,point_index,x_mm,y_mm,z_mm,radius_mm\n0,0,1,2,x,\n");
    CHECK_THROWS_AS(read_centerlines_csv(nan), ParseError);
}
