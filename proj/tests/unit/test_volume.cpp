#include "doctest.h"

#include "mht/errors.hpp"
#include "mht/volume.hpp"

#include <filesystem>
#include <fstream>
#include <random>

using namespace mht;
namespace fs = std::filesystem;

namespace {

Volume3D affine_field(const Index3& dims, const Vec3& spacing, const Vec3& origin, const Vec3& g, double c) {
    std::vector<double> data(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
    Volume3D probe(dims, spacing, origin, 0.0);
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) data[probe.linear_index(i, j, k)] = g.dot(probe.voxel_center(i, j, k)) + c;
    return Volume3D(dims, spacing, origin, std::move(data));
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mht_test_volume_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("constructor rejects broken invariants") {
    CHECK_THROWS_AS(Volume3D({0, 2, 2}, Vec3::Ones(), Vec3::Zero(), 0.0), InvalidArgument);
    CHECK_THROWS_AS(Volume3D({2, 2, 2}, Vec3(1, 0, 1), Vec3::Zero(), 0.0), InvalidArgument);
    CHECK_THROWS_AS(Volume3D({2, 2, 2}, Vec3::Ones(), Vec3::Zero(), std::vector<double>(7, 0.0)), InvalidArgument);
    std::vector<double> bad(8, 0.0);
    bad[3] = std::nan("");
    CHECK_THROWS_AS(Volume3D({2, 2, 2}, Vec3::Ones(), Vec3::Zero(), bad), InvalidArgument);
}

TEST_CASE("world and voxel coordinates") {
    Volume3D v({4, 5, 6}, Vec3(0.5, 1.0, 2.0), Vec3(10, 20, 30), 0.0);
    CHECK(v.world_to_voxel(Vec3(10, 20, 30)).isApprox(Vec3::Zero()));
    CHECK(v.world_to_voxel(Vec3(11, 21, 34)).isApprox(Vec3(2, 1, 2)));
    CHECK(v.voxel_to_world(Vec3(2, 1, 2)).isApprox(Vec3(11, 21, 34)));
    CHECK(v.nearest_voxel(Vec3(11.2, 21.4, 35.1)) == Index3{2, 1, 3});
    CHECK(v.contains(Vec3(11.5, 24, 40)));
    CHECK_FALSE(v.contains(Vec3(11.51, 24, 40)));
    CHECK_FALSE(v.contains(Vec3(9.99, 20, 30)));
}

TEST_CASE("trilinear sampling hits voxel values and is exact on affine fields") {
    const Vec3 g(0.3, -1.2, 2.5);
    const Volume3D v = affine_field({7, 6, 5}, Vec3(0.8, 1.1, 1.7), Vec3(-3, 2, 0.5), g, 4.0);
    CHECK(v.sample(v.voxel_center(3, 2, 1)) == doctest::Approx(v.at(3, 2, 1)).epsilon(1e-12));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 200; ++n) {
        const Vec3 c(u(rng) * 6, u(rng) * 5, u(rng) * 4);
        const WorldPoint p = v.voxel_to_world(c);
        CHECK(sample_trilinear(v, p) == doctest::Approx(g.dot(p) + 4.0).epsilon(1e-10));
    }
}

TEST_CASE("sampling outside the grid") {
    Volume3D v({3, 3, 3}, Vec3::Ones(), Vec3::Zero(), 1.0);
    CHECK_THROWS_AS(v.sample(Vec3(2.5, 1, 1)), OutOfBounds);
    double out = 0.0;
    CHECK_FALSE(v.try_sample(Vec3(-0.1, 1, 1), out));
    CHECK(v.try_sample(Vec3(2, 2, 2), out));
    CHECK(out == 1.0);
}

TEST_CASE("MetaImage round trip") {
    const fs::path dir = scratch_dir("roundtrip");
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 100.0);
    std::vector<double> data(4 * 3 * 5);
    for (auto& d : data) d = n(rng);
    const Volume3D v({4, 3, 5}, Vec3(0.7, 0.8, 1.25), Vec3(-1, 2, 3.5), data);

    SUBCASE("double is bit exact") {
        save_volume(v, dir / "a.mhd");
        const Volume3D w = load_volume(dir / "a.mhd");
        CHECK(w.dims() == v.dims());
        CHECK(w.spacing() == v.spacing());
        CHECK(w.origin() == v.origin());
        for (std::size_t i = 0; i < data.size(); ++i) CHECK(w.data()[i] == v.data()[i]);
    }
    SUBCASE("float and short convert") {
        save_volume(v, dir / "f.mhd", ElementType::Float);
        save_volume(v, dir / "s.mhd", ElementType::Short);
        const Volume3D f = load_volume(dir / "f.mhd");
        const Volume3D s = load_volume(dir / "s.mhd");
        for (std::size_t i = 0; i < data.size(); ++i) {
            CHECK(f.data()[i] == static_cast<double>(static_cast<float>(data[i])));
            CHECK(std::abs(s.data()[i] - data[i]) <= 0.5);
        }
    }
}

TEST_CASE("MetaImage header handling") {
    const fs::path dir = scratch_dir("header");
    SUBCASE("inline .mha payload with big-endian shorts") {
        std::ofstream os(dir / "x.mha", std::ios::binary);
        os << "ObjectType = Image\nNDims = 3\nDimSize = 2 1 1\nElementSpacing = 1 1 1\nOffset = 0 0 0\n"
              "ElementByteOrderMSB = True\nElementType = MET_SHORT\nElementDataFile = LOCAL\n";
        const unsigned char bytes[4] = {0x01, 0x02, 0xff, 0xfe};  // 258, -2
        os.write(reinterpret_cast<const char*>(bytes), 4);
        os.close();
        const Volume3D v = load_volume(dir / "x.mha");
        CHECK(v.at(0, 0, 0) == 258.0);
        CHECK(v.at(1, 0, 0) == -2.0);
    }
    SUBCASE("missing key") {
        std::ofstream(dir / "m.mhd") << "NDims = 3\nElementType = MET_FLOAT\nElementDataFile = m.raw\n";
        CHECK_THROWS_AS(load_volume(dir / "m.mhd"), ParseError);
    }
    SUBCASE("unsupported element type") {
        std::ofstream(dir / "u.mhd") << "NDims = 3\nDimSize = 1 1 1\nElementType = MET_ULONG\nElementDataFile = u.raw\n";
        CHECK_THROWS_AS(load_volume(dir / "u.mhd"), UnsupportedElementType);
    }
    SUBCASE("short payload") {
        std::ofstream(dir / "p.mhd") << "NDims = 3\nDimSize = 2 2 2\nElementType = MET_UCHAR\nElementDataFile = p.raw\n";
        std::ofstream(dir / "p.raw") << "abc";
        CHECK_THROWS_AS(load_volume(dir / "p.mhd"), ParseError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_volume(dir / "nope.mhd"), IoError); }
}
