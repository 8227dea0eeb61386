#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <numbers>

#include <Eigen/Geometry>

#include "geminet/error.hpp"
#include "geminet/geometry.hpp"

using namespace geminet;

namespace {

double dist(const Geometry& g, std::size_t i, std::size_t j) { return (g.positions[i] - g.positions[j]).norm(); }

std::vector<double> sorted_distances_from_center(const Geometry& g) {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto& p : g.positions) c += p;
    c /= static_cast<double>(g.size());
    std::vector<double> r;
    for (const auto& p : g.positions) r.push_back((p - c).norm());
    std::sort(r.begin(), r.end());
    return r;
}

}  // namespace

TEST_CASE("default grids reproduce the reference dataset sizes") {
    CHECK(generate_default(2).size() == 156);
    CHECK(generate_default(4).size() == 865);
    CHECK(generate_default(6).size() == 1386);
    CHECK(generate_default(8).size() == 362);
    CHECK(generate_default(10).size() == 150);
}

TEST_CASE("fine H6 grid has 61408 structures") {
    std::size_t n = 0;
    for (const auto& f : families_for(6)) n += default_grid(6, f, GridScale::fine).size();
    CHECK(n == 61408);
}

TEST_CASE("H2 placement") {
    const auto g = gen_h2({1.0, 2.0, 2});
    REQUIRE(g.size() == 2);
    CHECK(g[0].positions[0].norm() == doctest::Approx(0.0));
    CHECK(dist(g[0], 0, 1) == doctest::Approx(1.0));
    for (const auto& x : gen_h2({0.2, 8.0, 156})) CHECK(x.min_distance() >= 0.2 - 1e-12);
}

TEST_CASE("H4 linear chain at r = 1") {
    const auto g = gen_h4(H4Family::linear, {{1.0, 2.0, 2}, std::nullopt});
    for (int i = 0; i < 4; ++i) CHECK(g[0].positions[i].z() == doctest::Approx(static_cast<double>(i)));
}

TEST_CASE("tetrahedral inversion 0 is planar") {
    const auto grid = default_grid(4, "tetrahedral");
    FamilyGrid g = grid;
    g.primary = {grid.primary.start, grid.primary.stop, 2};
    g.secondary = GridSpec{0.0, 1.0, 2};
    const auto geoms = generate(4, "tetrahedral", g);
    const auto& flat = geoms.front();
    REQUIRE(flat.params.at("inversion") == doctest::Approx(0.0));
    // Four points are coplanar when the triple product of edge vectors vanishes.
    const auto& p = flat.positions;
    CHECK((p[1] - p[0]).cross(p[2] - p[0]).dot(p[3] - p[0]) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("hexagon twist of 30 degrees is a regular hexagon") {
    const auto g = gen_h6(H6Family::hexagon_twist, {{2.0, 3.0, 2}, GridSpec{0.0, 30.0, 2}}).at(1);
    REQUIRE(g.params.at("twist_deg") == doctest::Approx(30.0));
    const auto r = sorted_distances_from_center(g);
    CHECK(r.front() == doctest::Approx(r.back()).epsilon(1e-12));
    // Equal nearest-neighbor spacing: every atom's closest neighbor is at the same distance.
    std::vector<double> nn;
    for (std::size_t i = 0; i < 6; ++i) {
        double m = INFINITY;
        for (std::size_t j = 0; j < 6; ++j)
            if (i != j) m = std::min(m, dist(g, i, j));
        nn.push_back(m);
    }
    for (double d : nn) CHECK(d == doctest::Approx(nn[0]).epsilon(1e-12));
}

TEST_CASE("octagon twist of 45 degrees is a regular octagon") {
    auto grid = default_grid(8, "octagon_twist");
    const auto all = generate(8, "octagon_twist", grid);
    bool found = false;
    for (const auto& g : all) {
        if (std::abs(g.params.at("twist_deg") - 45.0) > 1e-9) continue;
        found = true;
        const auto r = sorted_distances_from_center(g);
        CHECK(r.front() == doctest::Approx(r.back()).epsilon(1e-12));
        double zmin = INFINITY, zmax = -INFINITY;
        for (const auto& p : g.positions) zmin = std::min(zmin, p.z()), zmax = std::max(zmax, p.z());
        CHECK(zmax - zmin == doctest::Approx(0.0));
    }
    CHECK(found);
}

TEST_CASE("H8 chain spacing and H10 chain length") {
    const auto g8 = gen_h8(H8Family::chain, {{1.0, 2.0, 2}, std::nullopt}).front();
    for (int i = 0; i + 1 < 8; ++i) CHECK(dist(g8, i, i + 1) == doctest::Approx(1.0));
    const auto g10 = gen_h10_chain({0.5, 2.0, 4});
    CHECK(dist(g10.back(), 0, 9) == doctest::Approx(18.0));
    CHECK(g10.front().min_distance() == doctest::Approx(0.5));
}

TEST_CASE("gen_chain builds n equally spaced atoms") {
    const auto g = gen_chain(6, {0.5, 8.0, 76});
    CHECK(g.size() == 76);
    CHECK(g.front().size() == 6);
    CHECK(g.back().params.at("r") == doctest::Approx(8.0));
}

TEST_CASE("every default geometry passes the invariants") {
    for (int n : {2, 4, 6, 8, 10})
        for (const auto& g : generate_default(n)) CHECK_NOTHROW(g.validate(true));
}

TEST_CASE("invariant violations") {
    CHECK_THROWS_AS(make_hydrogen_cluster({{0, 0, 0}, {0, 0, 0.01}}, "x"), InputError);
    CHECK_THROWS_AS(make_hydrogen_cluster({}, "x"), InputError);
    CHECK_THROWS_AS(make_hydrogen_cluster({{0, 0, NAN}, {0, 0, 1}}, "x"), InputError);
    CHECK_THROWS_AS(gen_h2({1.0, 0.5, 3}), InputError);
    CHECK_THROWS_AS(generate(4, "bogus", {{1, 2, 2}, std::nullopt}), InputError);
    CHECK_THROWS_AS(parse_system("x7"), InputError);
    CHECK(parse_system("H10") == 10);
}

TEST_CASE("xyz round trip and malformed input") {
    const auto g = gen_h4(H4Family::paldus, default_grid(4, "paldus")).at(13);
    const auto back = parse_xyz(format_xyz(g));
    REQUIRE(back.size() == g.size());
    for (std::size_t i = 0; i < g.size(); ++i) CHECK((back.positions[i] - g.positions[i]).norm() == 0.0);
    CHECK(back.family_tag == g.family_tag);

    const auto text = format_xyz(gen_h2({1.0, 2.0, 2}).front());
    CHECK(text.substr(0, 2) == "2\n");

    CHECK_THROWS_AS(parse_xyz("2\ncomment\nH 0 0 0\nH 0 0 1\nH 0 0 2\n"), ParseError);
    CHECK_THROWS_AS(parse_xyz("2\ncomment\nH 0 0 0\n"), ParseError);
    CHECK_THROWS_AS(parse_xyz("2\ncomment\nH 0 0 zero\nH 0 0 1\n"), ParseError);

    const auto path = std::filesystem::temp_directory_path() / "geminet_unit_geom.xyz";
    write_xyz(g, path);
    const auto disk = read_xyz(path);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK((disk.positions[i] - g.positions[i]).norm() == 0.0);
    std::filesystem::remove(path);
}
