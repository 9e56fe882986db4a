#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "torusgw/geometry.hpp"

using namespace torusgw;

TEST_CASE("make_geometry sets hbar from the lengths and N", "[geometry]") {
    CHECK(make_geometry(8).hbar == Catch::Approx(pi / 4).epsilon(1e-15));
    for (int N : {2, 3, 16, 137, 1024})
        CHECK(make_geometry(N).hbar == Catch::Approx(2 * pi / N).epsilon(1e-15));
    CHECK(make_geometry(100, 1.0, 1.0).hbar == Catch::Approx(1 / (200 * pi)).epsilon(1e-15));
}

TEST_CASE("make_geometry rejects bad input", "[geometry]") {
    CHECK_THROWS_AS(make_geometry(1), Error);
    CHECK_THROWS_AS(make_geometry(0), Error);
    CHECK_THROWS_AS(make_geometry(8, -2.0, 2.0), Error);
    CHECK_THROWS_AS(make_geometry(8, 2.0, 0.0), Error);
    try {
        make_geometry(1);
    } catch (const Error& e) {
        CHECK(e.kind() == "invalid-geometry");
    }
}

TEST_CASE("2 pi N hbar reproduces ell_x ell_xi", "[geometry]") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> len(0.1, 20.0);
    std::uniform_int_distribution<int> dim(2, 2048);
    for (int i = 0; i < 200; ++i) {
        const auto g = make_geometry(dim(rng), len(rng), len(rng));
        const double lhs = 2 * pi * g.N * g.hbar, rhs = g.ell_x * g.ell_xi;
        CHECK(std::abs(lhs - rhs) <= 4 * std::abs(rhs) * 1.1e-16);
    }
}

TEST_CASE("grid_points lie on n ell_x / N", "[geometry]") {
    const auto x4 = grid_points(make_geometry(4));
    REQUIRE(x4.size() == 4);
    CHECK(x4[0] == 0.0);
    CHECK(x4[1] == Catch::Approx(pi / 2).epsilon(1e-15));
    CHECK(x4[2] == Catch::Approx(pi).epsilon(1e-15));
    CHECK(x4[3] == Catch::Approx(3 * pi / 2).epsilon(1e-15));

    const auto x2 = grid_points(make_geometry(2, 1.0, 1.0));
    CHECK(x2 == std::vector<double>{0.0, 0.5});
    const auto x3 = grid_points(make_geometry(3, 3.0, 3.0));
    CHECK(x3 == std::vector<double>{0.0, 1.0, 2.0});

    const auto g = make_geometry(97, 5.5, 1.25);
    const auto x = grid_points(g);
    for (size_t i = 1; i < x.size(); ++i)
        CHECK(x[i] - x[i - 1] == Catch::Approx(g.ell_x / g.N).epsilon(1e-13));
    CHECK(x.back() < g.ell_x);
}

TEST_CASE("wrap reduces into [0, period)", "[geometry]") {
    CHECK(wrap(7.0, 2 * pi) == Catch::Approx(7.0 - 2 * pi).epsilon(1e-14));
    CHECK(wrap(-0.5, 2.0) == Catch::Approx(1.5).epsilon(1e-15));
    CHECK(wrap(4.0, 2.0) == 0.0);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> v(-50.0, 50.0), p(0.1, 10.0);
    for (int i = 0; i < 500; ++i) {
        const double period = p(rng), w = wrap(v(rng), period);
        CHECK(w >= 0.0);
        CHECK(w < period);
        CHECK(wrap(w, period) == w);
    }
}

TEST_CASE("unwrap_step follows trajectories across the seam", "[geometry]") {
    const auto g = make_geometry(16);

    auto p = make_lifted(6.2, 0.1, g);
    auto q = unwrap_step(p, 0.05, 0.05, g);
    CHECK(q.wind_x == 1);
    CHECK(q.wind_xi == 0);
    CHECK(q.x == Catch::Approx(0.05 + 2 * pi).epsilon(1e-14));
    CHECK(q.xi == Catch::Approx(0.05).epsilon(1e-15));

    // an over-long step cannot be lifted unambiguously
    auto r = make_lifted(0.1, 0.0, g);
    CHECK_THROWS_AS(unwrap_step(r, 3.2, 0.0, g), Error);

    // projection returns the input point (up to a couple of ulps)
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto walk = make_lifted(u(rng) * g.ell_x, u(rng) * g.ell_xi, g);
    for (int i = 0; i < 2000; ++i) {
        const double nx = wrap(project_x(walk, g) + (u(rng) - 0.5) * 0.8, g.ell_x);
        const double nxi = wrap(project_xi(walk, g) + (u(rng) - 0.5) * 0.8, g.ell_xi);
        walk = unwrap_step(walk, nx, nxi, g);
        CHECK(std::abs(project_x(walk, g) - nx) <= 4 * 2.3e-16 * std::max(std::abs(walk.x), g.ell_x));
        CHECK(std::abs(project_xi(walk, g) - nxi) <= 4 * 2.3e-16 * std::max(std::abs(walk.xi), g.ell_xi));
    }
}
