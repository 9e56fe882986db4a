#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "torusgw/orbits.hpp"

using namespace torusgw;

namespace {

FourierSymbol harper_model(int N = 16) {
    return build_model(ModelKind::harper, make_geometry(N));
}

// V(x) = cos(2 pi x / ell_x); with ell_x = 2 pi this is cos(x).
FourierSymbol cosine_potential(int N = 16) {
    return build_model({ModelKind::potential_only, {{0, 1, 0.5}, {0, -1, 0.5}}},
                       make_geometry(N));
}

FourierSymbol kinetic_model(int N = 16) {
    return build_model(ModelKind::kinetic_cos, make_geometry(N));
}

double torus_dist(const LiftedPoint& a, const LiftedPoint& b, const TorusGeometry& g) {
    double dx = a.x - b.x, dxi = a.xi - b.xi;
    dx -= g.ell_x * std::round(dx / g.ell_x);
    dxi -= g.ell_xi * std::round(dxi / g.ell_xi);
    return std::hypot(dx, dxi);
}

// Area of {cos x + cos xi > E} for 0 < E < 2 via the explicit slice widths,
// independent of the contour quadrature under test.
double harper_cap_area(double E, int n) {
    const double xmax = std::acos(E - 1);
    double sum = 0; // composite Simpson for 2*acos(E - cos x) on [-xmax, xmax]
    const double h = 2 * xmax / n;
    auto f = [&](double x) { return 2 * std::acos(std::clamp(E - std::cos(x), -1.0, 1.0)); };
    for (int k = 0; k < n; ++k) {
        const double a = -xmax + k * h;
        sum += (f(a) + 4 * f(a + h / 2) + f(a + h)) * h / 6;
    }
    return sum;
}

} // namespace

TEST_CASE("gradient_scale sums coefficient frequencies", "[orbits]") {
    CHECK(gradient_scale(harper_model()) == Catch::Approx(2.0).epsilon(1e-13));
    CHECK(gradient_scale(cosine_potential()) == Catch::Approx(1.0).epsilon(1e-13));
    // kinetic_cos: a(1 - cos xi) with a = ell^2 / (2 pi^2) = 2, so |H'| <= 2
    CHECK(gradient_scale(kinetic_model()) == Catch::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("hamiltonian_flow freezes x for a pure potential", "[orbits]") {
    const auto V = cosine_potential();
    const auto traj = hamiltonian_flow(V, {0.3, 1.0}, 2.0, 1e-10);
    REQUIRE(traj.size() >= 3);
    for (const auto& p : traj) CHECK(std::abs(p.x - 0.3) < 1e-13);
    // xidot = -dH/dx = sin(0.3), constant along the trajectory
    CHECK(traj.back().xi == Catch::Approx(1.0 + 2.0 * std::sin(0.3)).epsilon(1e-9));

    // long runs wind in xi and the lift records it
    const auto far = hamiltonian_flow(V, {0.3, 1.0}, 30.0, 1e-10);
    CHECK(far.back().wind_xi == 1);
    CHECK(far.back().xi == Catch::Approx(1.0 + 30.0 * std::sin(0.3)).epsilon(1e-9));
    const auto& g = V.geometry();
    CHECK(project_xi(far.back(), g) >= 0);
    CHECK(project_xi(far.back(), g) < g.ell_xi);
}

TEST_CASE("hamiltonian_flow moves linearly for the free symbol", "[orbits]") {
    const auto T = kinetic_model();
    const auto traj = hamiltonian_flow(T, {1.0, pi / 2}, 2.0, 1e-10);
    for (const auto& p : traj) CHECK(std::abs(p.xi - pi / 2) < 1e-13);
    CHECK(traj.back().x == Catch::Approx(1.0 + 2.0 * 2.0).epsilon(1e-9));
    CHECK(traj.back().wind_x == 0);
}

TEST_CASE("hamiltonian_flow conserves the Harper energy", "[orbits]") {
    const auto H = harper_model(8);
    const auto traj = hamiltonian_flow(H, {0.5, 0.0}, 1.0, 1e-10);
    const double e0 = H.eval(0.5, 0.0);
    CHECK(std::abs(H.eval(traj.back().x, traj.back().xi) - e0) < 1e-10);

    // integrating backwards from the endpoint recovers the start
    const auto back = hamiltonian_flow(H, {traj.back().x, traj.back().xi}, -1.0, 1e-10);
    CHECK(std::abs(back.back().x - 0.5) < 1e-8);
    CHECK(std::abs(back.back().xi - 0.0) < 1e-8);
}

TEST_CASE("hamiltonian_flow validates its arguments", "[orbits]") {
    const auto H = harper_model(8);
    CHECK_THROWS_AS(hamiltonian_flow(H, {0, 0}, 1.0, 0.0), Error);
    CHECK_THROWS_AS(hamiltonian_flow(H, {0, 0}, 1.0, -1e-8), Error);
    CHECK_THROWS_AS(hamiltonian_flow(H, {0, 0}, std::numeric_limits<double>::infinity(), 1e-8),
                    Error);
    try {
        hamiltonian_flow(H, {0, 0}, 1.0, 0.0);
    } catch (const Error& e) {
        CHECK(e.kind() == "spec");
    }
    const auto still = hamiltonian_flow(H, {0.5, 0.25}, 0.0, 1e-10);
    REQUIRE(still.size() == 1);
    CHECK(still[0].x == Catch::Approx(0.5));
    CHECK(still[0].xi == Catch::Approx(0.25));
}

TEST_CASE("level_set finds the single Harper loop at E = 1", "[orbits]") {
    const auto H = harper_model();
    const auto& g = H.geometry();
    for (int R : {64, 128}) {
        const auto loops = level_set(H, 1.0, R);
        REQUIRE(loops.size() == 1);
        const auto& c = loops[0];
        CHECK(c.wind_x == 0);
        CHECK(c.wind_xi == 0);
        REQUIRE(c.points.size() >= 16);
        for (const auto& p : c.points)
            CHECK(std::abs(H.eval(p.x, p.xi) - 1.0) < 1e-11);
        // closed loop: the final lifted point returns to the start
        CHECK(torus_dist(c.points.front(), c.points.back(), g) < 1e-12);

        // the loop encircles the maximum at (0, 0) once, counterclockwise
        double total = 0, prev = 0;
        for (std::size_t k = 0; k < c.points.size(); ++k) {
            double dx = c.points[k].x, dxi = c.points[k].xi;
            dx -= g.ell_x * std::round(dx / g.ell_x);
            dxi -= g.ell_xi * std::round(dxi / g.ell_xi);
            const double th = std::atan2(dxi, dx);
            if (k > 0) {
                double d = th - prev;
                while (d > pi) d -= 2 * pi;
                while (d <= -pi) d += 2 * pi;
                total += d;
            }
            prev = th;
        }
        CHECK(total == Catch::Approx(2 * pi).epsilon(1e-6));
    }
}

TEST_CASE("level_set finds the two vertical potential loops", "[orbits]") {
    const auto V = cosine_potential();
    const auto loops = level_set(V, 0.0, 64);
    REQUIRE(loops.size() == 2);
    CHECK(loops[0].wind_x == 0);
    CHECK(loops[0].wind_xi == 1);
    CHECK(loops[1].wind_x == 0);
    CHECK(loops[1].wind_xi == -1);
    for (const auto& p : loops[0].points) CHECK(std::abs(p.x - pi / 2) < 1e-9);
    for (const auto& p : loops[1].points) CHECK(std::abs(p.x - 3 * pi / 2) < 1e-9);
}

TEST_CASE("level_set finds the two horizontal kinetic loops", "[orbits]") {
    const auto T = kinetic_model();
    const auto loops = level_set(T, 2.0, 64);
    REQUIRE(loops.size() == 2);
    CHECK(loops[0].wind_x == 1);
    CHECK(loops[0].wind_xi == 0);
    CHECK(loops[1].wind_x == -1);
    CHECK(loops[1].wind_xi == 0);
    for (const auto& p : loops[0].points) CHECK(std::abs(p.xi - pi / 2) < 1e-9);
    for (const auto& p : loops[1].points) CHECK(std::abs(p.xi - 3 * pi / 2) < 1e-9);
}

TEST_CASE("level_set rejects coarse grids and near-critical energies", "[orbits]") {
    const auto H = harper_model();
    CHECK_THROWS_AS(level_set(H, 1.0, 32), Error);
    try {
        level_set(H, 1.0, 32);
    } catch (const Error& e) {
        CHECK(e.kind() == "spec");
    }
    // E = 0 is the separatrix through the saddle points
    CHECK_THROWS_AS(level_set(H, 0.0, 64), Error);
    try {
        level_set(H, 0.0, 64);
    } catch (const Error& e) {
        CHECK(e.kind() == "near-critical");
    }
}

TEST_CASE("orbit_catalog reproduces the potential-only closed forms", "[orbits]") {
    const auto V = cosine_potential();

    // E = 0: turning-point-free rotations at x0 = pi/2 and 3 pi/2, |V'| = 1
    const auto cat = orbit_catalog(V, 0.0, 64);
    REQUIRE(cat.orbits.size() == 2);
    CHECK(cat.regular);
    const auto& up = cat.orbits[0];
    const auto& down = cat.orbits[1];
    CHECK(up.wind_xi == 1);
    CHECK(down.wind_xi == -1);
    CHECK(up.period_primitive == Catch::Approx(2 * pi).epsilon(1e-8));
    CHECK(down.period_primitive == Catch::Approx(2 * pi).epsilon(1e-8));
    CHECK(up.action_primitive == Catch::Approx(pi * pi).epsilon(1e-8));
    CHECK(down.action_primitive == Catch::Approx(-3 * pi * pi).epsilon(1e-8));
    CHECK(up.maslov == 0);
    CHECK(down.maslov == 0);
    CHECK(cat.volume == Catch::Approx(4 * pi).epsilon(1e-8));

    // E = 0.3: x0 = arccos(0.3), period 2 pi / sqrt(1 - E^2) on both branches
    const double x0 = std::acos(0.3);
    const double t = 2 * pi / std::sqrt(1 - 0.09);
    const auto cat3 = orbit_catalog(V, 0.3, 64);
    REQUIRE(cat3.orbits.size() == 2);
    CHECK(cat3.orbits[0].period_primitive == Catch::Approx(t).epsilon(1e-8));
    CHECK(cat3.orbits[1].period_primitive == Catch::Approx(t).epsilon(1e-8));
    CHECK(cat3.orbits[0].action_primitive == Catch::Approx(2 * pi * x0).epsilon(1e-8));
    CHECK(cat3.orbits[1].action_primitive ==
          Catch::Approx(-2 * pi * (2 * pi - x0)).epsilon(1e-8));
    CHECK(cat3.volume == Catch::Approx(2 * t).epsilon(1e-8));
}

TEST_CASE("orbit_catalog reproduces the kinetic closed forms", "[orbits]") {
    const auto T = kinetic_model();
    const auto cat = orbit_catalog(T, 2.0, 64);
    REQUIRE(cat.orbits.size() == 2);
    const auto& right = cat.orbits[0];
    const auto& left = cat.orbits[1];
    CHECK(right.wind_x == 1);
    CHECK(left.wind_x == -1);
    // xdot = 2 sin(xi) = 2 on both branches, so t = ell_x / 2
    CHECK(right.period_primitive == Catch::Approx(pi).epsilon(1e-8));
    CHECK(left.period_primitive == Catch::Approx(pi).epsilon(1e-8));
    CHECK(right.action_primitive == Catch::Approx(pi * pi).epsilon(1e-8));
    CHECK(left.action_primitive == Catch::Approx(-3 * pi * pi).epsilon(1e-8));
    CHECK(right.maslov == 0);
    CHECK(left.maslov == 0);
    CHECK(cat.volume == Catch::Approx(2 * pi).epsilon(1e-8));
}

TEST_CASE("orbit_catalog matches the Harper area and Maslov data", "[orbits]") {
    const auto H = harper_model();
    const auto cat = orbit_catalog(H, 1.0, 128);
    REQUIRE(cat.orbits.size() == 1);
    const auto& orb = cat.orbits[0];
    CHECK(orb.wind_x == 0);
    CHECK(orb.wind_xi == 0);
    CHECK(orb.maslov == 2);
    CHECK(cat.regular);
    CHECK(cat.min_grad_norm > 0.5);

    // counterclockwise traversal encloses {H > E}, so W = -area
    CHECK(orb.action_primitive < 0);
    const double area = harper_cap_area(1.0, 200000);
    CHECK(-orb.action_primitive == Catch::Approx(area).epsilon(1e-7));

    // coarse independent confirmation by counting midpoint cells inside
    const int M = 6000;
    const auto& g = H.geometry();
    std::vector<double> cx(M);
    for (int i = 0; i < M; ++i) cx[i] = std::cos((i + 0.5) * g.ell_x / M);
    long long inside = 0;
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            if (cx[i] + cx[j] > 1.0) ++inside;
    const double cell_area = inside * (g.ell_x / M) * (g.ell_xi / M);
    CHECK(-orb.action_primitive == Catch::Approx(cell_area).epsilon(5e-3));

    // the symmetric well at E = -1 flows clockwise with the opposite index
    const auto neg = orbit_catalog(H, -1.0, 128);
    REQUIRE(neg.orbits.size() == 1);
    CHECK(neg.orbits[0].maslov == -2);
    CHECK(neg.orbits[0].action_primitive > 0);
    CHECK(neg.orbits[0].period_primitive ==
          Catch::Approx(orb.period_primitive).epsilon(1e-8));
}

TEST_CASE("orbit samples stay on the energy surface and close up", "[orbits]") {
    const auto H = harper_model();
    const auto& g = H.geometry();
    const auto cat = orbit_catalog(H, 1.0, 96);
    REQUIRE(cat.orbits.size() == 1);
    const auto& orb = cat.orbits[0];
    for (const auto& p : orb.samples) CHECK(std::abs(H.eval(p.x, p.xi) - 1.0) < 1e-11);

    // flow for one quadrature period returns to the start point
    const auto traj = hamiltonian_flow(
        H, {orb.start_point.x, orb.start_point.xi}, orb.period_primitive, 1e-10);
    CHECK(torus_dist(traj.back(), orb.start_point, g) < 1e-6 * std::min(g.ell_x, g.ell_xi));
}

TEST_CASE("surface volume agrees with independent return times", "[orbits]") {
    const auto H = harper_model();
    const auto cat = orbit_catalog(H, 1.0, 96);
    double vol = 0;
    for (const auto& orb : cat.orbits)
        vol += return_time(H, orb.start_point, orb.period_primitive, 1e-12);
    CHECK(vol == Catch::Approx(cat.volume).epsilon(1e-6));

    const auto V = cosine_potential();
    const auto catv = orbit_catalog(V, 0.3, 64);
    double volv = 0;
    for (const auto& orb : catv.orbits)
        volv += return_time(V, orb.start_point, orb.period_primitive, 1e-12);
    CHECK(volv == Catch::Approx(catv.volume).epsilon(1e-6));
    CHECK(volv == Catch::Approx(4 * pi / std::sqrt(1 - 0.09)).epsilon(1e-6));
}

TEST_CASE("action and period do not depend on the start point", "[orbits]") {
    const auto H = harper_model();
    const auto& g = H.geometry();
    const auto loops = level_set(H, 1.0, 96);
    REQUIRE(loops.size() == 1);
    const std::size_t n = loops[0].points.size() - 1;

    std::vector<double> actions, periods;
    for (int k = 0; k < 8; ++k) {
        const auto rot = rotate_contour(loops[0], g, k * n / 8);
        CHECK(rot.wind_x == loops[0].wind_x);
        CHECK(rot.wind_xi == loops[0].wind_xi);
        const auto orb = make_orbit(H, 1.0, rot);
        CHECK(orb.maslov == 2);
        actions.push_back(orb.action_primitive);
        periods.push_back(orb.period_primitive);
    }
    const auto [amin, amax] = std::minmax_element(actions.begin(), actions.end());
    const auto [tmin, tmax] = std::minmax_element(periods.begin(), periods.end());
    CHECK((*amax - *amin) < 1e-6 * std::abs(actions[0]));
    CHECK((*tmax - *tmin) < 1e-6 * periods[0]);
}

TEST_CASE("dW/dE matches the period", "[orbits]") {
    const auto H = harper_model();
    const auto res = action_derivative_check(H, 1.0, 1e-4);
    CHECK(res.deviation < 1e-4);
    CHECK(res.dW_dE > 0); // area shrinks as E grows and W = -area
    CHECK(res.dW_dE == Catch::Approx(res.period).epsilon(1e-4));

    const auto V = cosine_potential();
    const auto resv = action_derivative_check(V, 0.3, 1e-5);
    CHECK(resv.deviation < 1e-6);
    CHECK(resv.period == Catch::Approx(2 * pi / std::sqrt(1 - 0.09)).epsilon(1e-8));

    // widening the window across the maximum changes the topology
    CHECK_THROWS_AS(action_derivative_check(H, 1.99, 0.02), Error);
    try {
        action_derivative_check(H, 1.99, 0.02);
    } catch (const Error& e) {
        CHECK(e.kind() == "topology");
    }
    CHECK_THROWS_AS(action_derivative_check(H, 1.0, 0.0), Error);
}

TEST_CASE("regular_value_check classifies Harper energies", "[orbits]") {
    const auto H = harper_model();
    const auto sep = regular_value_check(H, 0.0, 64);
    CHECK_FALSE(sep.regular);
    CHECK_FALSE(sep.empty);
    CHECK(sep.min_grad_norm < 1e-6);

    const auto reg = regular_value_check(H, 1.0, 64);
    CHECK(reg.regular);
    CHECK_FALSE(reg.empty);
    CHECK(reg.min_grad_norm > 0.5);
    CHECK(reg.min_grad_norm < 2.0);

    const auto empty = regular_value_check(H, 2.5, 64);
    CHECK(empty.empty);
    CHECK(empty.regular);
}

TEST_CASE("repetition laws scale the primitive data", "[orbits]") {
    CHECK(repeated_period(1.5, 3) == Catch::Approx(4.5));
    CHECK(repeated_action(-2.0, 4) == Catch::Approx(-8.0));
    CHECK(repeated_maslov(2, 5) == 10);
    CHECK(repeated_maslov(-2, 2) == -4);
    CHECK_THROWS_AS(repeated_period(1.0, 0), Error);
    CHECK_THROWS_AS(repeated_action(1.0, -1), Error);
    CHECK_THROWS_AS(repeated_maslov(2, 0), Error);
}

TEST_CASE("catalog_json round-trips through a JSON parser", "[orbits]") {
    const auto V = cosine_potential();
    const auto cat = orbit_catalog(V, 0.0, 64);
    const auto parsed = nlohmann::json::parse(catalog_json(cat));
    CHECK(parsed["energy"].get<double>() == Catch::Approx(0.0));
    CHECK(parsed["volume"].get<double>() == Catch::Approx(cat.volume).epsilon(1e-15));
    CHECK(parsed["regular"].get<bool>() == cat.regular);
    CHECK(parsed["min_grad_norm"].get<double>() ==
          Catch::Approx(cat.min_grad_norm).epsilon(1e-15));
    REQUIRE(parsed["orbits"].size() == cat.orbits.size());
    for (std::size_t k = 0; k < cat.orbits.size(); ++k) {
        const auto& o = parsed["orbits"][k];
        const auto& p = cat.orbits[k];
        CHECK(o["period"].get<double>() == Catch::Approx(p.period_primitive).epsilon(1e-15));
        CHECK(o["action"].get<double>() == Catch::Approx(p.action_primitive).epsilon(1e-15));
        CHECK(o["winding"][0].get<int>() == p.wind_x);
        CHECK(o["winding"][1].get<int>() == p.wind_xi);
        CHECK(o["maslov"].get<int>() == p.maslov);
        CHECK(o["n_samples"].get<std::size_t>() == p.samples.size());
    }
}
