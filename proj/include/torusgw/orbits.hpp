#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "numerics.hpp"
#include "symbol.hpp"

// Classical side of the trace formula: energy surfaces H^{-1}(E), their
// primitive periodic orbits, and the per-orbit data (period, action with
// winding correction, Maslov index) that feed the semiclassical sums.

namespace torusgw {

struct PeriodicOrbit {
    double energy = 0;
    double period_primitive = 0;
    double action_primitive = 0;
    int wind_x = 0;
    int wind_xi = 0;
    int maslov = 0;
    std::vector<LiftedPoint> samples; // one primitive traversal, closed
    LiftedPoint start_point;
};

struct OrbitCatalog {
    double energy = 0;
    std::vector<PeriodicOrbit> orbits;
    double volume = 0;
    bool regular = false;
    double min_grad_norm = std::numeric_limits<double>::infinity();
};

// A closed level-set loop: refined points of one traversal in flow direction,
// lifted to the covering plane.  The last point repeats the first torus point.
struct Contour {
    std::vector<LiftedPoint> points;
    int wind_x = 0;
    int wind_xi = 0;
};

struct RegularValueReport {
    bool regular = false;
    double min_grad_norm = 0;
    bool empty = false;
};

struct ActionDerivative {
    double dW_dE = 0;
    double period = 0;
    double deviation = 0;
};

// Upper bound on |grad H| read off the coefficient table; the near-critical
// threshold defaults to a fixed fraction of this scale.
inline double gradient_scale(const FourierSymbol& f) {
    const auto& g = f.geometry();
    double s = 0;
    for (const auto& t : f.terms())
        s += std::abs(t.c) * 2 * pi * std::hypot(t.n / g.ell_x, t.m / g.ell_xi);
    return s;
}

namespace detail {

inline double default_grad_threshold(const FourierSymbol& f, double grad_threshold) {
    return grad_threshold < 0 ? 1e-3 * gradient_scale(f) : grad_threshold;
}

// Lift of raw covering coordinates: winding counts chosen so the projection
// lands in the fundamental domain.
inline LiftedPoint lift_of(double x, double xi, const TorusGeometry& g) {
    LiftedPoint p;
    p.x = x;
    p.xi = xi;
    p.wind_x = static_cast<int>(std::floor(x / g.ell_x));
    p.wind_xi = static_cast<int>(std::floor(xi / g.ell_xi));
    if (x - p.wind_x * g.ell_x >= g.ell_x) ++p.wind_x;
    if (x - p.wind_x * g.ell_x < 0) --p.wind_x;
    if (xi - p.wind_xi * g.ell_xi >= g.ell_xi) ++p.wind_xi;
    if (xi - p.wind_xi * g.ell_xi < 0) --p.wind_xi;
    return p;
}

// One Dormand-Prince 5(4) step; err is the embedded-pair estimate.
struct Dp54Step {
    std::array<double, 2> y5{};
    double err = 0;
};

template <typename F>
Dp54Step dp54_step(F& rhs, const std::array<double, 2>& y, double h) {
    static const double A[7][6] = {
        {0, 0, 0, 0, 0, 0},
        {1.0 / 5, 0, 0, 0, 0, 0},
        {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
        {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
        {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
    };
    static const double B5[7] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192,
                                 -2187.0 / 6784, 11.0 / 84, 0};
    static const double B4[7] = {5179.0 / 57600, 0, 7571.0 / 16695, 393.0 / 640,
                                 -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
    std::array<std::array<double, 2>, 7> k{};
    Dp54Step out;
    for (int s = 0; s < 7; ++s) {
        std::array<double, 2> z = y;
        for (int j = 0; j < s; ++j) {
            z[0] += h * A[s][j] * k[j][0];
            z[1] += h * A[s][j] * k[j][1];
        }
        if (s == 6) out.y5 = z; // stage 7 input is the 5th-order solution
        k[s] = rhs(z);
    }
    double e0 = 0, e1 = 0;
    for (int j = 0; j < 7; ++j) {
        e0 += h * (B5[j] - B4[j]) * k[j][0];
        e1 += h * (B5[j] - B4[j]) * k[j][1];
    }
    out.err = std::hypot(e0, e1);
    return out;
}

} // namespace detail

// Integrate Hamilton's equations xdot = dH/dxi, xidot = -dH/dx with an
// adaptive embedded Runge-Kutta pair, recording the lifted trajectory at
// every accepted step.  The energy drift over the whole run is held below
// tol, retrying with a tighter step tolerance when necessary.
inline std::vector<LiftedPoint> hamiltonian_flow(const FourierSymbol& H,
                                                 std::array<double, 2> start,
                                                 double t_final, double tol) {
    require(std::isfinite(t_final), "spec", "hamiltonian_flow: t_final must be finite");
    require(tol > 0 && std::isfinite(tol), "spec", "hamiltonian_flow: tol must be positive");
    const auto& g = H.geometry();
    auto rhs = [&](const std::array<double, 2>& z) -> std::array<double, 2> {
        const auto dH = H.gradient(z[0], z[1]);
        return {dH[1], -dH[0]};
    };

    std::vector<LiftedPoint> traj;
    traj.push_back(detail::lift_of(start[0], start[1], g));
    if (t_final == 0) return traj;

    const double e0 = H.eval(start[0], start[1]);
    const double dir = t_final > 0 ? 1.0 : -1.0;
    double eps = std::max(tol * 1e-3, 1e-15);
    for (int attempt = 0; attempt < 3; ++attempt) {
        traj.resize(1);
        std::array<double, 2> y = start;
        double t = 0;
        double h = dir * std::min(std::abs(t_final), 1e-2);
        while (true) {
            const double rem = t_final - t;
            if (dir * rem <= 0) break;
            bool last = false;
            if (dir * h >= dir * rem) {
                h = rem;
                last = true;
            }
            const auto st = detail::dp54_step(rhs, y, h);
            const double scale = eps * std::max({1.0, std::abs(y[0]), std::abs(y[1])});
            const bool small_enough = std::abs(st.y5[0] - y[0]) < 0.25 * g.ell_x &&
                                      std::abs(st.y5[1] - y[1]) < 0.25 * g.ell_xi;
            if (st.err <= scale && small_enough) {
                t += h;
                y = st.y5;
                traj.push_back(detail::lift_of(y[0], y[1], g));
                if (last) break;
                double fac = 0.9 * std::pow(scale / std::max(st.err, 1e-300), 0.2);
                h *= std::clamp(fac, 1.0, 5.0);
            } else {
                double fac = small_enough
                                 ? 0.9 * std::pow(scale / std::max(st.err, 1e-300), 0.2)
                                 : 0.4;
                h *= std::clamp(fac, 0.1, 0.9);
                require(std::abs(h) > 1e-14 * std::max(1.0, std::abs(t_final)),
                        "near-critical", "hamiltonian_flow: step size collapsed");
            }
        }
        const auto& e = traj.back();
        if (std::abs(H.eval(e.x, e.xi) - e0) < tol) return traj;
        eps *= 1e-2;
    }
    require(false, "resolution", "hamiltonian_flow: energy drift tolerance not reached");
    return traj;
}

namespace detail {

struct Crossing {
    double x = 0;  // covering coordinates in [0, ell_x] x [0, ell_xi]
    double xi = 0;
    double grad_norm = 0;
};

struct CrossingLink {
    int to = -1;
    int cell = -1;
};

struct LevelSetData {
    std::vector<Crossing> crossings;
    std::vector<std::array<CrossingLink, 2>> links;
    std::vector<int> degree;
};

// Marching squares on the periodic grid.  Nodes with H - E == 0 exactly are
// counted as positive, which perturbs degenerate configurations into generic
// ones without affecting refined crossing locations.
inline LevelSetData extract_level_set(const FourierSymbol& H, double E, int R) {
    require(R >= 64, "spec", "level_set: grid_res must be at least 64");
    const auto& g = H.geometry();
    const double hx = g.ell_x / R, hxi = g.ell_xi / R;

    std::vector<double> F(static_cast<std::size_t>(R) * R);
    for (int j = 0; j < R; ++j)
        for (int i = 0; i < R; ++i)
            F[static_cast<std::size_t>(j) * R + i] = H.eval(i * hx, j * hxi) - E;
    auto val = [&](int i, int j) { return F[static_cast<std::size_t>(j % R) * R + (i % R)]; };
    auto pos = [&](int i, int j) { return val(i, j) >= 0; };

    LevelSetData out;
    // edge id: type*R*R + j*R + i, type 0 horizontal (to i+1), 1 vertical (to j+1)
    std::vector<int> edge_cross(2 * static_cast<std::size_t>(R) * R, -1);
    auto refine = [&](double ax, double axi, double bx, double bxi) -> Crossing {
        auto f = [&](double u) { return H.eval(ax + u * (bx - ax), axi + u * (bxi - axi)) - E; };
        double u = brent_root(f, 0.0, 1.0, 1e-14);
        const double dxu = bx - ax, dxiu = bxi - axi;
        for (int it = 0; it < 2; ++it) {
            const auto dH = H.gradient(ax + u * dxu, axi + u * dxiu);
            const double fp = dH[0] * dxu + dH[1] * dxiu;
            if (std::abs(fp) < 1e-12) break;
            u -= f(u) / fp;
            u = std::clamp(u, 0.0, 1.0);
        }
        Crossing c;
        c.x = ax + u * dxu;
        c.xi = axi + u * dxiu;
        require(std::abs(H.eval(c.x, c.xi) - E) < 1e-12 * std::max(1.0, std::abs(E)),
                "resolution", "level_set: crossing refinement missed |H-E| < 1e-12");
        const auto dH = H.gradient(c.x, c.xi);
        c.grad_norm = std::hypot(dH[0], dH[1]);
        return c;
    };
    for (int type = 0; type < 2; ++type)
        for (int j = 0; j < R; ++j)
            for (int i = 0; i < R; ++i) {
                const bool a = pos(i, j);
                const bool b = type == 0 ? pos(i + 1, j) : pos(i, j + 1);
                if (a == b) continue;
                const double ax = i * hx, axi = j * hxi;
                const double bx = type == 0 ? (i + 1) * hx : ax;
                const double bxi = type == 0 ? axi : (j + 1) * hxi;
                edge_cross[static_cast<std::size_t>(type) * R * R + static_cast<std::size_t>(j) * R + i] =
                    static_cast<int>(out.crossings.size());
                out.crossings.push_back(refine(ax, axi, bx, bxi));
            }

    out.links.resize(out.crossings.size());
    out.degree.assign(out.crossings.size(), 0);
    auto attach = [&](int at, int other, int cell) {
        require(out.degree[at] < 2, "topology", "level_set: crossing with more than two links");
        out.links[at][out.degree[at]++] = CrossingLink{other, cell};
    };
    auto link = [&](int a, int b, int cell) {
        require(a >= 0 && b >= 0, "topology", "level_set: inconsistent marching-squares cell");
        attach(a, b, cell);
        attach(b, a, cell);
    };
    // per-case pairs of crossed cell edges, indexed 0=bottom 1=right 2=top 3=left;
    // cases 5 and 10 are disambiguated by the sign at the cell centre
    for (int j = 0; j < R; ++j)
        for (int i = 0; i < R; ++i) {
            const int cse = (pos(i, j) ? 1 : 0) | (pos(i + 1, j) ? 2 : 0) |
                            (pos(i + 1, j + 1) ? 4 : 0) | (pos(i, j + 1) ? 8 : 0);
            if (cse == 0 || cse == 15) continue;
            const int eid[4] = {
                0 * R * R + j * R + i,
                1 * R * R + j * R + (i + 1) % R,
                0 * R * R + ((j + 1) % R) * R + i,
                1 * R * R + j * R + i,
            };
            static const int table[16][4] = {
                {-1, -1, -1, -1}, {0, 3, -1, -1}, {0, 1, -1, -1}, {3, 1, -1, -1},
                {1, 2, -1, -1},   {-2, 0, 0, 0},  {0, 2, -1, -1}, {2, 3, -1, -1},
                {2, 3, -1, -1},   {0, 2, -1, -1}, {-2, 0, 0, 0},  {1, 2, -1, -1},
                {3, 1, -1, -1},   {0, 1, -1, -1}, {0, 3, -1, -1}, {-1, -1, -1, -1},
            };
            const int cell = j * R + i;
            if (table[cse][0] == -2) {
                const bool centre = H.eval((i + 0.5) * hx, (j + 0.5) * hxi) - E >= 0;
                const bool sw = pos(i, j); // corner sign on the main diagonal
                if (centre == sw) {
                    link(edge_cross[eid[0]], edge_cross[eid[1]], cell);
                    link(edge_cross[eid[2]], edge_cross[eid[3]], cell);
                } else {
                    link(edge_cross[eid[0]], edge_cross[eid[3]], cell);
                    link(edge_cross[eid[1]], edge_cross[eid[2]], cell);
                }
            } else {
                link(edge_cross[eid[table[cse][0]]], edge_cross[eid[table[cse][1]]], cell);
                if (table[cse][2] >= 0)
                    link(edge_cross[eid[table[cse][2]]], edge_cross[eid[table[cse][3]]], cell);
            }
        }
    return out;
}

} // namespace detail

// Extract the level set H^{-1}(E) as closed loops traversed in the direction
// of the Hamiltonian flow, with per-loop winding numbers from the lift.
inline std::vector<Contour> level_set(const FourierSymbol& H, double E, int grid_res,
                                      double grad_threshold = -1) {
    const auto& g = H.geometry();
    const auto data = detail::extract_level_set(H, E, grid_res);
    const double thr = detail::default_grad_threshold(H, grad_threshold);
    for (const auto& c : data.crossings)
        require(c.grad_norm > thr, "near-critical",
                "level_set: |grad H| below threshold on the energy surface");

    std::vector<Contour> loops;
    std::vector<char> visited(data.crossings.size(), 0);
    for (std::size_t c0 = 0; c0 < data.crossings.size(); ++c0) {
        if (visited[c0]) continue;
        require(data.degree[c0] == 2, "topology", "level_set: open chain after assembly");
        std::vector<int> order;
        int cur = static_cast<int>(c0), from_cell = -1;
        do {
            require(!visited[cur] || cur == static_cast<int>(c0), "topology",
                    "level_set: self-intersecting chain");
            visited[cur] = 1;
            order.push_back(cur);
            require(data.degree[cur] == 2, "topology", "level_set: open chain after assembly");
            const auto& l = data.links[cur];
            const detail::CrossingLink nxt = (l[0].cell == from_cell) ? l[1] : l[0];
            from_cell = nxt.cell;
            cur = nxt.to;
            require(order.size() <= data.crossings.size(), "topology",
                    "level_set: chain fails to close");
        } while (cur != static_cast<int>(c0));

        // orient along the flow velocity (dH/dxi, -dH/dx)
        double score = 0;
        const std::size_t M = order.size();
        for (std::size_t k = 0; k < M; ++k) {
            const auto& a = data.crossings[order[k]];
            const auto& b = data.crossings[order[(k + 1) % M]];
            int dw = 0;
            const double dx =
                detail::lift_displacement(wrap(a.x, g.ell_x), wrap(b.x, g.ell_x), g.ell_x, dw);
            const double dxi =
                detail::lift_displacement(wrap(a.xi, g.ell_xi), wrap(b.xi, g.ell_xi), g.ell_xi, dw);
            const auto dH = H.gradient(a.x, a.xi);
            score += dx * dH[1] - dxi * dH[0];
        }
        if (score < 0) std::reverse(order.begin() + 1, order.end());

        Contour loop;
        const auto& p0 = data.crossings[order[0]];
        LiftedPoint cur_pt = make_lifted(wrap(p0.x, g.ell_x), wrap(p0.xi, g.ell_xi), g);
        loop.points.push_back(cur_pt);
        for (std::size_t k = 1; k <= M; ++k) {
            const auto& q = data.crossings[order[k % M]];
            cur_pt = unwrap_step(cur_pt, wrap(q.x, g.ell_x), wrap(q.xi, g.ell_xi), g);
            loop.points.push_back(cur_pt);
        }
        loop.wind_x = cur_pt.wind_x;
        loop.wind_xi = cur_pt.wind_xi;
        loops.push_back(std::move(loop));
    }
    return loops;
}

// Period, action, and Maslov index of one contour.  Each polyline segment is
// reparametrised over its chord; the point on the level set is found by a
// Newton search along the chord normal, whose implicit derivative gives the
// exact tangent used in the arc-length and action quadratures.
inline PeriodicOrbit make_orbit(const FourierSymbol& H, double E, const Contour& c) {
    const auto& g = H.geometry();
    const std::size_t M = c.points.size();
    require(M >= 4, "topology", "make_orbit: contour has too few points");

    PeriodicOrbit p;
    p.energy = E;
    p.wind_x = c.wind_x;
    p.wind_xi = c.wind_xi;
    p.samples = c.points;
    p.start_point = c.points.front();

    const double tiny = 1e-12 * std::min(g.ell_x, g.ell_xi);
    const double gs = std::max(1.0, gradient_scale(H));
    double period = 0, action = 0;
    for (std::size_t k = 0; k + 1 < M; ++k) {
        const auto& a = c.points[k];
        const auto& b = c.points[k + 1];
        const double dx = b.x - a.x, dxi = b.xi - a.xi;
        const double len = std::hypot(dx, dxi);
        if (len < tiny) continue; // coincident refinements (node hits)
        const double nx = -dxi, nxi = dx;
        auto project = [&](double u, double& px, double& pxi, double& tx, double& txi) {
            const double cx = a.x + u * dx, cxi = a.xi + u * dxi;
            double s = 0;
            for (int it = 0; it < 30; ++it) {
                const double fx = cx + s * nx, fxi = cxi + s * nxi;
                const double f = H.eval(fx, fxi) - E;
                const auto dH = H.gradient(fx, fxi);
                const double fp = dH[0] * nx + dH[1] * nxi;
                require(std::abs(fp) > 1e-13 * gs * len, "near-critical",
                        "make_orbit: projection lost transversality");
                const double ds = f / fp;
                s -= ds;
                if (std::abs(ds) * len < 1e-15 * std::max(g.ell_x, g.ell_xi)) break;
            }
            px = cx + s * nx;
            pxi = cxi + s * nxi;
            const auto dH = H.gradient(px, pxi);
            const double sp = -(dH[0] * dx + dH[1] * dxi) / (dH[0] * nx + dH[1] * nxi);
            tx = dx + sp * nx;
            txi = dxi + sp * nxi;
        };
        period += integrate_adaptive(
            [&](double u) {
                double px, pxi, tx, txi;
                project(u, px, pxi, tx, txi);
                const auto dH = H.gradient(px, pxi);
                return std::hypot(tx, txi) / std::hypot(dH[0], dH[1]);
            },
            0.0, 1.0, 1e-11);
        action += integrate_adaptive(
            [&](double u) {
                double px, pxi, tx, txi;
                project(u, px, pxi, tx, txi);
                return pxi * tx;
            },
            0.0, 1.0, 1e-11 * std::max(1.0, g.ell_xi));
    }
    p.period_primitive = period;
    p.action_primitive = action + c.wind_xi * g.ell_xi * c.points.back().x;

    // Maslov index: twice the signed winding of the velocity along the loop
    double total = 0, prev = 0;
    for (std::size_t k = 0; k < M; ++k) {
        const auto dH = H.gradient(c.points[k].x, c.points[k].xi);
        const double th = std::atan2(-dH[0], dH[1]);
        if (k > 0) {
            double d = th - prev;
            while (d > pi) d -= 2 * pi;
            while (d <= -pi) d += 2 * pi;
            total += d;
        }
        prev = th;
    }
    const double w = total / (2 * pi);
    require(std::abs(w - std::llround(w)) < 0.2, "resolution",
            "make_orbit: velocity winding is not resolved by the sampling");
    p.maslov = 2 * static_cast<int>(std::llround(w));
    if (p.wind_x == 0 && p.wind_xi == 0)
        require(p.maslov == 2 || p.maslov == -2, "topology",
                "make_orbit: contractible orbit with unexpected Maslov index");
    return p;
}

inline OrbitCatalog orbit_catalog(const FourierSymbol& H, double E, int grid_res,
                                  double grad_threshold = -1) {
    OrbitCatalog cat;
    cat.energy = E;
    const auto loops = level_set(H, E, grid_res, grad_threshold);
    for (const auto& loop : loops) {
        for (const auto& q : loop.points) {
            const auto dH = H.gradient(q.x, q.xi);
            cat.min_grad_norm = std::min(cat.min_grad_norm, std::hypot(dH[0], dH[1]));
        }
        cat.orbits.push_back(make_orbit(H, E, loop));
        cat.volume += cat.orbits.back().period_primitive;
    }
    cat.regular = cat.min_grad_norm > detail::default_grad_threshold(H, grad_threshold);
    return cat;
}

// Re-lift the same loop starting from a different sample; used to check that
// the action does not depend on the choice of start point.
inline Contour rotate_contour(const Contour& c, const TorusGeometry& g, std::size_t start) {
    require(c.points.size() >= 2, "spec", "rotate_contour: contour is empty");
    const std::size_t n = c.points.size() - 1;
    start %= n;
    Contour r;
    const auto& s = c.points[start];
    LiftedPoint cur = make_lifted(project_x(s, g), project_xi(s, g), g);
    r.points.push_back(cur);
    for (std::size_t k = 1; k <= n; ++k) {
        const auto& q = c.points[(start + k) % n];
        cur = unwrap_step(cur, project_x(q, g), project_xi(q, g), g);
        r.points.push_back(cur);
    }
    r.wind_x = cur.wind_x;
    r.wind_xi = cur.wind_xi;
    return r;
}

inline RegularValueReport regular_value_check(const FourierSymbol& H, double E, int grid_res,
                                              double grad_threshold = -1) {
    const auto data = detail::extract_level_set(H, E, grid_res);
    RegularValueReport rep;
    if (data.crossings.empty()) {
        rep.empty = true;
        rep.regular = true;
        rep.min_grad_norm = std::numeric_limits<double>::infinity();
        return rep;
    }
    rep.min_grad_norm = std::numeric_limits<double>::infinity();
    for (const auto& c : data.crossings) rep.min_grad_norm = std::min(rep.min_grad_norm, c.grad_norm);
    rep.regular = rep.min_grad_norm > detail::default_grad_threshold(H, grad_threshold);
    return rep;
}

// Newton refinement of the first-return time to the start point, using the
// flow itself; independent of the contour quadrature that produced t_guess.
inline double return_time(const FourierSymbol& H, const LiftedPoint& start, double t_guess,
                          double tol) {
    const auto& g = H.geometry();
    const double sx = project_x(start, g), sxi = project_xi(start, g);
    double t = t_guess, last_dt = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 12; ++it) {
        const auto traj = hamiltonian_flow(H, {sx, sxi}, t, tol);
        const auto& e = traj.back();
        double dx = e.x - sx, dxi = e.xi - sxi;
        dx -= g.ell_x * std::round(dx / g.ell_x);
        dxi -= g.ell_xi * std::round(dxi / g.ell_xi);
        const auto dH = H.gradient(e.x, e.xi);
        const double vx = dH[1], vxi = -dH[0];
        const double v2 = vx * vx + vxi * vxi;
        require(v2 > 0, "near-critical", "return_time: stationary point on the orbit");
        const double dt = -(dx * vx + dxi * vxi) / v2;
        t += dt;
        last_dt = std::abs(dt);
        if (last_dt < 1e-10 * std::max(1.0, std::abs(t))) return t;
    }
    require(last_dt < 1e-8 * std::max(1.0, std::abs(t)), "resolution",
            "return_time: Newton iteration did not settle");
    return t;
}

inline ActionDerivative action_derivative_check(const FourierSymbol& H, double E, double dE,
                                                int grid_res = 128) {
    require(dE > 0 && std::isfinite(dE), "spec", "action_derivative_check: dE must be positive");
    const auto lo = orbit_catalog(H, E - dE, grid_res);
    const auto mid = orbit_catalog(H, E, grid_res);
    const auto hi = orbit_catalog(H, E + dE, grid_res);
    require(lo.orbits.size() == mid.orbits.size() && hi.orbits.size() == mid.orbits.size(),
            "topology", "action_derivative_check: orbit topology changes across the window");
    require(!mid.orbits.empty(), "topology", "action_derivative_check: empty energy surface");

    const auto& g = H.geometry();
    const double near = 12.0 * std::max(g.ell_x, g.ell_xi) / grid_res;
    auto match = [&](const OrbitCatalog& cat, const PeriodicOrbit& m) -> const PeriodicOrbit& {
        const double mx = project_x(m.start_point, g), mxi = project_xi(m.start_point, g);
        const PeriodicOrbit* best = nullptr;
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto& o : cat.orbits) {
            double dx = project_x(o.start_point, g) - mx, dxi = project_xi(o.start_point, g) - mxi;
            dx -= g.ell_x * std::round(dx / g.ell_x);
            dxi -= g.ell_xi * std::round(dxi / g.ell_xi);
            const double d = std::hypot(dx, dxi);
            if (d < best_d) {
                best_d = d;
                best = &o;
            }
        }
        require(best && best_d < near, "topology",
                "action_derivative_check: could not pair orbits across the window");
        require(best->wind_x == m.wind_x && best->wind_xi == m.wind_xi, "topology",
                "action_derivative_check: paired orbits change winding");
        return *best;
    };

    ActionDerivative out;
    double worst = -1;
    for (const auto& m : mid.orbits) {
        const auto& a = match(lo, m);
        const auto& b = match(hi, m);
        const double d = (b.action_primitive - a.action_primitive) / (2 * dE);
        // the sign of dW/dE follows the traversal direction for winding
        // orbits; the classical identity fixes only |dW/dE| = t
        const double dev = std::abs(std::abs(d) - m.period_primitive) / m.period_primitive;
        if (dev > worst) {
            worst = dev;
            out.dW_dE = d;
            out.period = m.period_primitive;
            out.deviation = dev;
        }
    }
    return out;
}

// Repetition laws for the k-fold traversal of a primitive orbit.
inline double repeated_period(double t_prim, int k) {
    require(k >= 1, "spec", "repeated_period: repetition count must be positive");
    return k * t_prim;
}
inline double repeated_action(double w_prim, int k) {
    require(k >= 1, "spec", "repeated_action: repetition count must be positive");
    return k * w_prim;
}
inline int repeated_maslov(int sigma_prim, int k) {
    require(k >= 1, "spec", "repeated_maslov: repetition count must be positive");
    return k * sigma_prim;
}

inline std::string catalog_json(const OrbitCatalog& cat) {
    auto root = JsonValue::object();
    root->set("energy", cat.energy);
    root->set("volume", cat.volume);
    root->set("regular", cat.regular);
    if (std::isfinite(cat.min_grad_norm)) root->set("min_grad_norm", cat.min_grad_norm);
    auto orbits = JsonValue::array();
    for (const auto& p : cat.orbits) {
        auto o = JsonValue::object();
        o->set("period", p.period_primitive);
        o->set("action", p.action_primitive);
        auto w = JsonValue::array();
        w->push(JsonValue::integer(p.wind_x));
        w->push(JsonValue::integer(p.wind_xi));
        o->set("winding", w);
        o->set("maslov", p.maslov);
        o->set("n_samples", static_cast<long long>(p.samples.size()));
        orbits->push(o);
    }
    root->set("orbits", orbits);
    return root->dump();
}

} // namespace torusgw
