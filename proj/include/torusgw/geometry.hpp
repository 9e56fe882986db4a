#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "errors.hpp"

namespace torusgw {

inline constexpr double pi = std::numbers::pi;

// Phase space is the torus R^2 / (ell_x Z + ell_xi Z).  A quantum Hilbert
// space of dimension N exists when 2*pi*hbar*N = ell_x*ell_xi, which fixes
// hbar once the period lengths and N are chosen.
struct TorusGeometry {
    double ell_x  = 2 * pi;
    double ell_xi = 2 * pi;
    int    N      = 2;
    double hbar   = ell_x * ell_xi / (2 * pi * N);
};

inline TorusGeometry make_geometry(int N, double ell_x = 2 * pi, double ell_xi = 2 * pi) {
    require(ell_x > 0 && std::isfinite(ell_x), "invalid-geometry", "ell_x must be positive");
    require(ell_xi > 0 && std::isfinite(ell_xi), "invalid-geometry", "ell_xi must be positive");
    require(N >= 2, "invalid-geometry", "N must be at least 2");
    return TorusGeometry{ell_x, ell_xi, N, ell_x * ell_xi / (2 * pi * N)};
}

// Position grid x_n = n*ell_x/N, n = 0..N-1.
inline std::vector<double> grid_points(const TorusGeometry& g) {
    std::vector<double> x(g.N);
    for (int n = 0; n < g.N; ++n) x[n] = n * g.ell_x / g.N;
    return x;
}

// Reduce v modulo period into [0, period).
inline double wrap(double v, double period) {
    require(period > 0, "invalid-geometry", "wrap: period must be positive");
    double r = std::fmod(v, period);
    if (r < 0) r += period;
    if (r >= period) r = 0; // fmod can land exactly on the period after the shift
    return r;
}

// A point on the covering plane R^2 together with the winding counts that
// relate it to its representative in the fundamental domain.
struct LiftedPoint {
    double x  = 0; // covering-space position
    double xi = 0; // covering-space momentum
    int wind_x  = 0;
    int wind_xi = 0;
};

inline LiftedPoint make_lifted(double x_proj, double xi_proj, const TorusGeometry& g) {
    return LiftedPoint{wrap(x_proj, g.ell_x), wrap(xi_proj, g.ell_xi), 0, 0};
}

inline double project_x(const LiftedPoint& p, const TorusGeometry& g) { return p.x - p.wind_x * g.ell_x; }
inline double project_xi(const LiftedPoint& p, const TorusGeometry& g) { return p.xi - p.wind_xi * g.ell_xi; }

namespace detail {
// Smallest-magnitude displacement d with prev + d = next (mod period),
// together with the winding increment it implies.  Steps at 90% or more of
// the half-period ambiguity threshold are rejected: integrators are expected
// to keep per-step displacements below period/4.
inline double lift_displacement(double prev_proj, double next_proj, double period, int& dwind) {
    double d = next_proj - prev_proj;
    dwind = 0;
    if (d > 0.5 * period) { d -= period; dwind = -1; }
    else if (d < -0.5 * period) { d += period; dwind = 1; }
    require(std::abs(d) < 0.45 * period, "ambiguous-lift",
            "step too large to disambiguate the lift");
    return d;
}
} // namespace detail

// Continue the lift of a trajectory by one step: next_projected is the new
// point in the fundamental domain, and the returned LiftedPoint is its unique
// lift within half a period of prev.
inline LiftedPoint unwrap_step(const LiftedPoint& prev, double x_proj, double xi_proj,
                               const TorusGeometry& g) {
    LiftedPoint q;
    int dwx = 0, dwxi = 0;
    double px = project_x(prev, g), pxi = project_xi(prev, g);
    detail::lift_displacement(px, x_proj, g.ell_x, dwx);
    detail::lift_displacement(pxi, xi_proj, g.ell_xi, dwxi);
    q.wind_x  = prev.wind_x + dwx;
    q.wind_xi = prev.wind_xi + dwxi;
    q.x  = x_proj + q.wind_x * g.ell_x;
    q.xi = xi_proj + q.wind_xi * g.ell_xi;
    return q;
}

} // namespace torusgw
