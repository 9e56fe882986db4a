#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "orbits.hpp"
#include "spectral.hpp"

// Both sides of the semiclassical trace formula: the smoothed spectral sum on
// the left, the volume term plus periodic-orbit oscillations on the right
// (leading-order amplitudes), the analytic right-hand side for pure
// potentials, and the two supporting asymptotic checks (Poisson summation on
// the quantisation grids, Van Vleck propagator elements).

namespace torusgw {

struct OrbitTerm {
    int orbit = 0; // index into the catalog
    int k = 0;     // signed repetition count
    double period = 0;
    cplx contribution;
};

struct TraceFormulaReport {
    double E = 0;
    int N = 0;
    double hbar = 0;
    double lhs = 0;
    double rhs_volume_term = 0;
    std::vector<OrbitTerm> rhs_orbit_terms;
    double rhs_total = 0;
    double abs_error = 0;
    double rel_error = 0;
};

// Smallest k_max beyond which every repetition lands outside rho_hat's
// support; using it makes the truncation exact rather than approximate.
inline int default_k_max(const OrbitCatalog& cat, const TestFunction& rho) {
    double tmin = std::numeric_limits<double>::infinity();
    for (const auto& p : cat.orbits) tmin = std::min(tmin, p.period_primitive);
    if (!std::isfinite(tmin) || tmin <= 0) return 1;
    return std::max(1, static_cast<int>(std::floor(rho.support() / tmin)) + 1);
}

// Right-hand side of the trace formula with leading-order amplitudes:
// rho_hat(0) vol/(2 pi) plus, for every primitive orbit and repetition k,
// rho_hat(k t) t/(2 pi) e^{i k W/hbar - i pi k sigma/2}.  Conjugate +-k pairs
// are emitted together, so the assembled total is real.
inline TraceFormulaReport rhs_semiclassical(const OrbitCatalog& cat, const TestFunction& rho,
                                            const TorusGeometry& g, int k_max) {
    require(k_max >= 1, "spec", "rhs_semiclassical: k_max must be at least 1");
    require(cat.regular, "near-critical", "rhs_semiclassical: catalog is not regular");
    TraceFormulaReport r;
    r.E = cat.energy;
    r.N = g.N;
    r.hbar = g.hbar;
    r.rhs_volume_term = rho.rho_hat(0) * cat.volume / (2 * pi);
    cplx osum = 0;
    for (std::size_t p = 0; p < cat.orbits.size(); ++p) {
        const auto& orb = cat.orbits[p];
        for (int k = 1; k <= k_max; ++k) {
            if (k * orb.period_primitive >= rho.support()) break; // rho_hat vanishes
            const double amp =
                rho.rho_hat(k * orb.period_primitive) * orb.period_primitive / (2 * pi);
            const double ph =
                k * orb.action_primitive / g.hbar - pi * k * orb.maslov / 2.0;
            for (int sgn : {1, -1}) {
                const cplx c = amp * cplx(std::cos(sgn * ph), std::sin(sgn * ph));
                r.rhs_orbit_terms.push_back({static_cast<int>(p), sgn * k,
                                             orb.period_primitive, c});
                osum += c;
            }
        }
    }
    r.rhs_total = r.rhs_volume_term + osum.real();
    return r;
}

// Full comparison: lhs is the smoothed counting sum over the spectrum, rhs
// the semiclassical sum over the catalog built from the same symbol.
inline TraceFormulaReport compare(const Spectrum& s, const OrbitCatalog& cat,
                                  const TestFunction& rho, double E, int k_max) {
    require(std::abs(E - cat.energy) <= 1e-10 * std::max(1.0, std::abs(E)), "spec",
            "compare: catalog was built at a different energy");
    require(!cat.orbits.empty(), "near-critical",
            "compare: no periodic orbit data (empty or degenerate energy surface)");
    auto r = rhs_semiclassical(cat, rho, s.geom, k_max);
    r.lhs = smoothed_counting(s, rho, E);
    r.abs_error = std::abs(r.lhs - r.rhs_total);
    r.rel_error = r.abs_error / std::max(std::abs(r.lhs), 1e-300);
    return r;
}

// Analytic right-hand side for a pure potential H(x): every root x0 of
// H(x0) = E contributes the full repetition series with period
// ell_xi/|H'(x0)| and action ell_xi x0, no Maslov phase.
inline double potential_case_rhs(const FourierSymbol& V, const TestFunction& rho, double E,
                                 int k_max) {
    require(k_max >= 1, "spec", "potential_case_rhs: k_max must be at least 1");
    for (const auto& t : V.terms())
        require(t.m == 0, "spec", "potential_case_rhs: symbol must depend on x only");
    const auto& g = V.geometry();
    const double thr = 1e-3 * gradient_scale(V);
    require(thr > 0, "near-critical", "potential_case_rhs: constant symbol");

    auto f = [&](double x) { return V.eval(x, 0.0) - E; };
    auto df = [&](double x) { return V.gradient(x, 0.0)[0]; };
    const int M = 4096;
    const double hx = g.ell_x / M;

    std::vector<double> F(M + 1);
    for (int i = 0; i <= M; ++i) F[i] = f(i * hx);
    for (int i = 0; i < M; ++i) // tangent (double) roots never change sign
        require(std::abs(df(i * hx)) > thr || std::abs(F[i]) > 4 * thr * hx, "near-critical",
                "potential_case_rhs: degenerate root of H(x) = E");

    std::vector<double> roots;
    for (int i = 0; i < M; ++i) {
        if (F[i] == 0) roots.push_back(i * hx);
        else if (F[i] * F[i + 1] < 0)
            roots.push_back(brent_root(f, i * hx, (i + 1) * hx, 1e-14));
    }
    if (roots.size() >= 2 && roots.front() + g.ell_x - roots.back() < 1e-9 * g.ell_x)
        roots.pop_back(); // the same root seen across the period seam

    double total = 0;
    for (double x0 : roots) {
        const double slope = std::abs(df(x0));
        require(slope > thr, "near-critical", "potential_case_rhs: root is not simple");
        const double t0 = g.ell_xi / slope;
        total += t0 * rho.rho_hat(0) / (2 * pi);
        for (int k = 1; k <= k_max; ++k) {
            if (k * t0 >= rho.support()) break;
            total += 2 * t0 * rho.rho_hat(k * t0) * std::cos(k * g.ell_xi * x0 / g.hbar) /
                     (2 * pi);
        }
    }
    return total;
}

// Smooth bump on (0, ell); beta steepens the Fourier decay, which sets how
// far the Poisson-summation error can fall before hitting quadrature floors.
struct GridBump {
    double ell = 2 * pi;
    double beta = 2.0;
    double operator()(double t) const {
        const double u = 2 * t / ell - 1;
        if (std::abs(u) >= 1) return 0;
        return std::exp(beta - beta / (1 - u * u));
    }
};

struct PoissonCheck {
    cplx discrete_sum;
    cplx integral;
    double error = 0;
};

// Discrete sum (ell/N) sum_n a(n ell/N) e^{i phi/hbar} against the nu-branch
// integral int a e^{i(phi - nu ell* t)/hbar} dt, where ell* is the dual
// period (2 pi hbar N = ell ell*).  The phase derivative must stay inside
// ((nu-1) ell*, (nu+1) ell*) on the bump support for the branch to dominate.
template <typename BumpF, typename PhaseF>
PoissonCheck poisson_check(const BumpF& a, const PhaseF& phi, int nu, const TorusGeometry& g,
                           Axis axis) {
    const double ell = axis == Axis::x ? g.ell_x : g.ell_xi;
    const double dual = axis == Axis::x ? g.ell_xi : g.ell_x;
    const double h = 1e-6 * ell;
    for (int i = 1; i < 1024; ++i) {
        const double t = i * ell / 1024;
        if (a(t) == 0) continue;
        const double dphi = (phi(t + h) - phi(t - h)) / (2 * h);
        require(dphi > (nu - 1) * dual && dphi < (nu + 1) * dual, "spec",
                "poisson_check: phase derivative leaves the nu-window on the bump support");
    }

    PoissonCheck out;
    cplx s = 0;
    for (int n = 0; n < g.N; ++n) {
        const double t = n * ell / g.N;
        const double av = a(t);
        if (av == 0) continue;
        const double ph = phi(t) / g.hbar;
        s += av * cplx(std::cos(ph), std::sin(ph));
    }
    out.discrete_sum = s * (ell / g.N);

    auto shifted = [&](double t) { return (phi(t) - nu * dual * t) / g.hbar; };
    out.integral = cplx(
        integrate_adaptive([&](double t) { return a(t) * std::cos(shifted(t)); }, 0.0, ell,
                           1e-13),
        integrate_adaptive([&](double t) { return a(t) * std::sin(shifted(t)); }, 0.0, ell,
                           1e-13));
    out.error = std::abs(out.discrete_sum - out.integral);
    return out;
}

struct VanVleckElement {
    cplx exact;
    cplx semiclassical;
    double error = 0;
};

// Propagator element U(t)_{mn} for a kinetic symbol H(xi): exactly via the
// discrete Fourier eigenbasis, and semiclassically by stationary phase on
// (1/ell_xi) int e^{i((x_m - x_n + r ell_x) eta - t H(eta))/hbar} d eta summed
// over the winding branches r that carry stationary points.
inline VanVleckElement van_vleck_element(const FourierSymbol& H, double t, int m, int n,
                                         double threshold = -1) {
    const auto& g = H.geometry();
    require(m >= 0 && m < g.N && n >= 0 && n < g.N, "spec",
            "van_vleck_element: matrix indices out of range");
    require(std::isfinite(t), "spec", "van_vleck_element: t must be finite");
    for (const auto& term : H.terms())
        require(term.n == 0, "spec", "van_vleck_element: symbol must depend on xi only");

    double slope = 0, curv = 0;
    for (const auto& term : H.terms()) {
        const double w = 2 * pi * term.m / g.ell_xi;
        slope += std::abs(term.c) * std::abs(w);
        curv += std::abs(term.c) * w * w;
    }
    const double thr = threshold < 0 ? 1e-3 * curv : threshold;
    require(curv > 0 && std::abs(t) * curv > thr, "near-critical",
            "van_vleck_element: |t H''| below the caustic threshold");

    VanVleckElement out;
    cplx u = 0;
    for (int j = 0; j < g.N; ++j) {
        const double Ej = H.eval(0.0, j * g.ell_xi / g.N);
        const double ph = 2 * pi * double(j) * double(m - n) / g.N - Ej * t / g.hbar;
        u += cplx(std::cos(ph), std::sin(ph));
    }
    out.exact = u / double(g.N);

    const double dx = (double(m) - double(n)) * g.ell_x / g.N;
    const double reach = std::abs(t) * slope;
    const int r_lo = static_cast<int>(std::ceil((-reach - dx) / g.ell_x - 1e-12));
    const int r_hi = static_cast<int>(std::floor((reach - dx) / g.ell_x + 1e-12));
    cplx sc = 0;
    const int M = 2048;
    for (int r = r_lo; r <= r_hi; ++r) {
        const double target = dx + r * g.ell_x;
        auto fp = [&](double eta) { return t * H.gradient(0.0, eta)[1] - target; };
        std::vector<double> stat;
        double prev = fp(0.0);
        for (int i = 0; i < M; ++i) {
            const double a = i * g.ell_xi / M, b = (i + 1) * g.ell_xi / M;
            const double fb = fp(b);
            if (prev == 0) stat.push_back(a);
            else if (prev * fb < 0) stat.push_back(brent_root(fp, a, b, 1e-14));
            prev = fb;
        }
        if (stat.size() >= 2 && stat.front() + g.ell_xi - stat.back() < 1e-9 * g.ell_xi)
            stat.pop_back(); // the same point seen across the period seam
        for (double eta : stat) {
            const double h2 = t * H.hessian(0.0, eta)[1][1];
            require(std::abs(h2) > thr, "near-critical",
                    "van_vleck_element: stationary point too close to a caustic");
            const double phase = (target * eta - t * H.eval(0.0, eta)) / g.hbar -
                                 (pi / 4) * (h2 > 0 ? 1.0 : -1.0);
            const double amp = std::sqrt(2 * pi * g.hbar / std::abs(h2)) / g.ell_xi;
            sc += amp * cplx(std::cos(phase), std::sin(phase));
        }
    }
    out.semiclassical = sc;
    out.error = std::abs(out.exact - out.semiclassical);
    return out;
}

inline std::string trace_report_json(const TraceFormulaReport& r) {
    auto root = JsonValue::object();
    root->set("E", r.E);
    root->set("N", r.N);
    root->set("hbar", r.hbar);
    root->set("lhs", r.lhs);
    root->set("rhs_volume", r.rhs_volume_term);
    root->set("rhs_total", r.rhs_total);
    root->set("abs_error", r.abs_error);
    root->set("rel_error", r.rel_error);
    auto terms = JsonValue::array();
    for (const auto& ot : r.rhs_orbit_terms) {
        auto o = JsonValue::object();
        o->set("period", ot.period);
        o->set("k", ot.k);
        o->set("re", ot.contribution.real());
        o->set("im", ot.contribution.imag());
        terms->push(o);
    }
    root->set("orbit_terms", terms);
    return root->dump();
}

} // namespace torusgw
