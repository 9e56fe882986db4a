#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "orbits.hpp"
#include "spectral.hpp"

// Phase-counting machinery for eigenvalue bracketing: the sawtooth function
// Q, the root sets Omega of the quantisation condition, the N_min/N_max
// window counts and their comparison against the local eigenvalue count, and
// Bohr-Sommerfeld eigenvalue prediction by continuation of W(E) in energy.

namespace torusgw {

// z mod 2 pi reduced to (-pi, pi].
inline double reduce_mod_2pi(double z) {
    double m = std::remainder(z, 2 * pi);
    if (m <= -pi) m += 2 * pi;
    return m;
}

inline double reduced_phase(const PeriodicOrbit& p, double hbar, double r) {
    require(hbar > 0, "spec", "reduced_phase: hbar must be positive");
    return reduce_mod_2pi(p.action_primitive / hbar - (pi / 2) * p.maslov +
                          r * p.period_primitive);
}

// Q(r; E, hbar): each summand is linear in r between its jump points and
// jumps by +1 (that is, by 2 pi inside the bracket) whenever r crosses a
// root of the quantisation condition.
inline double Q_function(const OrbitCatalog& cat, double hbar, double r) {
    require(hbar > 0, "spec", "Q_function: hbar must be positive");
    require(cat.regular, "near-critical", "Q_function: catalog is not regular");
    double q = 0;
    for (const auto& p : cat.orbits)
        q += reduce_mod_2pi(pi - p.action_primitive / hbar + (pi / 2) * p.maslov -
                            r * p.period_primitive);
    return q / (2 * pi);
}

// All r in [r_lo, r_hi] with W/hbar - (pi/2) sigma + r t ≡ 0 (mod 2 pi): an
// arithmetic progression with gap 2 pi / t.
inline std::vector<double> omega_roots(const PeriodicOrbit& p, double hbar, double r_lo,
                                       double r_hi) {
    require(hbar > 0, "spec", "omega_roots: hbar must be positive");
    require(r_hi > r_lo, "spec", "omega_roots: window must have positive length");
    const double base = ((pi / 2) * p.maslov - p.action_primitive / hbar) / p.period_primitive;
    const double gap = 2 * pi / p.period_primitive;
    const double eps = 1e-12 * std::max({1.0, std::abs(r_lo), std::abs(r_hi)});
    const long long k_lo = static_cast<long long>(std::ceil((r_lo - eps - base) / gap));
    const long long k_hi = static_cast<long long>(std::floor((r_hi + eps - base) / gap));
    std::vector<double> roots;
    for (long long k = k_lo; k <= k_hi; ++k) roots.push_back(base + k * gap);
    return roots;
}

// N_min counts orbits with a root in [-r/2, r/2], N_max with [-3r/2, 3r/2].
inline std::pair<int, int> n_min_max(const OrbitCatalog& cat, double hbar, double r) {
    require(r > 0, "spec", "n_min_max: r must be positive");
    int nmin = 0, nmax = 0;
    for (const auto& p : cat.orbits) {
        nmin += !omega_roots(p, hbar, -r / 2, r / 2).empty();
        nmax += !omega_roots(p, hbar, -1.5 * r, 1.5 * r).empty();
    }
    return {nmin, nmax};
}

struct QuantisationReport {
    double E = 0;
    int N = 0;
    double r = 0;
    int n_min = 0;
    int n_max = 0;
    int n_local = 0;
    bool bracketing_holds = false;
    bool in_regime = true;          // every 3r-window holds at most one root per orbit
    bool count_bound_holds = false; // n_local <= number of primitive orbits
    std::vector<std::vector<double>> orbit_roots; // roots within [-3r/2, 3r/2], per orbit
};

inline QuantisationReport bracketing_check(const Spectrum& s, const OrbitCatalog& cat,
                                           double E, double hbar, double r) {
    require(std::abs(E - cat.energy) <= 1e-10 * std::max(1.0, std::abs(E)), "spec",
            "bracketing_check: catalog was built at a different energy");
    require(std::abs(hbar - s.geom.hbar) <= 1e-12 * s.geom.hbar, "spec",
            "bracketing_check: hbar does not match the spectrum geometry");
    require(cat.regular, "near-critical", "bracketing_check: catalog is not regular");
    QuantisationReport q;
    q.E = E;
    q.N = s.geom.N;
    q.r = r;
    std::tie(q.n_min, q.n_max) = n_min_max(cat, hbar, r);
    q.n_local = local_count(s, E, r);
    q.bracketing_holds = q.n_min <= q.n_local && q.n_local <= q.n_max;
    q.count_bound_holds = q.n_local <= static_cast<int>(cat.orbits.size());
    for (const auto& p : cat.orbits) {
        q.orbit_roots.push_back(omega_roots(p, hbar, -1.5 * r, 1.5 * r));
        if (q.orbit_roots.back().size() > 1) q.in_regime = false;
    }
    return q;
}

namespace detail {

// One orbit family continued across the energy window.  Centroids are kept
// per sample so a later root refinement can match against the tabulated
// shape nearest in energy.
struct OrbitFamily {
    int wind_x = 0;
    int wind_xi = 0;
    int maslov = 0;
    std::vector<double> E;
    std::vector<double> W;
    std::vector<double> cx, cxi;
};

inline std::pair<double, double> orbit_centroid(const PeriodicOrbit& p,
                                                const TorusGeometry& g) {
    double sx = 0, sxi = 0;
    for (const auto& q : p.samples) {
        sx += q.x;
        sxi += q.xi;
    }
    const double n = static_cast<double>(p.samples.size());
    return {wrap(sx / n, g.ell_x), wrap(sxi / n, g.ell_xi)};
}

inline double centroid_dist(double ax, double axi, double bx, double bxi,
                            const TorusGeometry& g) {
    double dx = ax - bx, dxi = axi - bxi;
    dx -= g.ell_x * std::round(dx / g.ell_x);
    dxi -= g.ell_xi * std::round(dxi / g.ell_xi);
    return std::hypot(dx, dxi);
}

// Pick the catalog orbit matching a family: same winding and Maslov data,
// nearest centroid.  Returns -1 when no orbit qualifies.
inline int match_orbit(const OrbitCatalog& cat, const std::vector<bool>& used, int wind_x,
                       int wind_xi, double cx, double cxi, const TorusGeometry& g) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cat.orbits.size(); ++i) {
        const auto& p = cat.orbits[i];
        if ((!used.empty() && used[i]) || p.wind_x != wind_x || p.wind_xi != wind_xi)
            continue;
        const auto c = orbit_centroid(p, g);
        const double d = centroid_dist(c.first, c.second, cx, cxi, g);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

// Match the orbits of one catalog onto the tracked families: any mismatch in
// count, winding or Maslov index means the topology changed in the window.
inline void extend_families(std::vector<OrbitFamily>& fam, const OrbitCatalog& cat,
                            const TorusGeometry& g) {
    require(cat.orbits.size() == fam.size(), "topology",
            "bs_predict: number of orbits changed inside the energy window");
    std::vector<bool> used(cat.orbits.size(), false);
    for (auto& f : fam) {
        const int i =
            match_orbit(cat, used, f.wind_x, f.wind_xi, f.cx.back(), f.cxi.back(), g);
        require(i >= 0, "topology",
                "bs_predict: an orbit family disappeared inside the energy window");
        const auto& p = cat.orbits[i];
        require(p.maslov == f.maslov, "topology",
                "bs_predict: Maslov index changed inside the energy window");
        used[i] = true;
        const auto c = orbit_centroid(p, g);
        f.E.push_back(cat.energy);
        f.W.push_back(p.action_primitive);
        f.cx.push_back(c.first);
        f.cxi.push_back(c.second);
    }
}

// Action of the family's orbit at energy E, from a fresh catalog, matched
// against the tabulated centroid nearest in energy.
inline double family_action(const FourierSymbol& H, const OrbitFamily& f, double E,
                            int grid_res) {
    std::size_t j = 0;
    for (std::size_t i = 1; i < f.E.size(); ++i)
        if (std::abs(f.E[i] - E) < std::abs(f.E[j] - E)) j = i;
    const auto cat = orbit_catalog(H, E, grid_res);
    const int i = match_orbit(cat, {}, f.wind_x, f.wind_xi, f.cx[j], f.cxi[j], H.geometry());
    require(i >= 0 && cat.orbits[i].maslov == f.maslov, "topology",
            "bs_predict: orbit family lost during root refinement");
    return cat.orbits[i].action_primitive;
}

} // namespace detail

// Predicted eigenvalues in E_window: per orbit family and integer k in
// k_range (inclusive), the solution of W(E) / (2 pi hbar) = k + sigma / 4.
// W(E) is tabulated by continuation over the window; each target bracketed
// by the table is then solved against the true recomputed action.
inline std::vector<double> bs_predict(const FourierSymbol& H,
                                      std::pair<double, double> E_window,
                                      const TorusGeometry& geom,
                                      std::pair<int, int> k_range, int grid_res = 96,
                                      int n_samples = 25) {
    require(H.geometry().N == geom.N && H.geometry().ell_x == geom.ell_x &&
            H.geometry().ell_xi == geom.ell_xi, "spec",
            "bs_predict: symbol/geometry mismatch");
    require(E_window.second > E_window.first, "spec", "bs_predict: empty energy window");
    require(n_samples >= 4, "spec", "bs_predict: need at least four samples");
    if (k_range.second < k_range.first) return {};
    const auto& g = H.geometry();

    std::vector<detail::OrbitFamily> fam;
    for (int j = 0; j < n_samples; ++j) {
        const double E =
            E_window.first + j * (E_window.second - E_window.first) / (n_samples - 1);
        const auto cat = orbit_catalog(H, E, grid_res);
        require(cat.regular, "near-critical",
                "bs_predict: energy window contains a non-regular value");
        if (j == 0) {
            for (const auto& p : cat.orbits) {
                const auto c = detail::orbit_centroid(p, g);
                fam.push_back({p.wind_x,
                               p.wind_xi,
                               p.maslov,
                               {cat.energy},
                               {p.action_primitive},
                               {c.first},
                               {c.second}});
            }
        } else {
            detail::extend_families(fam, cat, g);
        }
    }

    std::vector<double> predicted;
    for (const auto& f : fam) {
        const bool increasing = f.W.back() > f.W.front();
        for (int i = 0; i + 1 < n_samples; ++i)
            require((f.W[i + 1] > f.W[i]) == increasing, "topology",
                    "bs_predict: action is not monotone across the energy window");

        for (int k = k_range.first; k <= k_range.second; ++k) {
            const double target = 2 * pi * g.hbar * (k + f.maslov / 4.0);
            for (int i = 0; i + 1 < n_samples; ++i) {
                if ((target - f.W[i]) * (target - f.W[i + 1]) > 0) continue;
                predicted.push_back(brent_root(
                    [&](double e) {
                        return detail::family_action(H, f, e, grid_res) - target;
                    },
                    f.E[i], f.E[i + 1], 1e-12));
                break;
            }
        }
    }
    std::sort(predicted.begin(), predicted.end());
    return predicted;
}

inline std::string quantisation_report_json(const QuantisationReport& q) {
    auto root = JsonValue::object();
    root->set("E", q.E);
    root->set("N", q.N);
    root->set("r", q.r);
    root->set("n_min", q.n_min);
    root->set("n_max", q.n_max);
    root->set("n_local", q.n_local);
    root->set("bracketing_holds", q.bracketing_holds);
    root->set("in_regime", q.in_regime);
    root->set("count_bound_holds", q.count_bound_holds);
    auto orbits = JsonValue::array();
    for (const auto& roots : q.orbit_roots) {
        auto arr = JsonValue::array();
        for (double r : roots) arr->push(JsonValue::num(r));
        orbits->push(arr);
    }
    root->set("orbit_roots", orbits);
    return root->dump();
}

inline std::string sweep_csv(const std::vector<QuantisationReport>& reports) {
    std::string out = "E,n_min,n_local,n_max,holds\n";
    for (const auto& q : reports) {
        out += fmt17(q.E);
        out += ',' + std::to_string(q.n_min) + ',' + std::to_string(q.n_local) + ',' +
               std::to_string(q.n_max) + ',' + (q.bracketing_holds ? "1" : "0") + '\n';
    }
    return out;
}

} // namespace torusgw
