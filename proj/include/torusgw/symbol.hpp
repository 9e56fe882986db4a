#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <utility>
#include <vector>

#include "geometry.hpp"

// Classical observables on the torus as double Fourier series
//
//   f(x,xi) = sum_{m,n} f_{mn} exp(2*pi*i*(m*xi/ell_xi - n*x/ell_x)),
//
// with the reality constraint f_{-m,-n} = conj(f_{mn}).  The index m pairs
// with xi and n with x throughout the library.

namespace torusgw {

using cplx = std::complex<double>;

struct FourierCoeff {
    int  m = 0, n = 0;
    cplx c;
};

class FourierSymbol {
public:
    FourierSymbol() = default;
    FourierSymbol(TorusGeometry geom, std::vector<FourierCoeff> coeffs,
                  int max_m, int max_n, bool smooth = true)
        : geom_(geom), max_m_(max_m), max_n_(max_n), smooth_(smooth) {
        std::map<std::pair<int, int>, cplx> acc;
        for (const auto& t : coeffs) {
            require(std::abs(t.m) <= max_m && std::abs(t.n) <= max_n, "spec",
                    "FourierSymbol: coefficient index outside truncation bounds");
            acc[{t.m, t.n}] += t.c;
        }
        // enforce reality by averaging with the conjugate-reflected entry
        std::map<std::pair<int, int>, cplx> sym;
        for (const auto& [mn, c] : acc) {
            auto it = acc.find({-mn.first, -mn.second});
            cplx mirror = (it != acc.end()) ? it->second : cplx(0);
            sym[mn] = 0.5 * (c + std::conj(mirror));
        }
        double cmax = 0;
        for (const auto& [mn, c] : sym) cmax = std::max(cmax, std::abs(c));
        for (const auto& [mn, c] : sym)
            if (std::abs(c) > 1e-14 * cmax)
                terms_.push_back({mn.first, mn.second, c});
    }

    const TorusGeometry& geometry() const { return geom_; }
    const std::vector<FourierCoeff>& terms() const { return terms_; }
    int max_m() const { return max_m_; }
    int max_n() const { return max_n_; }
    bool smooth() const { return smooth_; }

    cplx coefficient(int m, int n) const {
        for (const auto& t : terms_)
            if (t.m == m && t.n == n) return t.c;
        return 0;
    }

    double eval(double x, double xi) const {
        cplx s = 0;
        for (const auto& t : terms_) s += t.c * phase(t, x, xi);
        return s.real();
    }

    // (df/dx, df/dxi)
    std::array<double, 2> gradient(double x, double xi) const {
        cplx sx = 0, sxi = 0;
        for (const auto& t : terms_) {
            const cplx e = t.c * phase(t, x, xi);
            sx  += e * cplx(0, -2 * pi * t.n / geom_.ell_x);
            sxi += e * cplx(0,  2 * pi * t.m / geom_.ell_xi);
        }
        return {sx.real(), sxi.real()};
    }

    // [[f_xx, f_xxi], [f_xxi, f_xixi]]
    std::array<std::array<double, 2>, 2> hessian(double x, double xi) const {
        cplx sxx = 0, sxxi = 0, sxixi = 0;
        for (const auto& t : terms_) {
            const cplx e  = t.c * phase(t, x, xi);
            const double px = -2 * pi * t.n / geom_.ell_x;
            const double pq =  2 * pi * t.m / geom_.ell_xi;
            sxx   += -px * px * e;
            sxxi  += -px * pq * e;
            sxixi += -pq * pq * e;
        }
        return {{{sxx.real(), sxxi.real()}, {sxxi.real(), sxixi.real()}}};
    }

    double coeff_abs_sum() const {
        double s = 0;
        for (const auto& t : terms_) s += std::abs(t.c);
        return s;
    }

private:
    cplx phase(const FourierCoeff& t, double x, double xi) const {
        const double ph = 2 * pi * (t.m * xi / geom_.ell_xi - t.n * x / geom_.ell_x);
        return cplx(std::cos(ph), std::sin(ph));
    }

    TorusGeometry geom_;
    std::vector<FourierCoeff> terms_;
    int max_m_ = 0, max_n_ = 0;
    bool smooth_ = true;
};

// Project a callable f(x,xi) onto Fourier modes |m| <= max_m, |n| <= max_n by
// the trapezoid rule on a uniform quad x quad grid (spectrally accurate for
// smooth periodic integrands).
template <typename F>
FourierSymbol fourier_coefficients(F&& f, const TorusGeometry& g,
                                   int max_m, int max_n, int quad_per_mode) {
    require(quad_per_mode >= 4 * std::max(std::max(max_m, max_n), 1), "resolution",
            "fourier_coefficients: quadrature grid too coarse for requested truncation");
    const int Q = quad_per_mode;
    std::vector<double> fv(size_t(Q) * Q);
    for (int j = 0; j < Q; ++j)
        for (int k = 0; k < Q; ++k)
            fv[size_t(j) * Q + k] = f(j * g.ell_x / Q, k * g.ell_xi / Q);

    // separable DFT: first over the x index j (mode n), then over k (mode m)
    std::vector<cplx> gnk(size_t(2 * max_n + 1) * Q);
    for (int n = -max_n; n <= max_n; ++n)
        for (int k = 0; k < Q; ++k) {
            cplx s = 0;
            for (int j = 0; j < Q; ++j) {
                const double ph = 2 * pi * n * j / double(Q);
                s += fv[size_t(j) * Q + k] * cplx(std::cos(ph), std::sin(ph));
            }
            gnk[size_t(n + max_n) * Q + k] = s;
        }
    std::vector<FourierCoeff> out;
    for (int m = -max_m; m <= max_m; ++m)
        for (int n = -max_n; n <= max_n; ++n) {
            cplx s = 0;
            for (int k = 0; k < Q; ++k) {
                const double ph = -2 * pi * m * k / double(Q);
                s += gnk[size_t(n + max_n) * Q + k] * cplx(std::cos(ph), std::sin(ph));
            }
            out.push_back({m, n, s / double(Q) / double(Q)});
        }
    return FourierSymbol(g, out, max_m, max_n);
}

enum class ModelKind { harper, potential_only, kinetic_cos, shifted_parabola, custom };

struct ModelSpec {
    ModelKind kind = ModelKind::harper;
    std::vector<FourierCoeff> coeffs; // used by potential_only and custom
    int max_m = 32, max_n = 32;

    ModelSpec() = default;
    ModelSpec(ModelKind k) : kind(k) {}
    ModelSpec(ModelKind k, std::vector<FourierCoeff> c, int mm = 32, int mn = 32)
        : kind(k), coeffs(std::move(c)), max_m(mm), max_n(mn) {}
};

inline FourierSymbol build_model(const ModelSpec& spec, const TorusGeometry& g) {
    switch (spec.kind) {
        case ModelKind::harper:
            return FourierSymbol(g, {{0, 1, 0.5}, {0, -1, 0.5}, {1, 0, 0.5}, {-1, 0, 0.5}}, 1, 1);
        case ModelKind::kinetic_cos: {
            const double a = g.ell_xi * g.ell_xi / (2 * pi * pi);
            return FourierSymbol(g, {{0, 0, a}, {1, 0, -0.5 * a}, {-1, 0, -0.5 * a}}, 1, 0);
        }
        case ModelKind::potential_only: {
            int max_n = 0;
            for (const auto& t : spec.coeffs) {
                require(t.m == 0, "spec", "potential_only: coefficients must have m == 0");
                max_n = std::max(max_n, std::abs(t.n));
            }
            return FourierSymbol(g, spec.coeffs, 0, max_n);
        }
        case ModelKind::shifted_parabola: {
            // (xi - L/2)^2 on [0,L): f_00 = L^2/12, f_m0 = L^2/(2 pi^2 m^2)
            const double L = g.ell_xi;
            std::vector<FourierCoeff> c{{0, 0, L * L / 12}};
            for (int m = 1; m <= spec.max_m; ++m) {
                const double v = L * L / (2 * pi * pi * m * m);
                c.push_back({m, 0, v});
                c.push_back({-m, 0, v});
            }
            return FourierSymbol(g, c, std::max(spec.max_m, 0), 0, /*smooth=*/false);
        }
        case ModelKind::custom: {
            double scale = 0;
            for (const auto& t : spec.coeffs) scale = std::max(scale, std::abs(t.c));
            for (const auto& t : spec.coeffs) {
                cplx mirror = 0;
                for (const auto& u : spec.coeffs)
                    if (u.m == -t.m && u.n == -t.n) mirror += u.c;
                require(std::abs(t.c - std::conj(mirror)) <= 1e-9 * std::max(scale, 1.0), "spec",
                        "custom symbol: coefficients violate the reality constraint");
            }
            return FourierSymbol(g, spec.coeffs, spec.max_m, spec.max_n);
        }
    }
    throw Error("spec", "build_model: unknown model kind");
}

} // namespace torusgw
