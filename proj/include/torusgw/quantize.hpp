#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "io.hpp"
#include "numerics.hpp"
#include "symbol.hpp"

// Finite-dimensional quantisation on C^N.  Weyl quantisation sums translation
// operators against the symbol's Fourier coefficients,
//
//   op_N(f) = sum_{m,n} f_{mn} T^{mn},   T^{mn} = e^{i pi n m/N} T^{m0} T^{0n},
//
// with (T^{m0} psi)_l = psi_{(l+m) mod N} and (T^{0n} psi)_l = e^{-2 pi i ln/N} psi_l.
// Anti-Wick quantisation averages coherent-state projectors against f.

namespace torusgw {

using Matrix = Eigen::MatrixXcd;

struct HermitianOperator {
    TorusGeometry geom;
    Matrix entries;
    std::string label;
};

struct UnitaryOperator {
    TorusGeometry geom;
    Matrix entries;
};

namespace detail {
// row-l phase of T^{mn}: pi*n*m/N - 2*pi*(l+m)*n/N = -(pi/N) n (m + 2l),
// reduced exactly modulo 2*pi in integer arithmetic
inline cplx translation_phase(int m, int n, int l, int N) {
    long long K = (long long)n * (m + 2ll * l);
    K %= 2ll * N;
    const double ph = -pi * double(K) / N;
    return cplx(std::cos(ph), std::sin(ph));
}
} // namespace detail

inline UnitaryOperator translation_op(const TorusGeometry& g, int m, int n) {
    const int N = g.N;
    Matrix T = Matrix::Zero(N, N);
    for (int l = 0; l < N; ++l) {
        const int col = ((l + m) % N + N) % N;
        T(l, col) = detail::translation_phase(m, n, l, N);
    }
    return {g, std::move(T)};
}

inline HermitianOperator weyl_op(const FourierSymbol& f, const TorusGeometry& g) {
    require(f.geometry().N == g.N && f.geometry().ell_x == g.ell_x &&
            f.geometry().ell_xi == g.ell_xi, "spec", "weyl_op: symbol/geometry mismatch");
    const int N = g.N;
    Matrix A = Matrix::Zero(N, N);
    for (const auto& t : f.terms()) {
        // inline T^{mn}: one nonzero per row
        for (int l = 0; l < N; ++l) {
            const int col = ((l + t.m) % N + N) % N;
            A(l, col) += t.c * detail::translation_phase(t.m, t.n, l, N);
        }
    }
    return {g, std::move(A), "weyl"};
}

// Discrete Laplacian -Delta: (-Delta psi)_l = -(N^2/ell_x^2)(psi_{l+1}+psi_{l-1}-2 psi_l),
// cyclic.  Note hbar^2 * (-Delta) equals weyl_op of the kinetic_cos model exactly.
inline HermitianOperator discrete_laplacian(const TorusGeometry& g) {
    const int N = g.N;
    const double w = double(N) * N / (g.ell_x * g.ell_x);
    Matrix A = Matrix::Zero(N, N);
    for (int l = 0; l < N; ++l) {
        A(l, l) = 2 * w;
        A(l, (l + 1) % N) -= w;
        A(l, (l + N - 1) % N) -= w;
    }
    return {g, std::move(A), "minus_laplacian"};
}

// Integral-representation build of op_N(f) from the callable symbol: row k,
// column m mod N for |k-m| <= N, each entry a single xi-integral of
// f(ell_x (k+m)/(2N), xi) against e^{2 pi i (k-m) xi / ell_xi} (trapezoid rule,
// exact for trigonometric polynomials once xi_quad clears the mode content).
template <typename F>
HermitianOperator weyl_op_direct(F&& f, const TorusGeometry& g, int xi_quad) {
    const int N = g.N;
    require(xi_quad >= 8 * N, "resolution", "weyl_op_direct: xi_quad must be at least 8N");
    Matrix A = Matrix::Zero(N, N);
    const double dxi = g.ell_xi / xi_quad;
    std::vector<double> fx(xi_quad);
    for (int k = 0; k < N; ++k)
        for (int m = k - N; m <= k + N; ++m) {
            const double xc = g.ell_x * double(k + m) / (2.0 * N);
            for (int q = 0; q < xi_quad; ++q) fx[q] = f(xc, q * dxi);
            cplx s = 0;
            for (int q = 0; q < xi_quad; ++q) {
                const double ph = 2 * pi * double(k - m) * q / double(xi_quad);
                s += fx[q] * cplx(std::cos(ph), std::sin(ph));
            }
            A(k, ((m % N) + N) % N) += s / double(xi_quad);
        }
    return {g, std::move(A), "weyl_direct"};
}

// Anti-Wick quantisation by quadrature of the coherent-state matrix elements:
//
//   A_jk = sqrt(1/(pi hbar)) sum_n e^{-((j-k)/N - n)^2 ell_x^2/(4 hbar)}
//          * int dx (1/ell_xi) int_0^{ell_xi} dxi f(x,xi)
//            e^{(i/hbar) xi ((j-k)/N - n) ell_x} e^{-(x - c_jkn)^2/hbar},
//
// with Gaussian centers c_jkn = ((j+k)/(2N) - n/2) ell_x.  The xi-phase is the
// pure Fourier mode q = (j-k) - nN, so the xi-integral is done first on a
// trapezoid grid shared across entries; the x-integral runs over a window of
// +-6 sqrt(hbar max(ell_x,ell_xi)) around each center (tail below e^{-18}) on
// a shared composite Gauss-Legendre grid.
template <typename F>
HermitianOperator anti_wick_op(F&& f, const TorusGeometry& g, int n_trunc = 3, int quad = 256) {
    const int N = g.N;
    const double hb = g.hbar, lx = g.ell_x, lxi = g.ell_xi;
    require(n_trunc >= 3, "spec", "anti_wick_op: n_trunc must be at least 3");

    const double wcut = 1e-12; // Gaussian prefactor below this is dropped
    const double gmax = std::sqrt(4 * hb * std::log(1 / wcut)) / lx;
    const int qmax = int(std::ceil(gmax * N)) + 1;
    require(quad >= 4 * (qmax + 4) && quad >= 64, "resolution",
            "anti_wick_op: quad too coarse for the xi oscillation at this N");

    const double hw = 6 * std::sqrt(hb * std::max(lx, lxi));
    const double sig = std::sqrt(hb);
    // x-panel layout covering every window [c-hw, c+hw]
    const double cmin = (0.0 / (2.0 * N) - 0.5 * n_trunc) * lx - hw;
    const double cmax = (double(2 * N - 2) / (2.0 * N) + 0.5 * n_trunc) * lx + hw;
    const double pw = 0.5 * sig; // panel width: half a Gaussian width, GL16 per panel
    const int npanel = int(std::ceil((cmax - cmin) / pw));
    const int nx = npanel * 16;
    std::vector<double> xnode(nx), xweight(nx);
    for (int p = 0; p < npanel; ++p) {
        const double c = cmin + (p + 0.5) * pw, r = 0.5 * pw;
        for (int i = 0; i < GL16::half; ++i) {
            xnode[p * 16 + i] = c - r * GL16::node[i];
            xnode[p * 16 + 15 - i] = c + r * GL16::node[i];
            xweight[p * 16 + i] = xweight[p * 16 + 15 - i] = r * GL16::weight[i];
        }
    }

    // G[q][node] = (1/ell_xi) int f(x,xi) e^{2 pi i q xi/ell_xi} dxi  (trapezoid)
    std::vector<double> fval(quad);
    std::vector<std::vector<cplx>> G(2 * qmax + 1, std::vector<cplx>(nx));
    for (int ix = 0; ix < nx; ++ix) {
        for (int q = 0; q < quad; ++q) fval[q] = f(xnode[ix], q * lxi / quad);
        for (int qq = -qmax; qq <= qmax; ++qq) {
            cplx s = 0;
            for (int q = 0; q < quad; ++q) {
                const double ph = 2 * pi * double(qq) * q / double(quad);
                s += fval[q] * cplx(std::cos(ph), std::sin(ph));
            }
            G[qq + qmax][ix] = s / double(quad);
        }
    }

    const double pref = std::sqrt(1 / (pi * hb));
    Matrix A = Matrix::Zero(N, N);
    for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k) {
            cplx ajk = 0;
            for (int n = -n_trunc; n <= n_trunc; ++n) {
                const double gg = double(j - k) / N - n;
                const double w = std::exp(-gg * gg * lx * lx / (4 * hb));
                if (w < wcut) continue;
                const int q = (j - k) - n * N;
                if (std::abs(q) > qmax) continue;
                const double c = (double(j + k) / (2.0 * N) - 0.5 * n) * lx;
                cplx xint = 0;
                const auto& Gq = G[q + qmax];
                for (int ix = 0; ix < nx; ++ix) {
                    const double d = xnode[ix] - c;
                    if (std::abs(d) > hw) continue;
                    xint += xweight[ix] * std::exp(-d * d / hb) * Gq[ix];
                }
                ajk += w * xint;
            }
            A(j, k) = pref * ajk;
        }
    return {g, std::move(A), "anti_wick"};
}

// Closed-form anti-Wick matrices for symbols depending on a single variable.
// axis x:  A_jk = delta_jk sum_n phi_n e^{2 pi i jn/N} e^{-hbar pi^2 n^2/ell_x^2}
// axis xi: A_jk = sum_n phi_{k-j+nN} e^{-hbar pi^2 (k-j+nN)^2/ell_xi^2}
enum class Axis { x, xi };

inline HermitianOperator anti_wick_special(const std::vector<std::pair<int, cplx>>& phi,
                                           Axis axis, const TorusGeometry& g) {
    const int N = g.N;
    double scale = 0;
    for (const auto& [n, c] : phi) scale = std::max(scale, std::abs(c));
    for (const auto& [n, c] : phi) {
        cplx mirror = 0;
        for (const auto& [n2, c2] : phi)
            if (n2 == -n) mirror += c2;
        require(std::abs(c - std::conj(mirror)) <= 1e-9 * std::max(scale, 1.0), "spec",
                "anti_wick_special: coefficients violate the reality constraint");
    }
    Matrix A = Matrix::Zero(N, N);
    if (axis == Axis::x) {
        for (const auto& [n, c] : phi) {
            const double damp = std::exp(-g.hbar * pi * pi * n * n / (g.ell_x * g.ell_x));
            for (int j = 0; j < N; ++j) {
                const double ph = 2 * pi * double(j) * n / N;
                A(j, j) += c * damp * cplx(std::cos(ph), std::sin(ph));
            }
        }
    } else {
        for (const auto& [n, c] : phi) {
            const double damp = std::exp(-g.hbar * pi * pi * n * n / (g.ell_xi * g.ell_xi));
            // entry (j,k) receives phi_q for every q = k-j+wN; equivalently the
            // cyclic diagonal k-j == q (mod N) at winding w = (q-(k-j))/N
            const int d = ((n % N) + N) % N; // k-j mod N
            for (int j = 0; j < N; ++j) A(j, (j + d) % N) += c * damp;
        }
    }
    return {g, std::move(A), "anti_wick_special"};
}

struct TraceCheck {
    cplx trace;
    double phase_space_average = 0;
    double deviation = 0;
    bool skipped = false;
};

// tr op_N(f) = N f_00 because tr T^{mn} = N delta_{m mod N,0} delta_{n mod N,0}
// only hits (0,0) when the symbol truncation stays below N.
inline TraceCheck operator_trace_check(const HermitianOperator& A, const FourierSymbol& f) {
    TraceCheck r;
    r.trace = A.entries.trace();
    r.phase_space_average = f.coefficient(0, 0).real();
    if (f.max_m() >= A.geom.N || f.max_n() >= A.geom.N) {
        r.skipped = true; // aliasing: T^{mn} with m or n a multiple of N also has a trace
        return r;
    }
    r.deviation = std::abs(r.trace - cplx(A.geom.N * r.phase_space_average));
    return r;
}

// --- matrix export (regression fixtures) ---

inline std::string matrix_csv(const Matrix& A) {
    std::string out = "row,col,re,im\n";
    for (int r = 0; r < A.rows(); ++r)
        for (int c = 0; c < A.cols(); ++c)
            out += std::to_string(r) + "," + std::to_string(c) + "," +
                   fmt17(A(r, c).real()) + "," + fmt17(A(r, c).imag()) + "\n";
    return out;
}

inline std::string matrix_json(const HermitianOperator& op) {
    require(op.geom.N <= 64, "spec", "matrix_json: JSON dump only for N <= 64");
    auto root = JsonValue::object();
    root->set("N", op.geom.N);
    root->set("label", op.label);
    auto rows = JsonValue::array();
    for (int r = 0; r < op.entries.rows(); ++r)
        for (int c = 0; c < op.entries.cols(); ++c) {
            auto e = JsonValue::array();
            e->push(JsonValue::integer(r));
            e->push(JsonValue::integer(c));
            e->push(op.entries(r, c).real());
            e->push(op.entries(r, c).imag());
            rows->push(e);
        }
    root->set("entries", rows);
    return root->dump();
}

} // namespace torusgw
