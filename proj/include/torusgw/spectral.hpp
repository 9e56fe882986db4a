#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "quantize.hpp"
#include "test_function.hpp"

// Dense Hermitian diagonalisation and the spectral sums entering the trace
// formula: smoothed counting sums, local eigenvalue counts, and traces of the
// propagator U(t) = exp(-i op t / hbar).

namespace torusgw {

struct Spectrum {
    TorusGeometry geom;
    std::vector<double> eigenvalues; // sorted ascending, N entries
    std::vector<int> group;          // multiplicity-group id per eigenvalue
    double residual = 0;             // max ||Av - lambda v|| / ||A||

    int group_count() const { return eigenvalues.empty() ? 0 : group.back() + 1; }
    int multiplicity(int gid) const {
        int c = 0;
        for (int gg : group) c += (gg == gid);
        return c;
    }
};

inline Spectrum eigendecompose(const HermitianOperator& A, double degeneracy_tol = -1) {
    const int N = A.geom.N;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(A.entries);
    require(solver.info() == Eigen::Success, "eigensolver",
            "eigendecomposition failed for operator '" + A.label + "'");
    Spectrum s;
    s.geom = A.geom;
    s.eigenvalues.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + N);

    const double norm = std::max(std::abs(s.eigenvalues.front()), std::abs(s.eigenvalues.back()));
    // residual ||AV - V Lambda||, column-wise max
    Matrix R = A.entries * solver.eigenvectors();
    R -= solver.eigenvectors() * solver.eigenvalues().asDiagonal();
    s.residual = (norm > 0) ? R.colwise().norm().maxCoeff() / norm : R.colwise().norm().maxCoeff();

    if (degeneracy_tol < 0) degeneracy_tol = 1e-9;
    const double gap = degeneracy_tol * std::max(norm, 1e-300);
    s.group.resize(N);
    int gid = 0;
    for (int i = 0; i < N; ++i) {
        if (i > 0 && s.eigenvalues[i] - s.eigenvalues[i - 1] > gap) ++gid;
        s.group[i] = gid;
    }
    return s;
}

// LHS of the trace formula: sum_n rho((E_n - E)/hbar).
inline double smoothed_counting(const Spectrum& s, const TestFunction& rho, double E) {
    double sum = 0;
    for (double En : s.eigenvalues) sum += rho.rho((En - E) / s.geom.hbar);
    return sum;
}

// #{n : |E_n - E| < r*hbar}, counted with multiplicity.
inline int local_count(const Spectrum& s, double E, double r) {
    require(r > 0, "spec", "local_count: r must be positive");
    int c = 0;
    for (double En : s.eigenvalues) c += (std::abs(En - E) < r * s.geom.hbar);
    return c;
}

// tr U(t) = sum_n e^{-i E_n t/hbar}.
inline cplx propagator_trace(const Spectrum& s, double t) {
    cplx sum = 0;
    for (double En : s.eigenvalues) {
        const double ph = -En * t / s.geom.hbar;
        sum += cplx(std::cos(ph), std::sin(ph));
    }
    return sum;
}

struct FourierIdentity {
    double lhs = 0, rhs = 0, deviation = 0;
};

// Self-consistency of the Fourier pair: sum_n rho((E_n-E)/hbar) must equal
// (1/2pi) int rho_hat(t) tr U(t) e^{iEt/hbar} dt up to quadrature error.
inline FourierIdentity fourier_identity_check(const Spectrum& s, const TestFunction& rho,
                                              double E, int t_quad) {
    const double T = rho.support(), hb = s.geom.hbar;
    require(double(t_quad) >= 20 * T * std::max(std::abs(E), hb) / (2 * pi * hb), "resolution",
            "fourier_identity_check: t_quad too small for the e^{iEt/hbar} oscillation");
    double fmax = hb; // highest frequency present in the t-integrand
    for (double En : s.eigenvalues) fmax = std::max(fmax, std::abs(En - E));
    fmax /= hb;
    const int npanel = std::max({(t_quad + 15) / 16,
                                 int(std::ceil(2 * T * fmax / (2 * pi))) * 2, 13});
    cplx acc = integrate_gl([&](double t) {
        const double ph = E * t / hb;
        return rho.rho_hat(t) * propagator_trace(s, t) * cplx(std::cos(ph), std::sin(ph));
    }, -T, T, npanel);
    FourierIdentity r;
    r.lhs = smoothed_counting(s, rho, E);
    r.rhs = acc.real() / (2 * pi);
    r.deviation = std::abs(r.lhs - r.rhs);
    return r;
}

inline std::string spectrum_csv(const Spectrum& s) {
    std::string out = "index,eigenvalue,multiplicity_group\n";
    for (size_t i = 0; i < s.eigenvalues.size(); ++i)
        out += std::to_string(i) + "," + fmt17(s.eigenvalues[i]) + "," +
               std::to_string(s.group[i]) + "\n";
    return out;
}

} // namespace torusgw
