#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "errors.hpp"

// Small numerical toolbox shared by the library: fixed-order Gauss-Legendre
// panels, adaptive Simpson integration, Brent root bracketing, and a monotone
// piecewise-cubic interpolant.

namespace torusgw {

// 16-point Gauss-Legendre rule on [-1,1] (positive half; rule is symmetric).
struct GL16 {
    static constexpr int half = 8;
    static constexpr double node[half] = {
        0.0950125098376374402, 0.2816035507792589132, 0.4580167776572273863,
        0.6178762444026437484, 0.7554044083550030339, 0.8656312023878317439,
        0.9445750230732325761, 0.9894009349916499326};
    static constexpr double weight[half] = {
        0.1894506104550684963, 0.1826034150449235889, 0.1691565193950025382,
        0.1495959888165767320, 0.1246289712555338720, 0.0951585116824927848,
        0.0622535239386478929, 0.0271524594117540949};
};

// Composite 16-point Gauss-Legendre over [a,b] with npanel equal panels.
template <typename F>
auto integrate_gl(F&& f, double a, double b, int npanel) -> decltype(f(a) * 1.0) {
    using R = decltype(f(a) * 1.0);
    R sum{};
    const double h = (b - a) / npanel;
    for (int p = 0; p < npanel; ++p) {
        const double c = a + (p + 0.5) * h, r = 0.5 * h;
        for (int i = 0; i < GL16::half; ++i) {
            const double d = r * GL16::node[i];
            sum += GL16::weight[i] * (f(c + d) + f(c - d)) * r;
        }
    }
    return sum;
}

namespace detail {
template <typename F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double fl = f(0.5 * (a + m)), fr = f(0.5 * (m + b));
    const double left  = (m - a) / 6 * (fa + 4 * fl + fm);
    const double right = (b - m) / 6 * (fm + 4 * fr + fb);
    const double err = left + right - whole;
    if (depth <= 0 || std::abs(err) < 15 * tol)
        return left + right + err / 15;
    return adaptive_simpson_rec(f, a, m, fa, fl, fm, left, 0.5 * tol, depth - 1)
         + adaptive_simpson_rec(f, m, b, fm, fr, fb, right, 0.5 * tol, depth - 1);
}
} // namespace detail

template <typename F>
double integrate_adaptive(F&& f, double a, double b, double tol = 1e-12, int max_depth = 40) {
    if (a == b) return 0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Brent's method on a bracketing interval [a,b] with f(a)*f(b) <= 0.
template <typename F>
double brent_root(F&& f, double a, double b, double xtol = 1e-13, int max_iter = 200) {
    double fa = f(a), fb = f(b);
    require(fa * fb <= 0, "no-bracket", "brent_root: interval does not bracket a root");
    if (fa == 0) return a;
    if (fb == 0) return b;
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(fc) < std::abs(fb)) { a = b; b = c; c = a; fa = fb; fb = fc; fc = fa; }
        const double tol1 = 2 * 1e-16 * std::abs(b) + 0.5 * xtol;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double p, q, r, s = fb / fa;
            if (a == c) { p = 2 * xm * s; q = 1 - s; }
            else {
                q = fa / fc; r = fb / fc;
                p = s * (2 * xm * q * (q - r) - (b - a) * (r - 1));
                q = (q - 1) * (r - 1) * (s - 1);
            }
            if (p > 0) q = -q;
            p = std::abs(p);
            if (2 * p < std::min(3 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d; d = p / q;
            } else { d = xm; e = d; }
        } else { d = xm; e = d; }
        a = b; fa = fb;
        b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
        fb = f(b);
        if ((fb > 0) == (fc > 0)) { c = a; fc = fa; d = b - a; e = d; }
    }
    return b;
}

// Monotonicity-preserving piecewise cubic (Fritsch-Carlson / PCHIP slopes).
// Used to interpolate tabulated smooth quantities like W(E) between samples.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const size_t n = x_.size();
        require(n >= 2 && y_.size() == n, "interp", "MonotoneCubic needs >= 2 samples");
        for (size_t i = 1; i < n; ++i)
            require(x_[i] > x_[i - 1], "interp", "MonotoneCubic: abscissae must increase");
        m_.resize(n);
        std::vector<double> d(n - 1);
        for (size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        m_[0] = d[0];
        m_[n - 1] = d[n - 2];
        for (size_t i = 1; i + 1 < n; ++i) {
            if (d[i - 1] * d[i] <= 0) m_[i] = 0;
            else {
                const double w1 = 2 * (x_[i + 1] - x_[i]) + (x_[i] - x_[i - 1]);
                const double w2 = (x_[i + 1] - x_[i]) + 2 * (x_[i] - x_[i - 1]);
                m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        // clamp endpoint slopes to preserve monotonicity on the end panels
        for (size_t i : {size_t(0), n - 1}) {
            const double di = d[i == 0 ? 0 : n - 2];
            if (di == 0) m_[i] = 0;
            else if (m_[i] / di < 0) m_[i] = 0;
            else if (std::abs(m_[i]) > 3 * std::abs(di)) m_[i] = 3 * di;
        }
    }

    double operator()(double x) const {
        const size_t i = panel(x);
        const double h = x_[i + 1] - x_[i], t = (x - x_[i]) / h;
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
        return h00 * y_[i] + h * h10 * m_[i] + h01 * y_[i + 1] + h * h11 * m_[i + 1];
    }

    double xmin() const { return x_.front(); }
    double xmax() const { return x_.back(); }

private:
    size_t panel(double x) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        size_t i = (it == x_.begin()) ? 0 : size_t(it - x_.begin()) - 1;
        return std::min(i, x_.size() - 2);
    }
    std::vector<double> x_, y_, m_;
};

} // namespace torusgw
