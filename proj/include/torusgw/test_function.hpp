#pragma once

#include <cmath>

#include "numerics.hpp"

namespace torusgw {

// Smooth test function pair (rho, rho_hat) with rho_hat a compactly supported
// bump: rho_hat(t) = exp(1 - 1/(1-(t/T)^2)) for |t| < T, zero otherwise, and
//
//   rho(x) = (1/2pi) int rho_hat(t) e^{ixt} dt = (1/pi) int_0^T rho_hat(t) cos(xt) dt.
//
// rho is evaluated by composite Gauss-Legendre panels whose count grows with
// the oscillation x*T, so accuracy is uniform in x.
class TestFunction {
public:
    explicit TestFunction(double T) : T_(T) {
        require(T > 0 && std::isfinite(T), "spec", "TestFunction: T must be positive");
    }

    double support() const { return T_; }

    double rho_hat(double t) const {
        const double u = t / T_;
        if (std::abs(u) >= 1) return 0;
        return std::exp(1 - 1 / (1 - u * u));
    }

    double rho(double x) const {
        const double osc = std::abs(x) * T_;
        if (osc > 2e4) return 0; // superpolynomially small far tail
        const int npanel = std::max(13, int(std::ceil(osc / (2 * pi))) * 2);
        const double v = integrate_gl([&](double t) { return rho_hat(t) * std::cos(x * t); },
                                      0.0, T_, npanel);
        return v / pi;
    }

private:
    double T_;
};

inline TestFunction make_test_function(double T) { return TestFunction(T); }

} // namespace torusgw
