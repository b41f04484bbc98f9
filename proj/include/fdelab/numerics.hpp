#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fdelab {

using ScalarFn = std::function<double(double)>;

enum class EndpointSingularity { none, left_algebraic_log };

struct QuadratureSpec {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    int max_subdivisions = 15;  ///< maximum bisection depth of the adaptive rule
    EndpointSingularity endpoint_singularity = EndpointSingularity::none;
};

struct Quadrature {
    double value = 0.0;
    double error_estimate = 0.0;
};

/// Adaptive Gauss–Kronrod quadrature of f on [a, b]. With a declared left singularity the
/// substitution x = a + e^y is applied, so f may be integrably singular at a.
[[nodiscard]] Quadrature integrate(const ScalarFn& f, double a, double b, const QuadratureSpec& spec = {});

/// ∫_{za}^{zb} g(z) dz for 0 ≤ za < zb, computed in y = log z. Meant for integrands written in terms
/// of the offset from a singular point, which keeps tiny offsets exact.
[[nodiscard]] Quadrature integrate_offset(const ScalarFn& g, double za, double zb, const QuadratureSpec& spec = {});

/// Root of a strictly monotone g. The bracket [lo, hi] is expanded geometrically until it
/// contains a sign change, then refined with TOMS 748 to full precision.
[[nodiscard]] double find_root_monotone(const ScalarFn& g, double lo, double hi, double tol = 1e-12,
                                        int max_expansions = 200);

struct OdeSpec {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double initial_step = 1e-4;
    double max_step = 0.5;
    double blowup_guard = 1e100;
};

using OdeState = std::vector<double>;
using OdeRhs = std::function<void(double t, const OdeState& y, OdeState& dydt)>;

/// Accepted steps of an adaptive integration, with node derivatives for Hermite interpolation.
struct Trajectory {
    std::vector<double> t;
    std::vector<OdeState> y;
    std::vector<OdeState> dy;

    [[nodiscard]] std::size_t size() const noexcept { return t.size(); }
    /// Index i with t[i] ≤ x < t[i+1], clamped to the table.
    [[nodiscard]] std::size_t segment(double x) const;
    /// Cubic Hermite interpolation of the state at x.
    [[nodiscard]] OdeState at(double x) const;
};

/// Dormand–Prince 5(4) with dense output on [t0, t1].
[[nodiscard]] Trajectory solve_ivp(const OdeRhs& rhs, OdeState y0, double t0, double t1, const OdeSpec& spec = {});

/// Fourth-order central difference with step 1e-5·scale; order is 1 or 2.
[[nodiscard]] double fd_derivative(const ScalarFn& f, double x, int order, double scale = 1.0);

/// Solves a tridiagonal system in place (Thomas algorithm); rhs becomes the solution.
/// lower[0] and upper[n-1] are ignored.
void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag, std::span<const double> upper,
                       std::span<double> rhs);

/// Least-squares coefficients of y against the given basis columns.
[[nodiscard]] std::vector<double> least_squares(const std::vector<std::vector<double>>& columns,
                                                std::span<const double> y);

/// Evenly spaced and log-spaced grids, endpoints included.
[[nodiscard]] std::vector<double> linspace(double a, double b, std::size_t count);
[[nodiscard]] std::vector<double> logspace(double a, double b, std::size_t count);

}  // namespace fdelab
