#include "fdelab/numerics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>
#include <fmt/format.h>

#include "fdelab/error.hpp"

namespace fdelab {

namespace {

constexpr double kOffsetDepth = 80.0;  // e^{-80}: neglected head of a substituted integral

Quadrature gk(const ScalarFn& f, double a, double b, const QuadratureSpec& spec) {
    auto guarded = [&](double x) {
        const double v = f(x);
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, fmt::format("integrand not finite at {}", x));
        return v;
    };
    double err = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
        guarded, a, b, static_cast<unsigned>(spec.max_subdivisions), spec.rel_tol, &err, &l1);
    if (!std::isfinite(value)) throw Error(ErrorCode::NonFinite, "quadrature value not finite");
    const double allowed = std::max(spec.abs_tol, spec.rel_tol * std::abs(value));
    if (err > allowed)
        throw Error(ErrorCode::NonConvergent,
                    fmt::format("quadrature on [{}, {}] error {} exceeds {}", a, b, err, allowed));
    return {value, err};
}

}  // namespace

Quadrature integrate(const ScalarFn& f, double a, double b, const QuadratureSpec& spec) {
    if (!(a < b)) throw Error(ErrorCode::OutOfDomain, fmt::format("need a < b, got [{}, {}]", a, b));
    if (spec.endpoint_singularity == EndpointSingularity::left_algebraic_log)
        return integrate_offset([&](double z) { return f(a + z); }, 0.0, b - a, spec);
    return gk(f, a, b, spec);
}

Quadrature integrate_offset(const ScalarFn& g, double za, double zb, const QuadratureSpec& spec) {
    if (!(za >= 0.0 && za < zb)) throw Error(ErrorCode::OutOfDomain, fmt::format("need 0 <= za < zb, got [{}, {}]", za, zb));
    const double yb = std::log(zb);
    const double ya = za > 0.0 ? std::log(za) : yb - kOffsetDepth;
    auto h = [&](double y) {
        const double z = std::exp(y);
        return g(z) * z;
    };
    return gk(h, ya, yb, spec);
}

double find_root_monotone(const ScalarFn& g, double lo, double hi, double tol, int max_expansions) {
    if (!(lo < hi)) std::swap(lo, hi);
    if (lo == hi) hi = lo + 1.0;
    double glo = g(lo);
    double ghi = g(hi);
    for (int k = 0; k < max_expansions && glo * ghi > 0.0; ++k) {
        const double width = hi - lo;
        const bool increasing = ghi > glo;
        // move the end whose sign says the root lies beyond it
        const bool root_below = increasing ? (glo > 0.0) : (glo < 0.0);
        if (root_below) {
            hi = lo;
            ghi = glo;
            lo -= width;
            glo = g(lo);
        } else {
            lo = hi;
            glo = ghi;
            hi += width;
            ghi = g(hi);
        }
        if (!std::isfinite(glo) || !std::isfinite(ghi)) break;
    }
    if (!(glo * ghi <= 0.0) || !std::isfinite(glo) || !std::isfinite(ghi))
        throw Error(ErrorCode::NoBracket, fmt::format("no sign change found near [{}, {}]", lo, hi));
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;
    boost::uintmax_t iters = 300;
    const auto bracket = boost::math::tools::toms748_solve(
        g, lo, hi, glo, ghi,
        [tol](double a, double b) { return std::abs(b - a) <= std::max(tol * 1e-3, 4e-16 * std::abs(a)); }, iters);
    const double a = bracket.first;
    const double b = bracket.second;
    return std::abs(g(a)) <= std::abs(g(b)) ? a : b;
}

std::size_t Trajectory::segment(double x) const {
    if (t.size() < 2) return 0;
    auto it = std::upper_bound(t.begin(), t.end(), x);
    std::size_t i = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
    return std::min(i, t.size() - 2);
}

OdeState Trajectory::at(double x) const {
    if (t.empty()) throw Error(ErrorCode::OutOfDomain, "empty trajectory");
    if (t.size() == 1) return y.front();
    const std::size_t i = segment(x);
    const double h = t[i + 1] - t[i];
    const double u = (x - t[i]) / h;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    OdeState out(y[i].size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = h00 * y[i][k] + h10 * h * dy[i][k] + h01 * y[i + 1][k] + h11 * h * dy[i + 1][k];
    return out;
}

Trajectory solve_ivp(const OdeRhs& rhs, OdeState y0, double t0, double t1, const OdeSpec& spec) {
    namespace odeint = boost::numeric::odeint;
    for (double v : y0)
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "initial state not finite");
    Trajectory traj;
    auto system = [&](const OdeState& y, OdeState& dydt, double t) { rhs(t, y, dydt); };
    auto observe = [&](const OdeState& y, double t) {
        for (double v : y)
            if (!std::isfinite(v) || std::abs(v) > spec.blowup_guard)
                throw Error(ErrorCode::BlowupGuardTripped, fmt::format("state magnitude exceeded guard at t = {}", t));
        OdeState d(y.size());
        rhs(t, y, d);
        traj.t.push_back(t);
        traj.y.push_back(y);
        traj.dy.push_back(std::move(d));
    };
    auto stepper = odeint::make_dense_output(spec.abs_tol, spec.rel_tol, spec.max_step,
                                             odeint::runge_kutta_dopri5<OdeState>());
    try {
        odeint::integrate_adaptive(stepper, system, y0, t0, t1, spec.initial_step, observe);
    } catch (const odeint::step_adjustment_error& e) {
        throw Error(ErrorCode::StepUnderflow, e.what());
    } catch (const odeint::no_progress_error& e) {
        throw Error(ErrorCode::StepUnderflow, e.what());
    }
    return traj;
}

double fd_derivative(const ScalarFn& f, double x, int order, double scale) {
    const double h = 1e-5 * scale;
    const double fp1 = f(x + h), fm1 = f(x - h), fp2 = f(x + 2 * h), fm2 = f(x - 2 * h);
    double v = 0.0;
    if (order == 1) {
        v = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h);
    } else if (order == 2) {
        v = (-fp2 + 16 * fp1 - 30 * f(x) + 16 * fm1 - fm2) / (12 * h * h);
    } else {
        throw Error(ErrorCode::OutOfDomain, "derivative order must be 1 or 2");
    }
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, fmt::format("stencil not finite at {}", x));
    return v;
}

void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag, std::span<const double> upper,
                       std::span<double> rhs) {
    const std::size_t n = diag.size();
    if (n == 0) return;
    std::vector<double> c(n);
    double denom = diag[0];
    c[0] = n > 1 ? upper[0] / denom : 0.0;
    rhs[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - lower[i] * c[i - 1];
        c[i] = i + 1 < n ? upper[i] / denom : 0.0;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

std::vector<double> least_squares(const std::vector<std::vector<double>>& columns, std::span<const double> y) {
    const auto rows = static_cast<Eigen::Index>(y.size());
    const auto cols = static_cast<Eigen::Index>(columns.size());
    Eigen::MatrixXd a(rows, cols);
    Eigen::VectorXd b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        b(i) = y[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = columns[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
    return {x.data(), x.data() + x.size()};
}

std::vector<double> linspace(double a, double b, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = a;
        return out;
    }
    for (std::size_t i = 0; i < count; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
    out.back() = b;
    return out;
}

std::vector<double> logspace(double a, double b, std::size_t count) {
    auto out = linspace(std::log(a), std::log(b), count);
    for (double& v : out) v = std::exp(v);
    if (count > 0) {
        out.front() = a;
        out.back() = b;
    }
    return out;
}

}  // namespace fdelab
