#include "fdelab/pde_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Sparse>
#include <fmt/format.h>

#include "fdelab/error.hpp"
#include "fdelab/numerics.hpp"

namespace fdelab {

namespace {

double a0_of(const ModelParams& p) { return 2.0 * (p.n - 1.0) * (p.n - 2.0 - p.n * p.m) / (1.0 - p.m); }
double b1_of(const ModelParams& p) { return (2.0 * p.m - 1.0) / (1.0 - p.m); }
double b2_of(const ModelParams& p) { return (p.n - 2.0 - p.m * (p.n + 2.0)) / (1.0 - p.m); }

// log(e^a + e^b)
double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == -std::numeric_limits<double>::infinity()) return a;
    return a + std::log1p(std::exp(b - a));
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// physical barriers

PhysicalBarrier::PhysicalBarrier(const Matching& match, Sign s, double eps, double tau0)
    : match_(&match), sign_(s), eps_(eps), tau0_(tau0) {
    if (!(eps >= 0.0 && eps < 0.25))
        throw Error(ErrorCode::EpsilonOutOfRange, fmt::format("epsilon = {} outside [0, 1/4)", eps));
}

double PhysicalBarrier::check_gap(double gap) const {
    if (!(gap > 0.0)) throw Error(ErrorCode::TimeBeyondExtinction, fmt::format("gap T - t = {} is not positive", gap));
    const double tau = -std::log(gap);
    if (tau < tau0_ * (1.0 - 1e-12))
        throw Error(ErrorCode::OutOfDomain, fmt::format("tau = {} precedes the barrier start {}", tau, tau0_));
    return tau;
}

double PhysicalBarrier::log_r1(double gap) const {
    const auto& p = match_->outer().params();
    (void)check_gap(gap);
    return match_->xi1() + p.A * std::pow(gap, -p.gamma);
}

double PhysicalBarrier::w_bar(double xi, double tau) const { return match_->glued(sign_, eps_, xi, tau).value; }

double PhysicalBarrier::log_u(double s, double gap) const {
    const auto& p = match_->outer().params();
    const double tau = check_gap(gap);
    const double xi = s - p.A * std::pow(gap, -p.gamma);
    return ((1.0 + p.gamma) * std::log(gap) - 2.0 * s + std::log(w_bar(xi, tau))) / (1.0 - p.m);
}

double PhysicalBarrier::log_u_origin(double gap) const {
    const auto& p = match_->outer().params();
    const double tau = check_gap(gap);
    const double C = match_->solve(sign_, eps_, tau);
    const double k = 1.0 + sign_factor(sign_) * eps_;
    return ((1.0 + p.gamma) * std::log(gap) + 2.0 * C - 2.0 * p.A * std::pow(gap, -p.gamma) - std::log(k)) /
               (1.0 - p.m) +
           std::log(p.lambda);
}

double PhysicalBarrier::log_u_inner_formula(double s, double gap) const {
    const auto& p = match_->outer().params();
    const double tau = check_gap(gap);
    const double shift = p.A * std::pow(gap, -p.gamma);
    if (s - shift > match_->xi1() * (1.0 + 1e-12))
        throw Error(ErrorCode::OutOfDomain, "inner formula holds only inside r1(t)");
    const double C = match_->solve(sign_, eps_, tau);
    const double k = 1.0 + sign_factor(sign_) * eps_;
    const double pre = ((1.0 + p.gamma) * std::log(gap) + 2.0 * C - 2.0 * shift - std::log(k)) / (1.0 - p.m);
    return pre + std::log(match_->inner().v0(std::exp(s - shift + C)));
}

double PhysicalBarrier::log_u_outer_formula(double s, double gap) const {
    const auto& p = match_->outer().params();
    const double tau = check_gap(gap);
    const double xi = s - p.A * std::pow(gap, -p.gamma);
    const double v = match_->outer_jet(sign_, xi, tau).value;
    return ((1.0 + p.gamma) * std::log(gap) - 2.0 * s + std::log(v)) / (1.0 - p.m);
}

std::pair<PhysicalBarrier, PhysicalBarrier> assemble_u_barriers(const Matching& match, double eps,
                                                                const EpsilonBounds& bounds, double tau0) {
    const double cap = std::min(bounds.eps1, bounds.eps2);
    if (!(eps >= 0.0 && eps < cap))
        throw Error(ErrorCode::EpsilonOutOfRange,
                    fmt::format("epsilon = {} must lie in [0, min(eps1, eps2)) = [0, {})", eps, cap));
    return {PhysicalBarrier(match, Sign::plus, eps, tau0), PhysicalBarrier(match, Sign::minus, eps, tau0)};
}

std::size_t u_ordering_violations(const PhysicalBarrier& upper, const PhysicalBarrier& lower,
                                  std::span<const double> xis, std::span<const double> taus) {
    const auto& p = upper.matching().outer().params();
    std::size_t bad = 0;
    for (double tau : taus) {
        const double gap = std::exp(-tau);
        const double shift = p.A * std::pow(gap, -p.gamma);
        auto check = [&](double up, double lo) {
            if (!(up > lo && std::isfinite(lo))) ++bad;
        };
        check(upper.log_u_origin(gap), lower.log_u_origin(gap));
        for (double xi : xis) check(upper.log_u(xi + shift, gap), lower.log_u(xi + shift, gap));
    }
    return bad;
}

CornerTerm weak_corner_term(const Matching& match, Sign s, double eps, double tau_lo, double tau_hi, int points) {
    if (!(tau_hi > tau_lo) || points < 3) throw Error(ErrorCode::InvalidParameter, "corner term needs a tau window");
    const auto& p = match.outer().params();
    const double g = p.gamma, m = p.m, A = p.A, n = p.n;
    const double log_sphere = std::log(2.0) + 0.5 * n * std::log(std::numbers::pi) - std::lgamma(0.5 * n);
    const double log_pref = std::log((n - 1.0) / (1.0 - m)) + log_sphere;
    const double ninf = -std::numeric_limits<double>::infinity();
    double log_pos = ninf, log_neg = ninf;
    const auto taus = linspace(tau_lo, tau_hi, static_cast<std::size_t>(points));
    const double h = (tau_hi - tau_lo) / (points - 1);
    // signed log-integrand at each node
    std::vector<double> logs(taus.size(), ninf);
    std::vector<int> signs(taus.size(), 0);
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const double tau = taus[i], log_gap = -tau;
        const CornerSlopes c = match.corner(s, eps, tau);
        const double jump = c.right - c.left;
        if (jump == 0.0) continue;
        const double psi = match.outer_jet(s, match.xi1(), tau).value;
        const double lr = match.xi1() + A * std::exp(g * tau);  // log r₁
        // E = (r₁² + 4γ²A²g^{−2γ−2}r₁⁴)^{1/2} and the surface factor (1 + ṙ₁²)^{1/2}, ṙ₁ = Aγg^{−γ−1}r₁
        const double log_E =
            lr + 0.5 * log_add(0.0, std::log(4.0 * g * g * A * A) - (2.0 * g + 2.0) * log_gap + 2.0 * lr);
        const double log_tilt = 0.5 * log_add(0.0, 2.0 * (std::log(A * g) - (g + 1.0) * log_gap + lr));
        logs[i] = log_pref + (1.0 + g) * m / (1.0 - m) * log_gap - 2.0 * lr - log_E +
                  (2.0 * m - 1.0) / (1.0 - m) * (std::log(psi) - 2.0 * lr) + std::log(std::abs(jump)) +
                  (n - 1.0) * lr + log_tilt + log_gap;  // dt = g dτ
        signs[i] = jump > 0.0 ? 1 : -1;
    }
    // the integrand varies by e^{O(e^{γτ})} across a panel, so panels of one sign are integrated
    // exactly for a log-linear integrand; mixed panels fall back to the trapezoid
    auto add = [&](int sign, double value) { (sign > 0 ? log_pos : log_neg) = log_add(sign > 0 ? log_pos : log_neg, value); };
    for (std::size_t i = 0; i + 1 < taus.size(); ++i) {
        const double a = logs[i], b = logs[i + 1];
        if (signs[i] != 0 && signs[i] == signs[i + 1]) {
            const double d = std::abs(b - a);
            const double shape = d < 1e-12 ? 0.0 : std::log(-std::expm1(-d) / d);
            add(signs[i], std::log(h) + std::max(a, b) + shape);
        } else {
            if (signs[i] != 0) add(signs[i], std::log(0.5 * h) + a);
            if (signs[i + 1] != 0) add(signs[i + 1], std::log(0.5 * h) + b);
        }
    }
    CornerTerm out;
    out.tau_lo = tau_lo;
    out.tau_hi = tau_hi;
    if (log_pos == ninf && log_neg == ninf) return out;
    if (log_pos >= log_neg) {
        out.sign = 1;
        out.log_magnitude = log_neg == ninf ? log_pos : log_pos + std::log1p(-std::exp(log_neg - log_pos));
    } else {
        out.sign = -1;
        out.log_magnitude = log_pos == ninf ? log_neg : log_neg + std::log1p(-std::exp(log_pos - log_neg));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// solver

namespace {

// Unknown v = log w̄ = log w + (1+γ)τ, advanced in τ:
//   v_τ = e^{γτ}{e^{−v}[(n−1)(v_ξξ + (1+b₁)v_ξ² + b₂v_ξ) − a₀ + S] + Aγ v_ξ} + (1 + γ).
// Positivity of w is built in, and w = a₀(T−t) has v_τ ≡ γ, which TR-BDF2 integrates exactly.
class Stepper {
public:
    Stepper(const ModelParams& p, const GridSpec& grid, const SolverSpec& spec, const BoundaryFn& boundary,
            const SourceFn& source)
        : p_(p), spec_(spec), boundary_(boundary), source_(source), n_(grid.points), dx_(grid.dxi()),
          a0_(a0_of(p)), q_(1.0 + b1_of(p)), b2_(b2_of(p)),
          xi_(linspace(grid.xi_lo, grid.xi_hi, static_cast<std::size_t>(grid.points))) {}

    const std::vector<double>& xi() const { return xi_; }

    // TR-BDF2 step from tau0 to tau1; false when Newton fails or the state stops being finite
    bool step(std::vector<double>& v, double tau0, double tau1, bool damped) const {
        if (damped) {
            // two implicit Euler half steps damp the start-up transient
            const double mid = 0.5 * (tau0 + tau1);
            std::vector<double> trial = v;
            if (!euler_step(trial, tau0, mid) || !euler_step(trial, mid, tau1)) return false;
            v = std::move(trial);
            return true;
        }
        constexpr double gs = 2.0 - std::numbers::sqrt2;
        const double h = tau1 - tau0;
        const std::vector<double> f0 = rhs(v, tau0);
        std::vector<double> base(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) base[i] = v[i] + 0.5 * gs * h * f0[i];
        std::vector<double> stage = v;
        if (!solve_stage(stage, base, 0.5 * gs * h, tau0 + gs * h)) return false;
        const double c1 = 1.0 / (gs * (2.0 - gs)), c0 = (1.0 - gs) * (1.0 - gs) / (gs * (2.0 - gs));
        for (std::size_t i = 0; i < v.size(); ++i) base[i] = c1 * stage[i] - c0 * v[i];
        std::vector<double> next = stage;
        if (!solve_stage(next, base, (1.0 - gs) / (2.0 - gs) * h, tau1)) return false;
        v = std::move(next);
        return true;
    }

    // log w̄ at the two ends
    std::pair<double, double> ends(double tau) const {
        const auto [left, right] = boundary_(std::exp(-tau));
        if (!(left > 0.0 && right > 0.0))
            throw Error(ErrorCode::PositivityLost, fmt::format("boundary data not positive at tau = {}", tau));
        const double lift = (1.0 + p_.gamma) * tau;
        return {std::log(left) + lift, std::log(right) + lift};
    }

private:
    std::size_t idx(int i) const { return static_cast<std::size_t>(i); }

    bool euler_step(std::vector<double>& v, double tau0, double tau1) const {
        std::vector<double> next = v;
        if (!solve_stage(next, v, tau1 - tau0, tau1)) return false;
        v = std::move(next);
        return true;
    }

    double bracket(const std::vector<double>& v, int i, double tau) const {
        const double d2 = (v[idx(i + 1)] - 2.0 * v[idx(i)] + v[idx(i - 1)]) / (dx_ * dx_);
        const double d1 = (v[idx(i + 1)] - v[idx(i - 1)]) / (2.0 * dx_);
        double b = (p_.n - 1.0) * (d2 + q_ * d1 * d1 + b2_ * d1) - a0_;
        if (source_) b += source_(xi_[idx(i)], std::exp(-tau));
        return b;
    }

    double rhs_at(const std::vector<double>& v, int i, double tau) const {
        const double d1 = (v[idx(i + 1)] - v[idx(i - 1)]) / (2.0 * dx_);
        const double e = std::exp(p_.gamma * tau);
        return e * (std::exp(-v[idx(i)]) * bracket(v, i, tau) + p_.A * p_.gamma * d1) + 1.0 + p_.gamma;
    }

    std::vector<double> rhs(const std::vector<double>& v, double tau) const {
        std::vector<double> f(v.size(), 0.0);
        for (int i = 1; i + 1 < n_; ++i) f[idx(i)] = rhs_at(v, i, tau);
        return f;
    }

    // solves v − a·G(v, tau) = base with Dirichlet ends at tau
    bool solve_stage(std::vector<double>& v, const std::vector<double>& base, double a, double tau) const {
        const auto [left, right] = ends(tau);
        v.front() = left;
        v.back() = right;
        const double e = std::exp(p_.gamma * tau), n1 = p_.n - 1.0, drift = p_.A * p_.gamma;
        const Eigen::Index N = n_;
        Eigen::SparseMatrix<double> J(N, N);
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(3 * n_));
        Eigen::VectorXd G(N);
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        bool analysed = false;
        for (int it = 0; it < spec_.max_newton; ++it) {
            trip.clear();
            G(0) = 0.0;
            G(N - 1) = 0.0;
            trip.emplace_back(0, 0, 1.0);
            trip.emplace_back(N - 1, N - 1, 1.0);
            for (int i = 1; i + 1 < n_; ++i) {
                const double d1 = (v[idx(i + 1)] - v[idx(i - 1)]) / (2.0 * dx_);
                const double damp = std::exp(-v[idx(i)]);
                const double br = bracket(v, i, tau);
                G(i) = v[idx(i)] - a * (e * (damp * br + drift * d1) + 1.0 + p_.gamma) - base[idx(i)];
                const double side = damp * n1 / (dx_ * dx_);
                const double tilt = (damp * n1 * (2.0 * q_ * d1 + b2_) + drift) / (2.0 * dx_);
                const double diag = -damp * br - 2.0 * damp * n1 / (dx_ * dx_);
                trip.emplace_back(i, i - 1, -a * e * (side - tilt));
                trip.emplace_back(i, i, 1.0 - a * e * diag);
                trip.emplace_back(i, i + 1, -a * e * (side + tilt));
            }
            if (!G.allFinite()) return false;
            J.setFromTriplets(trip.begin(), trip.end());
            if (!analysed) {
                lu.analyzePattern(J);
                analysed = true;
            }
            lu.factorize(J);
            if (lu.info() != Eigen::Success) return false;
            const Eigen::VectorXd delta = lu.solve(G);
            if (!delta.allFinite()) return false;
            const double change = delta.cwiseAbs().maxCoeff();
            // at most one unit of log w̄ per iteration keeps e^{−v} from overflowing
            const double lam = change > spec_.max_log_change ? spec_.max_log_change / change : 1.0;
            for (int i = 1; i + 1 < n_; ++i) v[idx(i)] -= lam * delta(i);
            if (lam == 1.0 && change <= spec_.newton_tol) return true;
        }
        return false;
    }

    ModelParams p_;
    SolverSpec spec_;
    const BoundaryFn& boundary_;
    const SourceFn& source_;
    int n_;
    double dx_;
    double a0_, q_, b2_;
    std::vector<double> xi_;
};

// advances v across [tau0, tau1], halving on failure; returns the number of rejected attempts
int advance(const Stepper& st, std::vector<double>& v, double tau0, double tau1, bool damped, int depth,
            int max_depth) {
    std::vector<double> trial = v;
    if (st.step(trial, tau0, tau1, damped)) {
        v = std::move(trial);
        return 0;
    }
    if (depth >= max_depth)
        throw Error(ErrorCode::NewtonDiverged,
                    fmt::format("no convergent step at tau = {} after {} halvings", tau0, depth));
    const double mid = 0.5 * (tau0 + tau1);
    int rejected = 1 + advance(st, v, tau0, mid, damped, depth + 1, max_depth);
    rejected += advance(st, v, mid, tau1, damped, depth + 1, max_depth);
    return rejected;
}

SimState to_state(const std::vector<double>& v, double tau, double gamma) {
    SimState s{std::exp(-tau), std::vector<double>(v.size())};
    for (std::size_t i = 0; i < v.size(); ++i) s.w[i] = std::exp(v[i] - (1.0 + gamma) * tau);
    return s;
}

}  // namespace

SimTrajectory solve_radial_fde(const ModelParams& p, std::vector<double> w0, double tau0, double tau1,
                               const BoundaryFn& boundary, const GridSpec& grid, const SolverSpec& solver,
                               const SourceFn& source, int save_every) {
    if (grid.points < 5 || !(grid.xi_hi > grid.xi_lo) || !(grid.dtau > 0.0))
        throw Error(ErrorCode::InvalidParameter, "solver grid too coarse or empty");
    if (static_cast<int>(w0.size()) != grid.points)
        throw Error(ErrorCode::InvalidParameter,
                    fmt::format("initial data has {} values for {} grid points", w0.size(), grid.points));
    if (!(tau1 > tau0)) throw Error(ErrorCode::InvalidParameter, "need tau1 > tau0");
    const Stepper st(p, grid, solver, boundary, source);
    std::vector<double> v(w0.size());
    for (std::size_t i = 0; i < w0.size(); ++i) {
        if (!(w0[i] > 0.0)) throw Error(ErrorCode::PositivityLost, "initial data must be positive");
        v[i] = std::log(w0[i]) + (1.0 + p.gamma) * tau0;
    }
    SimTrajectory out;
    out.xi = st.xi();
    const int steps = std::max(1, static_cast<int>(std::ceil((tau1 - tau0) / grid.dtau - 1e-9)));
    const auto taus = linspace(tau0, tau1, static_cast<std::size_t>(steps + 1));
    out.frames.push_back(to_state(v, tau0, p.gamma));
    for (int k = 0; k < steps; ++k) {
        const double ta = taus[static_cast<std::size_t>(k)], tb = taus[static_cast<std::size_t>(k + 1)];
        out.rejected += advance(st, v, ta, tb, k < solver.startup_steps, 0, solver.max_halvings);
        ++out.steps;
        if ((k + 1) % std::max(1, save_every) == 0 || k + 1 == steps) out.frames.push_back(to_state(v, tb, p.gamma));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// manufactured solution

double ManufacturedCase::value(double xi, double gap) const {
    return gap * (a0_of(p) + (0.5 + 0.25 * gap) * std::sin(xi));
}

double ManufacturedCase::source(double xi, double gap) const {
    const double amp = gap * (0.5 + 0.25 * gap);
    const double w = value(xi, gap), w1 = amp * std::cos(xi), w2 = -amp * std::sin(xi);
    const double w_t = -(a0_of(p) + (0.5 + 0.5 * gap) * std::sin(xi));  // d/dt = −d/dg
    const double c = p.A * p.gamma * std::pow(gap, -p.gamma - 1.0);
    const double f = (p.n - 1.0) * (w2 / w + b1_of(p) * w1 * w1 / (w * w) + b2_of(p) * w1 / w) - a0_of(p) + c * w1;
    return w_t - f;
}

ConvergenceReport manufactured_convergence(const ModelParams& p, int points, double dtau) {
    const ManufacturedCase mc{p};
    const double tau0 = 1.0, tau1 = 2.0;
    auto run = [&](int pts, double dt) {
        GridSpec grid{0.0, 2.0 * std::numbers::pi, pts, dt};
        const auto xs = linspace(grid.xi_lo, grid.xi_hi, static_cast<std::size_t>(pts));
        std::vector<double> w0(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) w0[i] = mc.value(xs[i], std::exp(-tau0));
        const BoundaryFn bc = [&](double g) { return std::pair{mc.value(grid.xi_lo, g), mc.value(grid.xi_hi, g)}; };
        const SourceFn src = [&](double xi, double g) { return mc.source(xi, g); };
        const auto traj = solve_radial_fde(p, w0, tau0, tau1, bc, grid, {}, src, 1000000);
        const SimState& last = traj.frames.back();
        double err = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double exact = mc.value(xs[i], last.gap);
            err = std::max(err, std::abs(last.w[i] - exact) / exact);
        }
        return std::pair{err, grid.dxi()};
    };
    ConvergenceReport r;
    const auto [ec, dx] = run(points, dtau);
    const auto [ef, dxf] = run(2 * points - 1, 0.5 * dtau);
    (void)dxf;
    r.err_coarse = ec;
    r.err_fine = ef;
    r.ratio = ec / ef;
    r.constant = ec / (dx * dx + dtau * dtau);
    return r;
}

// ---------------------------------------------------------------------------------------------
// extinction rate

double log_weighted_sup(std::span<const double> w_bar, double tau, const ModelParams& p) {
    const double top = *std::max_element(w_bar.begin(), w_bar.end());
    return (std::log(top) - (1.0 + p.gamma) * tau) / (1.0 - p.m);
}

ExtinctionFit extinction_rate(std::span<const double> taus, std::span<const double> log_sup, const ModelParams& p) {
    if (taus.size() != log_sup.size() || taus.empty())
        throw Error(ErrorCode::InvalidParameter, "time series and values differ in length");
    const double two_decades = 2.0 * std::log(10.0);
    const double tau_end = taus.back();
    if (tau_end < 5.0 || !(taus.front() < tau_end - two_decades))
        throw Error(ErrorCode::InsufficientDecades,
                    fmt::format("series spans tau [{}, {}]; need tau >= 5 and more than two decades", taus.front(),
                                tau_end));
    std::vector<double> x, y;
    for (std::size_t i = 0; i < taus.size(); ++i)
        if (taus[i] >= tau_end - two_decades) {
            x.push_back(-taus[i]);  // log(T − t)
            y.push_back(log_sup[i]);
        }
    if (x.size() < 3) throw Error(ErrorCode::InsufficientDecades, "fewer than three samples in the fit window");
    const std::vector<double> ones(x.size(), 1.0);
    const auto coef = least_squares({ones, x}, y);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double sxx = 0.0, sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mean) * (x[i] - mean);
        const double r = y[i] - coef[0] - coef[1] * x[i];
        sse += r * r;
    }
    ExtinctionFit f;
    f.exponent = coef[1];
    f.std_error = x.size() > 2 ? std::sqrt(sse / static_cast<double>(x.size() - 2) / sxx) : 0.0;
    f.ci_lo = f.exponent - 1.96 * f.std_error;
    f.ci_hi = f.exponent + 1.96 * f.std_error;
    f.reference = (1.0 + p.gamma) / (1.0 - p.m);
    f.tau_lo = -x.front();
    f.tau_hi = tau_end;
    f.samples = x.size();
    return f;
}

// ---------------------------------------------------------------------------------------------
// comparison sandwich

namespace {

// Profile between the barriers. Inside it is Φ(ξ + C̄) with C̄ the mean matching constant, which
// keeps the stationary balance where w̄ is tiny; over ξ ∈ [0, ξ₁] it blends in log into the
// geometric mean of the barriers. Both pieces lie between the barriers, so the blend does too.
double between_value(const Matching& match, double eps, double xi, double tau) {
    const double up = match.glued(Sign::plus, eps, xi, tau).value;
    const double lo = match.glued(Sign::minus, eps, xi, tau).value;
    const double t = std::clamp(xi / match.xi1(), 0.0, 1.0);
    const double chi = t * t * (3.0 - 2.0 * t);
    if (chi >= 1.0) return std::sqrt(up * lo);
    const double c_mid = 0.5 * (match.solve(Sign::plus, eps, tau) + match.solve(Sign::minus, eps, tau));
    const double inner = match.inner().value(xi + c_mid);
    return std::exp((1.0 - chi) * std::log(inner) + chi * 0.5 * (std::log(up) + std::log(lo)));
}

double choice_value(const Matching& match, double eps, double xi, double tau, BoundaryChoice choice) {
    switch (choice) {
        case BoundaryChoice::upper: return match.glued(Sign::plus, eps, xi, tau).value;
        case BoundaryChoice::lower: return match.glued(Sign::minus, eps, xi, tau).value;
        case BoundaryChoice::mean: break;
    }
    return between_value(match, eps, xi, tau);
}

}  // namespace

std::vector<double> initial_w_bar(const Matching& match, double eps, double tau0, const GridSpec& grid,
                                  BoundaryChoice choice) {
    const auto xs = linspace(grid.xi_lo, grid.xi_hi, static_cast<std::size_t>(grid.points));
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = choice_value(match, eps, xs[i], tau0, choice);
    return out;
}

SandwichReport comparison_sandwich(const Matching& match, const SandwichSpec& spec, std::span<const double> w_bar0,
                                   BoundaryChoice boundary) {
    const auto& p = match.outer().params();
    const double g = p.gamma;
    const GridSpec& grid = spec.grid;
    const auto lower0 = initial_w_bar(match, spec.eps, spec.tau0, grid, BoundaryChoice::lower);
    const auto upper0 = initial_w_bar(match, spec.eps, spec.tau0, grid, BoundaryChoice::upper);
    if (w_bar0.size() != lower0.size())
        throw Error(ErrorCode::InvalidParameter, "initial data does not match the grid");
    for (std::size_t i = 0; i < lower0.size(); ++i)
        if (!(w_bar0[i] >= lower0[i] * (1.0 - 1e-12) && w_bar0[i] <= upper0[i] * (1.0 + 1e-12)))
            throw Error(ErrorCode::PreconditionViolated,
                        fmt::format("initial data leaves the barriers at xi = {}", grid.xi_lo + grid.dxi() * static_cast<double>(i)));

    auto barrier_value = [&](double xi, double tau) { return choice_value(match, spec.eps, xi, tau, boundary); };
    const BoundaryFn bc = [&](double gap) {
        const double tau = -std::log(gap), scale = std::pow(gap, 1.0 + g);
        return std::pair{scale * barrier_value(grid.xi_lo, tau), scale * barrier_value(grid.xi_hi, tau)};
    };
    std::vector<double> w0(w_bar0.size());
    const double scale0 = std::exp(-(1.0 + g) * spec.tau0);
    for (std::size_t i = 0; i < w0.size(); ++i) w0[i] = scale0 * w_bar0[i];

    SandwichReport r;
    r.trajectory = solve_radial_fde(p, std::move(w0), spec.tau0, spec.tau1, bc, grid, spec.solver, {}, spec.save_every);
    const double tol_constant = spec.tol_constant > 0.0 ? spec.tol_constant : manufactured_convergence(p).constant;
    r.tol = tol_constant * (grid.dxi() * grid.dxi() + grid.dtau * grid.dtau);
    r.frames = r.trajectory.frames.size();
    std::vector<double> taus, sol_sup, up_sup, lo_sup;
    const auto& xs = r.trajectory.xi;
    const auto first = std::lower_bound(xs.begin(), xs.end(), spec.fit_xi_lo) - xs.begin();
    const auto last = std::upper_bound(xs.begin(), xs.end(), spec.fit_xi_hi) - xs.begin();
    if (last <= first) throw Error(ErrorCode::InvalidParameter, "fit window holds no grid points");
    auto window = [&](const std::vector<double>& values) {
        return std::span<const double>(values).subspan(static_cast<std::size_t>(first),
                                                       static_cast<std::size_t>(last - first));
    };
    for (std::size_t f = 0; f < r.trajectory.frames.size(); ++f) {
        const SimState& st = r.trajectory.frames[f];
        const double tau = st.tau(), lift = std::pow(st.gap, -(1.0 + g));
        std::vector<double> wb(st.w.size()), ub(st.w.size()), lb(st.w.size());
        bool bad = false;
        double gap_lo = 0.0, gap_up = 0.0;
        for (std::size_t i = 0; i < st.w.size(); ++i) {
            const double xi = r.trajectory.xi[i];
            wb[i] = lift * st.w[i];
            ub[i] = match.glued(Sign::plus, spec.eps, xi, tau).value;
            lb[i] = match.glued(Sign::minus, spec.eps, xi, tau).value;
            const double below = (lb[i] - wb[i]) / lb[i], above = (wb[i] - ub[i]) / ub[i];
            r.worst_below = std::max(r.worst_below, below);
            r.worst_above = std::max(r.worst_above, above);
            if (below > r.tol || above > r.tol) bad = true;
            gap_lo += (wb[i] - lb[i]) / lb[i];
            gap_up += (ub[i] - wb[i]) / ub[i];
        }
        if (bad && r.first_bad_frame < 0) r.first_bad_frame = static_cast<int>(f);
        r.mean_gap_lower = gap_lo / static_cast<double>(st.w.size());
        r.mean_gap_upper = gap_up / static_cast<double>(st.w.size());
        taus.push_back(tau);
        sol_sup.push_back(log_weighted_sup(window(wb), tau, p));
        up_sup.push_back(log_weighted_sup(window(ub), tau, p));
        lo_sup.push_back(log_weighted_sup(window(lb), tau, p));
    }
    r.holds = r.first_bad_frame < 0;
    try {
        r.fit_solution = extinction_rate(taus, sol_sup, p);
        r.fit_upper = extinction_rate(taus, up_sup, p);
        r.fit_lower = extinction_rate(taus, lo_sup, p);
        r.fits_available = true;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientDecades) throw;
    }
    return r;
}

void require_sandwich(const SandwichReport& r) {
    if (r.holds) return;
    const auto& st = r.trajectory.frames.at(static_cast<std::size_t>(r.first_bad_frame));
    throw Error(ErrorCode::SandwichViolated,
                fmt::format("frame {} (tau = {}) leaves the barriers: below {:.3g}, above {:.3g}, tol {:.3g}",
                            r.first_bad_frame, st.tau(), r.worst_below, r.worst_above, r.tol));
}

}  // namespace fdelab
