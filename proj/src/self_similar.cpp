#include "fdelab/self_similar.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fdelab/error.hpp"

namespace fdelab {

namespace {

// Quintic Hermite interpolation on [0, 1] from values, first and second derivatives
// (derivatives already scaled by the interval length).
double quintic(double t, double y0, double d0, double c0, double y1, double d1, double c1, int order) {
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    if (order == 0) {
        const double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5, h1 = t - 6 * t3 + 8 * t4 - 3 * t5;
        const double h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5, h3 = 10 * t3 - 15 * t4 + 6 * t5;
        const double h4 = -4 * t3 + 7 * t4 - 3 * t5, h5 = 0.5 * t3 - t4 + 0.5 * t5;
        return h0 * y0 + h1 * d0 + h2 * c0 + h3 * y1 + h4 * d1 + h5 * c1;
    }
    if (order == 1) {
        const double h0 = -30 * t2 + 60 * t3 - 30 * t4, h1 = 1 - 18 * t2 + 32 * t3 - 15 * t4;
        const double h2 = t - 4.5 * t2 + 6 * t3 - 2.5 * t4, h3 = 30 * t2 - 60 * t3 + 30 * t4;
        const double h4 = -12 * t2 + 28 * t3 - 15 * t4, h5 = 1.5 * t2 - 4 * t3 + 2.5 * t4;
        return h0 * y0 + h1 * d0 + h2 * c0 + h3 * y1 + h4 * d1 + h5 * c1;
    }
    const double h0 = -60 * t + 180 * t2 - 120 * t3, h1 = -36 * t + 96 * t2 - 60 * t3;
    const double h2 = 1 - 9 * t + 18 * t2 - 10 * t3, h3 = 60 * t - 180 * t2 + 120 * t3;
    const double h4 = -24 * t + 84 * t2 - 60 * t3, h5 = 3 * t - 12 * t2 + 10 * t3;
    return h0 * y0 + h1 * d0 + h2 * c0 + h3 * y1 + h4 * d1 + h5 * c1;
}

struct TailFit {
    double slope, log_coef, intercept;
};

// Φ ≈ slope·s + log_coef·log s + intercept + c/s on [lo, hi]
TailFit fit_tail(const SelfSimilarProfile& prof, double lo, double hi) {
    const auto grid = linspace(lo, hi, 200);
    std::vector<double> cs, cl, c1, ci, y;
    for (double s : grid) {
        cs.push_back(s);
        cl.push_back(std::log(s));
        c1.push_back(1.0);
        ci.push_back(1.0 / s);
        y.push_back(prof.value(s));
    }
    const auto c = least_squares({cs, cl, c1, ci}, y);
    return {c[0], c[1], c[2]};
}

}  // namespace

double SelfSimilarProfile::log_rhs(double ell, double p) const {
    const double n1 = p_.n - 1.0;
    return (d_.a0 - d_.beta * std::exp(ell) * p) / n1 - (1.0 + d_.b1) * p * p - d_.b2 * p;
}

double SelfSimilarProfile::log_coefficient() const noexcept { return -(p_.n - 1.0) * d_.b2 / d_.beta; }

SelfSimilarProfile SelfSimilarProfile::shoot(const ModelParams& p, const SelfSimilarOptions& opt) {
    SelfSimilarProfile prof;
    prof.p_ = p;
    prof.d_ = derive_constants(p);
    if (!(opt.r_start > 0.0) || !(std::log(opt.r_start) < 0.0) || !(opt.s_max > 10.0))
        throw Error(ErrorCode::InvalidParameter, "need 0 < r_start < 1 and s_max > 10");
    const double m = p.m, lam = p.lambda;
    prof.v2_ = -prof.d_.beta * std::pow(lam, 2.0 - m) / (p.n * (p.n - 1.0) * (1.0 - m));

    const double s0 = std::log(opt.r_start);
    const Jet start = prof.series(s0);
    const double ell0 = std::log(start.value);
    const double p0 = start.d1 / start.value;
    const auto traj = solve_ivp(
        [&prof](double, const OdeState& y, OdeState& dy) {
            dy[0] = y[1];
            dy[1] = prof.log_rhs(y[0], y[1]);
        },
        {ell0, p0}, s0, opt.s_max, opt.ode);

    const std::size_t count = traj.size();
    prof.s_ = traj.t;
    prof.ell_.resize(count);
    prof.dell_.resize(count);
    prof.ddell_.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        prof.ell_[i] = traj.y[i][0];
        prof.dell_[i] = traj.y[i][1];
        prof.ddell_[i] = traj.dy[i][1];
        if (!(prof.dell_[i] > 0.0) && prof.s_[i] > 0.0)
            throw Error(ErrorCode::NonPositiveProfile, fmt::format("profile not increasing at s = {}", prof.s_[i]));
    }

    // subleading tail corrections fitted on the last decade, with slope and log term fixed
    const double smax = prof.s_max();
    const auto grid = linspace(smax / 10.0, smax, 200);
    std::vector<double> c1, ci, cli, y;
    for (double s : grid) {
        c1.push_back(1.0);
        ci.push_back(1.0 / s);
        cli.push_back(std::log(s) / s);
        y.push_back(prof.value(s) - prof.d_.slope_limit * s - prof.log_coefficient() * std::log(s));
    }
    const auto c = least_squares({c1, ci, cli}, y);
    std::copy(c.begin(), c.end(), prof.tail_);
    prof.slope_converged_ = std::abs(prof.slope(smax) - prof.d_.slope_limit) <= 1e-6;
    return prof;
}

Jet SelfSimilarProfile::series(double s) const {
    // Φ = e^{2s}(λ + v₂e^{2s})^{1−m}
    const double e2 = std::exp(2.0 * s);
    const double v = p_.lambda + v2_ * e2;
    if (!(v > 0.0)) throw Error(ErrorCode::OutOfDomain, "series evaluated outside its range");
    const double k = 1.0 - p_.m;
    const double val = e2 * std::pow(v, k);
    // log Φ = 2s + k log v, (log Φ)' = 2 + 2k v₂e^{2s}/v, (log Φ)'' = 4k v₂λe^{2s}/v²
    const double lp = 2.0 + 2.0 * k * v2_ * e2 / v;
    const double lpp = 4.0 * k * v2_ * p_.lambda * e2 / (v * v);
    return {val, val * lp, val * (lpp + lp * lp)};
}

Jet SelfSimilarProfile::tail(double s) const {
    const double L = std::log(s), k = d_.slope_limit, c = log_coefficient();
    const double val = k * s + c * L + tail_[0] + tail_[1] / s + tail_[2] * L / s;
    const double d1 = k + c / s - tail_[1] / (s * s) + tail_[2] * (1.0 - L) / (s * s);
    const double d2 = -c / (s * s) + 2.0 * tail_[1] / (s * s * s) + tail_[2] * (2.0 * L - 3.0) / (s * s * s);
    return {val, d1, d2};
}

Jet SelfSimilarProfile::jet(double s) const {
    if (!std::isfinite(s)) throw Error(ErrorCode::OutOfDomain, "s must be finite");
    if (s < s_.front()) return series(s);
    if (s > s_.back()) return tail(s);
    auto it = std::upper_bound(s_.begin(), s_.end(), s);
    std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - s_.begin() - 1));
    if (i + 1 >= s_.size()) i = s_.size() - 2;
    const double h = s_[i + 1] - s_[i];
    const double t = (s - s_[i]) / h;
    auto eval = [&](int order) {
        return quintic(t, ell_[i], h * dell_[i], h * h * ddell_[i], ell_[i + 1], h * dell_[i + 1],
                       h * h * ddell_[i + 1], order);
    };
    const double ell = eval(0);
    const double lp = eval(1) / h;
    const double lpp = eval(2) / (h * h);
    const double val = std::exp(ell);
    return {val, val * lp, val * (lpp + lp * lp)};
}

double SelfSimilarProfile::v0(double r) const {
    if (!(r > 0.0)) throw Error(ErrorCode::NonPositiveInput, "r must be positive");
    const double s = std::log(r);
    return std::pow(value(s) / (r * r), 1.0 / (1.0 - p_.m));
}

double SelfSimilarProfile::inverse(double target) const {
    if (!(target > 0.0) || !std::isfinite(target))
        throw Error(ErrorCode::TargetBelowRange, fmt::format("matching target {} is not above inf of the profile", target));
    // log Φ is increasing in s; start from the series or linear-tail guess
    const double guess_lo = 0.5 * std::log(target / std::pow(p_.lambda, 1.0 - p_.m));
    const double guess_hi = std::max(guess_lo, target / d_.slope_limit) + 1.0;
    return find_root_monotone([&](double s) { return std::log(value(s)) - std::log(target); },
                              std::min(guess_lo, guess_hi - 1.0), guess_hi, 1e-13);
}

double SelfSimilarProfile::stationary_residual(double s) const {
    const Jet j = jet(s);
    const double r1 = j.d1 / j.value;
    return (p_.n - 1.0) * (j.d2 / j.value + d_.b1 * r1 * r1 + d_.b2 * r1) - d_.a0 + d_.beta * j.d1;
}

TailFitReport verify_tail_fit(const SelfSimilarProfile& profile) {
    const double hi = profile.s_max();
    if (hi < 50.0) throw Error(ErrorCode::InsufficientTail, fmt::format("s_max = {} too short for a tail fit", hi));
    TailFitReport r;
    const TailFit f = fit_tail(profile, hi / 10.0, hi);
    r.slope = f.slope;
    r.slope_target = profile.slope_limit();
    r.slope_rel_dev = std::abs(f.slope / r.slope_target - 1.0);
    r.log_coefficient = f.log_coef;
    r.log_target = profile.log_coefficient();
    r.log_rel_dev = std::abs(f.log_coef / r.log_target - 1.0);
    r.K1 = f.intercept;
    for (double shift : {0.8, 1.2}) {
        const TailFit g = fit_tail(profile, shift * hi / 10.0, shift * hi);
        r.K1_window_spread = std::max(r.K1_window_spread, std::abs(g.intercept - f.intercept));
    }
    return r;
}

}  // namespace fdelab
