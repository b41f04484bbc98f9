#include "fdelab/inner_matching.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fdelab/error.hpp"

namespace fdelab {

namespace {

double slack(Sign s, double eps) { return 1.0 + sign_factor(s) * eps; }

}  // namespace

Matching::Matching(const OuterProfiles& outer, const SelfSimilarProfile& inner, double xi1)
    : Matching(outer, inner, xi1, outer.barrier_variant(Sign::plus), outer.barrier_variant(Sign::minus)) {}

Matching::Matching(const OuterProfiles& outer, const SelfSimilarProfile& inner, double xi1, PsiVariant variant)
    : Matching(outer, inner, xi1, variant, variant) {}

Matching::Matching(const OuterProfiles& outer, const SelfSimilarProfile& inner, double xi1, PsiVariant upper,
                   PsiVariant lower)
    : outer_(&outer), inner_(&inner), xi1_(xi1), variants_{upper, lower} {
    if (!(xi1 > 0.0)) throw Error(ErrorCode::InvalidParameter, fmt::format("knot xi1 = {} must be positive", xi1));
}

Matching::Matching(const Matching& other)
    : outer_(other.outer_), inner_(other.inner_), xi1_(other.xi1_), variants_(other.variants_) {}

PsiJet Matching::outer_psi(Sign s, double xi, double tau) const {
    if (!(xi > 0.0)) throw Error(ErrorCode::OutOfDomain, fmt::format("outer part needs xi > 0, got {}", xi));
    const double g = outer_->params().gamma;
    return outer_->psi(variant(s), s, EtaOffset{xi * std::exp(-g * tau)}, tau);
}

GluedJet Matching::outer_jet(Sign s, double xi, double tau) const {
    const double g = outer_->params().gamma;
    const double e = std::exp(g * tau);
    const PsiJet j = outer_psi(s, xi, tau);
    GluedJet out;
    out.value = e * j.value;
    out.d_xi = j.d_eta;
    out.d_xixi = j.d_etaeta / e;
    out.d_tau = g * e * j.value + e * j.d_tau - g * xi * j.d_eta;
    return out;
}

double Matching::solve(Sign s, double eps, double tau) const {
    if (!(eps >= 0.0 && eps < 0.25))
        throw Error(ErrorCode::EpsilonOutOfRange, fmt::format("epsilon = {} outside [0, 1/4)", eps));
    const auto key = std::make_tuple(s == Sign::plus ? 1 : 0, eps, std::llround(tau * 1e12));
    {
        std::lock_guard lock(mutex_);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    const double target = slack(s, eps) * outer_jet(s, xi1_, tau).value;
    if (!(target > 0.0))
        throw Error(ErrorCode::TargetBelowRange,
                    fmt::format("matching target {} at tau = {} is not positive; tau too small", target, tau));
    const double C = inner_->inverse(target) - xi1_;
    std::lock_guard lock(mutex_);
    memo_.emplace(key, C);
    return C;
}

double Matching::derivative(Sign s, double eps, double tau) const {
    const double C = solve(s, eps, tau);
    return slack(s, eps) * outer_jet(s, xi1_, tau).d_tau / inner_->slope(xi1_ + C);
}

GluedJet Matching::glued(Sign s, double eps, double xi, double tau) const {
    if (xi > xi1_) return outer_jet(s, xi, tau);
    const double k = slack(s, eps);
    const double C = solve(s, eps, tau);
    const Jet phi = inner_->jet(xi + C);
    GluedJet out;
    out.inner = true;
    out.s = xi + C;
    out.value = phi.value / k;
    out.d_xi = phi.d1 / k;
    out.d_xixi = phi.d2 / k;
    out.d_tau = phi.d1 * derivative(s, eps, tau) / k;
    return out;
}

CornerSlopes Matching::corner(Sign s, double eps, double tau) const {
    CornerSlopes c;
    c.left = glued(s, eps, xi1_, tau).d_xi;
    c.right = outer_jet(s, xi1_, tau).d_xi;
    c.holds = s == Sign::plus ? c.left > c.right : c.left < c.right;
    return c;
}

double Matching::continuity_gap(Sign s, double eps, double tau) const {
    const double in = glued(s, eps, xi1_, tau).value;
    const double out = outer_jet(s, xi1_, tau).value;
    return std::abs(in - out) / std::abs(out);
}

MatchingLimits matching_limits(const Matching& match, double tau_eval, double tau_start) {
    const auto& p = match.outer().params();
    const auto& d = match.outer().derived();
    const double xi1 = match.xi1(), n1 = p.n - 1.0, g = p.gamma, A = p.A;
    MatchingLimits r;
    r.tau_eval = tau_eval;
    r.growth_rate_target = n1 * p.theta2_plus / A;
    r.lower_value_target = d.a0 * xi1 / (g * A) + n1 * p.theta1_minus / (g * A * xi1);
    int idx = 0;
    for (Sign s : {Sign::plus, Sign::minus}) {
        r.right_slope_target[idx] =
            d.a0 / (g * A) - n1 * p.theta2(s) / (g * A * xi1) - n1 * p.theta1(s) / (g * A * xi1 * xi1);
        ++idx;
    }
    auto sample = [&](double tau, double out[4]) {
        out[0] = match.outer_jet(Sign::plus, xi1, tau).d_tau;
        out[1] = match.outer_jet(Sign::minus, xi1, tau).value;
        out[2] = match.outer_jet(Sign::plus, xi1, tau).d_xi;
        out[3] = match.outer_jet(Sign::minus, xi1, tau).d_xi;
    };
    double now[4], before[4];
    sample(tau_eval, now);
    sample(tau_eval - 10.0, before);
    for (int i = 0; i < 4; ++i)
        if (std::abs(now[i] - before[i]) > 1e-3 * std::max(1.0, std::abs(now[i])))
            throw Error(ErrorCode::ExtrapolationUnstable,
                        fmt::format("matching limit {} still moving: {} at tau {} vs {} at tau {}", i, now[i],
                                    tau_eval, before[i], tau_eval - 10.0));
    r.growth_rate = now[0];
    r.lower_value = now[1];
    r.right_slope[0] = now[2];
    r.right_slope[1] = now[3];
    for (double tau : linspace(tau_start, tau_start + 20.0, 81))
        for (Sign s : {Sign::plus, Sign::minus})
            r.max_abs_C_rate = std::max(r.max_abs_C_rate, std::abs(match.derivative(s, 0.0, tau)));
    return r;
}

bool corner_verdicts_hold(const Matching& match, double eps, std::span<const double> taus) {
    for (double tau : taus)
        for (Sign s : {Sign::plus, Sign::minus})
            if (!match.corner(s, eps, tau).holds) return false;
    return true;
}

std::size_t ordering_violations(const Matching& match, double eps, std::span<const double> xis,
                                std::span<const double> taus) {
    std::size_t bad = 0;
    for (double tau : taus) {
        for (double xi : xis) {
            const double up = match.glued(Sign::plus, eps, xi, tau).value;
            const double lo = match.glued(Sign::minus, eps, xi, tau).value;
            if (!(up > lo && lo > 0.0)) ++bad;
        }
    }
    return bad;
}

namespace {

template <class Pred>
double largest_admissible(Pred ok) {
    if (!ok(0.0)) return -1.0;
    if (ok(EpsilonBounds::cap)) return EpsilonBounds::cap;
    double lo = 0.0, hi = EpsilonBounds::cap;
    while (hi - lo > 1e-3) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace

EpsilonBounds find_epsilon_bounds(const Matching& match, std::span<const double> taus, std::span<const double> xis) {
    EpsilonBounds b;
    b.eps1 = largest_admissible([&](double e) { return corner_verdicts_hold(match, e, taus); });
    b.eps2 = largest_admissible([&](double e) {
        try {
            return ordering_violations(match, e, xis, taus) == 0;
        } catch (const Error& err) {
            if (err.code() == ErrorCode::TargetBelowRange) return false;
            throw;
        }
    });
    if (b.eps1 < 0.0 || b.eps2 < 0.0)
        throw Error(ErrorCode::NoAdmissibleEpsilon,
                    fmt::format("epsilon = 0 fails the {} checks; raise xi1 or the tau thresholds",
                                b.eps1 < 0.0 ? "corner" : "ordering"));
    return b;
}

CornerThresholds find_corner_thresholds(const OuterProfiles& outer, const SelfSimilarProfile& inner, double xi_start,
                                        double tau_start, double span, int tau_points, int max_doublings) {
    double xi = xi_start, tau = tau_start;
    for (int k = 0; k <= 2 * max_doublings; ++k) {
        const Matching match(outer, inner, xi);
        const auto taus = linspace(tau, tau + span, static_cast<std::size_t>(tau_points));
        // latest τ at which either verdict fails (an unsolvable matching counts as a failure)
        double last_failure = -1.0;
        for (double t : taus) {
            bool ok = false;
            try {
                ok = match.corner(Sign::plus, 0.0, t).holds && match.corner(Sign::minus, 0.0, t).holds;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::TargetBelowRange) throw;
            }
            if (!ok) last_failure = t;
        }
        if (last_failure < 0.0) return {xi, tau};
        // verdicts that hold far out make the failure transient and call for a later start;
        // verdicts that fail in the limit call for a wider knot
        const double probe = std::max(40.0, tau + 2.0 * span);
        bool limit_ok = false;
        try {
            limit_ok = match.corner(Sign::plus, 0.0, probe).holds && match.corner(Sign::minus, 0.0, probe).holds;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::TargetBelowRange) throw;
        }
        if (limit_ok)
            tau *= 2.0;
        else
            xi *= 2.0;
    }
    throw Error(ErrorCode::ThresholdSearchExhausted,
                fmt::format("corner verdicts not reached up to xi1 = {}, tau = {}", xi, tau));
}

}  // namespace fdelab
