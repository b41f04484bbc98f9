#include "fdelab/residual_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "fdelab/error.hpp"

namespace fdelab {

const char* to_string(Region r) noexcept {
    switch (r) {
        case Region::near_a_band: return "near_a_band";
        case Region::far_field: return "far_field";
        case Region::glued_outer: return "glued_outer";
        case Region::inner: return "inner";
    }
    return "region?";
}

namespace {

double b1_of(const ModelParams& p) { return (2.0 * p.m - 1.0) / (1.0 - p.m); }
double b2_of(const ModelParams& p) { return (p.n - 2.0 - p.m * (p.n + 2.0)) / (1.0 - p.m); }
double a0_of(const ModelParams& p) { return 2.0 * (p.n - 1.0) * (p.n - 2.0 - p.n * p.m) / (1.0 - p.m); }

void require_positive(double v) {
    if (!(v > 0.0)) throw Error(ErrorCode::NonPositiveProfile, fmt::format("profile value {} is not positive", v));
}

}  // namespace

double L0_residual(const FieldSample& w, double eta, double tau, const ModelParams& p) {
    require_positive(w.value);
    const double g = p.gamma, e1 = std::exp(-g * tau), r = w.d_x / w.value;
    const double diffusion = e1 * e1 * (w.d_xx / w.value + b1_of(p) * r * r) + e1 * b2_of(p) * r;
    return w.d_tau - (p.n - 1.0) * diffusion - (g * eta * w.d_x + w.value - a0_of(p));
}

Residual L0_structured(const PsiJet& psi, double tau, const ModelParams& p) {
    require_positive(psi.value);
    const double g = p.gamma, e1 = std::exp(-g * tau), r = psi.d_eta / psi.value, n1 = p.n - 1.0;
    const double t1 = n1 * e1 * e1 * psi.d_etaeta / psi.value;
    const double t2 = n1 * e1 * e1 * b1_of(p) * r * r;
    const double t3 = n1 * e1 * b2_of(p) * r;
    return {psi.transport - t1 - t2 - t3, std::abs(psi.transport) + std::abs(t1) + std::abs(t2) + std::abs(t3)};
}

L0Split L0_decomposition(const OuterProfiles& outer, Sign s, const PointData& pt, double tau) {
    // L₀(ψ₁) with the sources written through φ₀: I₁ collects the e^{−2γτ} terms, I₂ the e^{−γτ} ones
    const auto& p = outer.params();
    const PsiJet psi = outer.psi(PsiVariant::psi1, s, pt, tau);
    const Jet p0 = outer.phi0(pt);
    const double r0 = p0.d1 / p0.value, r = psi.d_eta / psi.value;
    L0Split out;
    out.I1 = p0.d2 / p0.value + p.theta1(s) * r0 * r0 - psi.d_etaeta / psi.value - b1_of(p) * r * r;
    out.I2 = p.theta2(s) * r0 - b2_of(p) * r;
    return out;
}

double L1_residual(const FieldSample& w, double tau, const ModelParams& p) {
    require_positive(w.value);
    const double g = p.gamma, r = w.d_x / w.value;
    const double diffusion = w.d_xx / w.value + b1_of(p) * r * r + b2_of(p) * r;
    return std::exp(-g * tau) * (w.d_tau - (1.0 + g) * w.value) - (p.n - 1.0) * diffusion + a0_of(p) -
           g * p.A * w.d_x;
}

Residual L1_glued(const Matching& match, Sign s, double eps, double xi, double tau) {
    const auto& p = match.outer().params();
    if (xi > match.xi1()) return L0_structured(match.outer_psi(s, xi, tau), tau, p);
    const double k = 1.0 + sign_factor(s) * eps;
    const double C = match.solve(s, eps, tau);
    const Jet phi = match.inner().jet(xi + C);
    require_positive(phi.value);
    const double g = p.gamma, beta = g * p.A, e1 = std::exp(-g * tau);
    const double drift = e1 * phi.d1 * match.derivative(s, eps, tau) / k;
    const double growth = -e1 * (1.0 + g) * phi.value / k;
    const double slack_term = beta * phi.d1 * (1.0 - 1.0 / k);
    return {drift + growth + slack_term, std::abs(drift) + std::abs(growth) + std::abs(slack_term)};
}

namespace {

struct Accumulator {
    ResidualReport& r;
    double atol_rel;
    double sum = 0.0;

    void add(double x, double tau, const Residual& res) {
        const double atol = atol_rel * res.scale;
        r.min = r.total == 0 ? res.value : std::min(r.min, res.value);
        r.max = r.total == 0 ? res.value : std::max(r.max, res.value);
        sum += res.value;
        ++r.total;
        const double signed_value = r.supersolution ? res.value : -res.value;
        if (std::abs(res.value) <= atol) {
            ++r.inconclusive;
        } else if (signed_value < 0.0) {
            ++r.violations;
        }
        // worst point: most negative in the expected orientation, relative to its scale
        const double badness = -signed_value / std::max(res.scale, std::numeric_limits<double>::min());
        const double current = r.worst.scale > 0.0 ? -(r.supersolution ? r.worst.value : -r.worst.value) / r.worst.scale
                                                   : -std::numeric_limits<double>::infinity();
        if (r.total == 1 || badness > current) r.worst = {x, tau, res.value, res.scale};
    }

    void finish(double fraction) {
        r.mean = r.total > 0 ? sum / static_cast<double>(r.total) : 0.0;
        r.pass = r.total > 0 && r.violations == 0 &&
                 static_cast<double>(r.inconclusive) <= fraction * static_cast<double>(r.total);
    }
};

}  // namespace

ResidualReport verify_sign_region(const OuterProfiles& outer, PsiVariant v, Sign s, Region region,
                                  const ThresholdConfig& cfg) {
    if (region == Region::inner) throw Error(ErrorCode::InvalidParameter, "use verify_inner_region for the inner region");
    const auto& p = outer.params();
    const double g = p.gamma;
    if (!(cfg.xi0 > 0.0 && cfg.tau_start > 0.0))
        throw Error(ErrorCode::InvalidParameter, "region sweeps need xi0 and tau_start set");
    ResidualReport r;
    r.op = "L0";
    r.region = region;
    r.sign = s;
    r.variant = v;
    r.supersolution = s == Sign::plus;
    r.tau_lo = cfg.tau_start;
    r.tau_hi = cfg.tau_start + cfg.tau_span;
    r.space_points = cfg.space_points;
    r.tau_points = cfg.tau_points;
    r.thresholds = cfg;
    if (cfg.xi0 * std::exp(-g * r.tau_hi) < min_outer_offset)
        throw Error(ErrorCode::OutOfDomain,
                    fmt::format("band edge xi0 exp(-gamma tau) falls below {} at tau = {}", min_outer_offset, r.tau_hi));
    Accumulator acc{r, cfg.verdict_atol};
    const double far = p.A * cfg.far_factor - p.A;
    for (double tau : linspace(r.tau_lo, r.tau_hi, static_cast<std::size_t>(cfg.tau_points))) {
        const double inner_edge = cfg.xi0 * std::exp(-g * tau);
        double lo = inner_edge, hi = far;
        if (region == Region::near_a_band) hi = cfg.delta0;
        if (region == Region::far_field) lo = cfg.delta0;
        if (!(lo < hi)) continue;
        if (tau == r.tau_lo) {
            r.x_lo = lo;
            r.x_hi = hi;
        }
        const auto offsets = logspace(lo, hi, static_cast<std::size_t>(cfg.space_points));
        for (const auto& pt : outer.points(offsets)) acc.add(pt.z, tau, L0_structured(outer.psi(v, s, pt, tau), tau, p));
    }
    acc.finish(cfg.inconclusive_fraction);
    return r;
}

ResidualReport verify_inner_region(const Matching& match, Sign s, double eps, const ThresholdConfig& cfg,
                                   double xi_lo) {
    if (!(cfg.tau_start > 0.0)) throw Error(ErrorCode::InvalidParameter, "inner sweep needs tau_start set");
    ResidualReport r;
    r.op = "L1";
    r.region = Region::inner;
    r.sign = s;
    r.variant = match.variant(s);
    r.eps = eps;
    r.supersolution = s == Sign::plus;
    r.x_lo = xi_lo;
    r.x_hi = match.xi1();
    r.tau_lo = cfg.tau_start;
    r.tau_hi = cfg.tau_start + cfg.tau_span;
    r.space_points = cfg.space_points;
    r.tau_points = cfg.tau_points;
    r.thresholds = cfg;
    Accumulator acc{r, cfg.verdict_atol};
    const auto xis = linspace(xi_lo, match.xi1(), static_cast<std::size_t>(cfg.space_points));
    for (double tau : linspace(r.tau_lo, r.tau_hi, static_cast<std::size_t>(cfg.tau_points)))
        for (double xi : xis) acc.add(xi, tau, L1_glued(match, s, eps, xi, tau));
    acc.finish(cfg.inconclusive_fraction);
    return r;
}

void require_pass(const ResidualReport& r) {
    if (r.pass) return;
    throw Error(ErrorCode::VerdictViolated,
                fmt::format("{} {} {} {}: {} violations, {} inconclusive of {}; worst {} at x = {}, tau = {}", r.op,
                            to_string(r.region), to_string(r.variant), to_string(r.sign), r.violations, r.inconclusive,
                            r.total, r.worst.value, r.worst.x, r.worst.tau));
}

ThresholdResult find_thresholds(const OuterProfiles& outer, PsiVariant v, Sign s, const ThresholdConfig& cfg) {
    const auto& p = outer.params();
    const auto& d = outer.derived();
    ThresholdConfig c = cfg;
    // ξ₀ must clear the positivity bound sqrt((n−1)|θ₁⁻|/a₀)
    const double xi_floor = std::sqrt((p.n - 1.0) * std::abs(p.theta1_minus) / d.a0);
    c.xi0 = cfg.xi0 > 0.0 ? std::max(cfg.xi0, 1.01 * xi_floor) : std::max(1.0, 1.01 * xi_floor);
    c.tau_start = cfg.tau_start > 0.0 ? cfg.tau_start : 1.0;
    auto clamp_tau = [&] {
        // keep the band edge ξ₀e^{−γτ} inside the band
        c.tau_start = std::max(c.tau_start, std::log(c.xi0 / c.delta0) / p.gamma);
    };
    clamp_tau();
    ThresholdResult out;
    for (int it = 0; it <= 3 * cfg.max_doublings; ++it) {
        out.iterations = it + 1;
        ResidualReport rep;
        try {
            rep = verify_sign_region(outer, v, s, Region::glued_outer, c);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NonPositiveProfile) throw;
            rep.pass = false;
            rep.worst.x = 0.0;  // treat as a near-A failure
        }
        if (rep.pass) {
            out.cfg = c;
            out.report = rep;
            return out;
        }
        if (rep.worst.x < c.delta0 && 2.0 * c.xi0 <= c.xi1) {
            c.xi0 *= 2.0;
        } else if (rep.worst.x < c.delta0) {
            c.delta0 *= 0.5;
            c.tau_start *= 2.0;
        } else {
            c.tau_start *= 2.0;
        }
        clamp_tau();
        if (c.xi0 * std::exp(-p.gamma * (c.tau_start + c.tau_span)) < min_outer_offset) break;
    }
    throw Error(ErrorCode::ThresholdSearchExhausted,
                fmt::format("{} {} did not pass up to xi0 = {}, tau = {}, delta0 = {}", to_string(v), to_string(s), c.xi0,
                            c.tau_start, c.delta0));
}

ThresholdResult find_inner_threshold(const Matching& match, Sign s, double eps, const ThresholdConfig& cfg,
                                     double tau_start) {
    ThresholdConfig c = cfg;
    c.tau_start = tau_start > 0.0 ? tau_start : 1.0;
    ThresholdResult out;
    for (int it = 0; it <= cfg.max_doublings; ++it) {
        out.iterations = it + 1;
        bool pass = false;
        ResidualReport rep;
        try {
            rep = verify_inner_region(match, s, eps, c);
            pass = rep.pass;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::TargetBelowRange && e.code() != ErrorCode::NonPositiveProfile) throw;
        }
        if (pass) {
            out.cfg = c;
            out.report = rep;
            return out;
        }
        c.tau_start *= 2.0;
    }
    throw Error(ErrorCode::ThresholdSearchExhausted,
                fmt::format("inner {} verdict did not pass up to tau = {}", to_string(s), c.tau_start));
}

}  // namespace fdelab
