#include "fdelab/params.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fdelab/error.hpp"

namespace fdelab {

const char* to_string(Sign s) noexcept { return s == Sign::plus ? "plus" : "minus"; }

ModelParams ModelParams::with_defaults(int n, double m, double gamma, double A, double T, double lambda) {
    ModelParams p;
    p.n = n;
    p.m = m;
    p.gamma = gamma;
    p.A = A;
    p.T = T;
    p.lambda = lambda;
    const double b1 = (2.0 * m - 1.0) / (1.0 - m);
    const double b2 = (n - 2.0 - m * (n + 2.0)) / (1.0 - m);
    p.theta1_minus = b1 - 1.0;
    p.theta1_plus = std::max(0.0, b1) + 1.0;
    p.theta2_minus = 0.0;
    p.theta2_plus = b2 + 1.0;
    return p;
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidParameter, what);
}

bool finite_all(const ModelParams& p) {
    for (double v : {p.m, p.gamma, p.A, p.T, p.lambda, p.theta1_minus, p.theta1_plus, p.theta2_minus,
                     p.theta2_plus, p.epsilon})
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

DerivedConstants derive_constants(const ModelParams& p) {
    require(finite_all(p), "parameters must be finite");
    require(p.n >= 3, fmt::format("n = {} must be at least 3", p.n));
    const double m_crit = (p.n - 2.0) / (p.n + 2.0);
    require(p.m > 0.0, fmt::format("m = {} must be positive", p.m));
    require(p.m < m_crit, fmt::format("m = {} must lie strictly below (n-2)/(n+2) = {}", p.m, m_crit));
    require(p.gamma > 0.0, fmt::format("gamma = {} must be positive", p.gamma));
    require(p.A > 1.0, fmt::format("A = {} must exceed 1", p.A));
    require(p.T > 0.0, fmt::format("T = {} must be positive", p.T));
    require(p.lambda > 0.0, fmt::format("lambda = {} must be positive", p.lambda));
    require(p.epsilon >= 0.0 && p.epsilon < 0.25, fmt::format("epsilon = {} must lie in [0, 1/4)", p.epsilon));

    DerivedConstants d;
    const double n = p.n;
    d.a0 = 2.0 * (n - 1.0) * (n - 2.0 - n * p.m) / (1.0 - p.m);
    d.b1 = (2.0 * p.m - 1.0) / (1.0 - p.m);
    d.b2 = (n - 2.0 - p.m * (n + 2.0)) / (1.0 - p.m);
    const double half = (1.0 + 1.0 / p.gamma) / 2.0;
    d.N = static_cast<int>(std::floor(half)) + 1;
    d.exponent_rate = (1.0 + p.gamma) / (1.0 - p.m);
    d.beta = p.gamma * p.A;
    d.slope_limit = d.a0 / d.beta;
    return d;
}

std::vector<std::string> theta_violations(const ModelParams& p) {
    const double b1 = (2.0 * p.m - 1.0) / (1.0 - p.m);
    const double b2 = (p.n - 2.0 - p.m * (p.n + 2.0)) / (1.0 - p.m);
    std::vector<std::string> out;
    if (!(p.theta1_minus < b1))
        out.push_back(fmt::format("theta1_minus = {} must be below (2m-1)/(1-m) = {}", p.theta1_minus, b1));
    if (p.theta2_minus != 0.0) out.push_back(fmt::format("theta2_minus = {} must be 0", p.theta2_minus));
    if (!(p.theta1_plus > std::max(0.0, b1)))
        out.push_back(fmt::format("theta1_plus = {} must exceed max(0, (2m-1)/(1-m)) = {}", p.theta1_plus,
                                  std::max(0.0, b1)));
    if (!(p.theta2_plus > b2))
        out.push_back(fmt::format("theta2_plus = {} must exceed (n-2-m(n+2))/(1-m) = {}", p.theta2_plus, b2));
    return out;
}

DerivedConstants validate_params(const ModelParams& p) {
    DerivedConstants d = derive_constants(p);
    const auto bad = theta_violations(p);
    if (!bad.empty()) throw Error(ErrorCode::InvalidParameter, bad.front());
    return d;
}

void check_thresholds(const ThresholdConfig& cfg, const ModelParams& p) {
    require(cfg.base_point(p.A) > p.A, "eta0 must exceed A");
    require(cfg.xi1 > 0.0, "xi1 must be positive");
    require(cfg.xi0 >= 0.0 && (cfg.xi0 == 0.0 || cfg.xi1 >= cfg.xi0), "need xi1 >= xi0 > 0");
    require(cfg.delta0 > 0.0 && cfg.delta1 > 0.0, "band widths must be positive");
    require(cfg.tau_start >= 0.0, "tau_start must be non-negative");
    if (cfg.tau_start > 0.0)
        require(cfg.xi1 * std::exp(-p.gamma * cfg.tau_start) <= cfg.delta0,
                "tau_start too small: xi1 exp(-gamma tau) exceeds delta0");
    require(cfg.space_points >= 8 && cfg.tau_points >= 2, "verification grids too coarse");
    require(cfg.tau_span > 0.0 && cfg.far_factor > 1.0, "verification ranges must be positive");
    require(cfg.max_doublings >= 1, "max_doublings must be at least 1");
}

LogRadialPoint to_log_radial(PhysicalPoint pt, double m) {
    if (!(pt.u > 0.0) || !(pt.r > 0.0)) throw Error(ErrorCode::NonPositiveInput, "u and r must be positive");
    return {pt.r * pt.r * std::pow(pt.u, 1.0 - m), std::log(pt.r)};
}

PhysicalPoint from_log_radial(LogRadialPoint pt, double m) {
    if (!(pt.w > 0.0)) throw Error(ErrorCode::NonPositiveInput, "w must be positive");
    const double r = std::exp(pt.s);
    return {std::pow(pt.w / (r * r), 1.0 / (1.0 - m)), r};
}

double tau_of(double t, const ModelParams& p) {
    if (!(t < p.T)) throw Error(ErrorCode::TimeBeyondExtinction, fmt::format("t = {} is not below T = {}", t, p.T));
    return -std::log(p.T - t);
}

OuterPoint to_outer(LogRadialSample pt, const ModelParams& p) {
    const double tau = tau_of(pt.t, p);
    const double gap = p.T - pt.t;
    return {pt.w / gap, std::pow(gap, p.gamma) * pt.s, tau};
}

LogRadialSample from_outer(OuterPoint pt, const ModelParams& p) {
    const double gap = std::exp(-pt.tau);
    return {pt.w_hat * gap, pt.eta * std::exp(p.gamma * pt.tau), p.T - gap};
}

InnerPoint to_inner(LogRadialSample pt, const ModelParams& p) {
    const double tau = tau_of(pt.t, p);
    return {std::exp((1.0 + p.gamma) * tau) * pt.w, pt.s - p.A * std::exp(p.gamma * tau), tau};
}

LogRadialSample from_inner(InnerPoint pt, const ModelParams& p) {
    return {std::exp(-(1.0 + p.gamma) * pt.tau) * pt.w_bar, pt.xi + p.A * std::exp(p.gamma * pt.tau),
            p.T - std::exp(-pt.tau)};
}

}  // namespace fdelab
