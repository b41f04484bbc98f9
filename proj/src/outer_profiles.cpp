#include "fdelab/outer_profiles.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fdelab/error.hpp"

namespace fdelab {

const char* to_string(PsiVariant v) noexcept {
    switch (v) {
        case PsiVariant::psi1: return "psi1";
        case PsiVariant::psi2: return "psi2";
        case PsiVariant::psi3: return "psi3";
        case PsiVariant::psi4: return "psi4";
    }
    return "psi?";
}

double CoeffTable::get(int k, int j) const {
    auto it = c.find({k, j});
    return it == c.end() ? 0.0 : it->second;
}

namespace {

// η^{−p}F with derivatives, given F and its first two derivatives
Jet weighted(double eta, double p, double F, double F1, double F2) {
    const double w = std::pow(eta, -p);
    return {w * F, w * (F1 - p * F / eta), w * (F2 - 2.0 * p * F1 / eta + p * (p + 1.0) * F / (eta * eta))};
}

bool uses_phi4(PsiVariant v) { return v == PsiVariant::psi3 || v == PsiVariant::psi4; }
bool has_sums(PsiVariant v) { return v == PsiVariant::psi2 || v == PsiVariant::psi4; }

}  // namespace

OuterProfiles::OuterProfiles(const ModelParams& p, const ThresholdConfig& cfg, std::vector<double> seeds,
                             QuadratureSpec quad)
    : p_(p), d_(derive_constants(p)), cfg_(cfg), quad_(quad), seeds_(std::move(seeds)) {
    check_thresholds(cfg_, p_);
    alpha_ = 1.0 / p_.gamma;
    B_ = std::pow(p_.A, alpha_);
    eta0_ = cfg_.base_point(p_.A);
    zcut_ = p_.A * std::pow(4.0, p_.gamma) - p_.A;
    const double g = p_.gamma;
    const double n1 = p_.n - 1.0;
    K1_ = n1 * (g + 1.0) * B_ / (g * g * g);
    K2_ = n1 * B_ * B_ / (g * g * g);
    K3_ = n1 * B_ / (g * g);
    C2_ = K2_ * integral_J(eta0_ - p_.A);
    C10_ = cfg_.C10 > 0.0 ? cfg_.C10 : search_C10();

    const int expected = 2 * d_.N - 2;
    if (!seeds_.empty() && static_cast<int>(seeds_.size()) != expected)
        throw Error(ErrorCode::RecurrenceUnderdetermined,
                    fmt::format("expected {} seed constants c_(k,0) for k = 3..{}, got {}", expected, 2 * d_.N,
                                seeds_.size()));
    for (PsiVariant v : {PsiVariant::psi1, PsiVariant::psi2, PsiVariant::psi3, PsiVariant::psi4})
        for (Sign s : {Sign::plus, Sign::minus}) tables_[{v, s}] = has_sums(v) ? build_table(v, s) : CoeffTable{d_.N, {}, 0.0, 0.0};
}

PsiVariant OuterProfiles::default_variant() const noexcept {
    return p_.gamma > 1.0 ? PsiVariant::psi3 : PsiVariant::psi4;
}

PsiVariant OuterProfiles::barrier_variant(Sign s) const noexcept {
    if (s == Sign::minus) return default_variant();
    return p_.gamma > 1.0 ? PsiVariant::psi1 : PsiVariant::psi2;
}

double OuterProfiles::q_of(double z) const { return -std::expm1(-alpha_ * std::log1p(z / p_.A)); }

// The integrands of I and J in y = log(η − A), with the Jacobian z folded in before dividing by q
// so offsets near the underflow limit stay finite.
double OuterProfiles::I_segment(double za, double zb) const {
    auto f = [this](double y) {
        const double z = std::exp(y);
        return (z / q_of(z)) / (p_.A + z);
    };
    return integrate(f, std::log(za), std::log(zb), quad_).value;
}

double OuterProfiles::J_segment(double za, double zb) const {
    auto f = [this](double y) {
        const double z = std::exp(y);
        const double q = q_of(z);
        return (z / q) * (std::pow(p_.A + z, -1.0 - alpha_) / q);
    };
    return integrate(f, std::log(za), std::log(zb), quad_).value;
}

double OuterProfiles::integral_I(double z) const {
    const double z0 = eta0_ - p_.A;
    if (z == z0) return 0.0;
    return z < z0 ? -I_segment(z, z0) : I_segment(z0, z);
}

double OuterProfiles::tail_J(double x) const {
    // ∫_R^∞ ρ^{−1−α}(1 − x(ρ))^{−2} dρ = (γ/B) Σ_{k≥1} x_R^k, truncated once terms drop below 1e−18
    double sum = 0.0;
    double term = x;
    for (int k = 0; k < 400 && term > 1e-18 * sum; ++k) {
        sum += term;
        term *= x;
    }
    return p_.gamma / B_ * sum;
}

double OuterProfiles::integral_J(double z) const {
    if (z >= zcut_) return tail_J(std::exp(-alpha_ * std::log1p(z / p_.A)));
    return J_segment(z, zcut_) + tail_J(0.25);
}

PointData OuterProfiles::point(EtaOffset at) const {
    if (!(at.z > 0.0) || !std::isfinite(at.z))
        throw Error(ErrorCode::OutOfDomain, fmt::format("eta - A = {} must be positive", at.z));
    PointData pt;
    pt.z = at.z;
    pt.eta = p_.A + at.z;
    pt.x = std::exp(-alpha_ * std::log1p(at.z / p_.A));
    pt.q = q_of(at.z);
    pt.I = integral_I(at.z);
    pt.J = integral_J(at.z);
    return pt;
}

std::vector<PointData> OuterProfiles::points(std::span<const double> sorted_offsets) const {
    std::vector<PointData> out(sorted_offsets.size());
    if (out.empty()) return out;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double z = sorted_offsets[i];
        if (!(z > 0.0) || (i > 0 && !(z > sorted_offsets[i - 1])))
            throw Error(ErrorCode::OutOfDomain, "offsets must be positive and strictly increasing");
        out[i].z = z;
        out[i].eta = p_.A + z;
        out[i].x = std::exp(-alpha_ * std::log1p(z / p_.A));
        out[i].q = q_of(z);
    }
    out.front().I = integral_I(out.front().z);
    for (std::size_t i = 1; i < out.size(); ++i)
        out[i].I = out[i - 1].I + I_segment(out[i - 1].z, out[i].z);
    const std::size_t last = out.size() - 1;
    out[last].J = integral_J(out[last].z);
    for (std::size_t i = last; i-- > 0;) {
        if (out[i].z >= zcut_)
            out[i].J = integral_J(out[i].z);
        else if (out[i + 1].z <= zcut_)
            out[i].J = out[i + 1].J + J_segment(out[i].z, out[i + 1].z);
        else
            out[i].J = integral_J(out[i].z);
    }
    return out;
}

Jet OuterProfiles::phi0(const PointData& pt) const {
    const double a0 = d_.a0;
    return {a0 * pt.q, a0 * alpha_ * pt.x / pt.eta, -a0 * alpha_ * (alpha_ + 1.0) * pt.x / (pt.eta * pt.eta)};
}

Sources OuterProfiles::f_sources(const PointData& pt) const {
    const double n1 = p_.n - 1.0;
    const double ratio = alpha_ * pt.x / (pt.eta * pt.q);  // φ₀'/φ₀
    return {n1 * alpha_ * (alpha_ + 1.0) * pt.x / (pt.eta * pt.eta * pt.q), -n1 * ratio * ratio, -n1 * ratio};
}

Jet OuterProfiles::phi(int i, const PointData& pt) const {
    const double eta = pt.eta, q = pt.q, x = pt.x, a = alpha_;
    switch (i) {
        case 1:
            return weighted(eta, 2.0 + a, cfg_.homog_C1 + K1_ * pt.I, K1_ / (eta * q),
                            -K1_ * (q + a * x) / (eta * eta * q * q));
        case 2: {
            const double w = std::pow(eta, -1.0 - a);
            return weighted(eta, 2.0 + a, K2_ * pt.J, -K2_ * w / (q * q),
                            K2_ * w / eta * ((1.0 + a) / (q * q) + 2.0 * a * x / (q * q * q)));
        }
        case 3:
            return weighted(eta, 1.0 + a, cfg_.homog_C3 - K3_ * pt.I, -K3_ / (eta * q),
                            K3_ * (q + a * x) / (eta * eta * q * q));
        default:
            throw Error(ErrorCode::OutOfDomain, fmt::format("no correction profile {}", i));
    }
}

Jet OuterProfiles::log_shift(double eta) const {
    return weighted(eta, 1.0 + alpha_, std::log(eta), 1.0 / eta, -1.0 / (eta * eta));
}

Jet OuterProfiles::phi4(const PointData& pt) const {
    Jet j = phi(3, pt);
    const Jet s = log_shift(pt.eta);
    return {j.value + C10_ * s.value, j.d1 + C10_ * s.d1, j.d2 + C10_ * s.d2};
}

Jet OuterProfiles::h(Sign s, const PointData& pt) const {
    const Jet a = phi(1, pt);
    const Jet b = phi(2, pt);
    const double th = p_.theta1(s);
    return {a.value + th * b.value, a.d1 + th * b.d1, a.d2 + th * b.d2};
}

Jet OuterProfiles::vkj(int k, int j, double eta, double inv_gamma) {
    if (j < 0) return {};
    if (!(eta > 1.0) && j > 0 && eta != 1.0) throw Error(ErrorCode::OutOfDomain, "v_(k,j) needs eta >= 1");
    const double L = std::log(eta);
    auto lp = [L](int e) { return e < 0 ? 0.0 : (e == 0 ? 1.0 : std::pow(L, e)); };
    const double a = k + inv_gamma;
    const double w = std::pow(eta, -a);
    const double v = w * lp(j);
    const double d1 = w / eta * (-a * lp(j) + j * lp(j - 1));
    const double d2 = w / (eta * eta) * (a * (a + 1.0) * lp(j) - (2.0 * a + 1.0) * j * lp(j - 1) + j * (j - 1.0) * lp(j - 2));
    return {v, d1, d2};
}

Jet OuterProfiles::odd_profile(PsiVariant v, const PointData& pt) const {
    return uses_phi4(v) ? phi4(pt) : phi(3, pt);
}

double OuterProfiles::search_C10() const {
    const auto grid = logspace(1e-10, p_.A * cfg_.far_factor, 400);
    const auto pts = points(grid);
    double need = 0.0;  // smallest C with φ₃ + (C/2)·shift ≥ 0 on the grid
    for (const auto& pt : pts) {
        const double s = log_shift(pt.eta).value;
        need = std::max(need, -2.0 * phi(3, pt).value / s);
    }
    double c = 1.0;
    for (int k = 0; k < 64; ++k, c *= 2.0)
        if (c >= need) return c;
    throw Error(ErrorCode::PositivityUnattained, "C10 doubling budget exhausted");
}

CoeffTable OuterProfiles::build_table(PsiVariant v, Sign s) const {
    CoeffTable t;
    t.N = d_.N;
    if (d_.N < 2) return t;
    const double n1 = p_.n - 1.0, a = alpha_, g = p_.gamma, a0 = d_.a0;
    for (int k = 3; k <= 2 * d_.N; ++k) t.c[{k, 0}] = seeds_.empty() ? 0.0 : seeds_[static_cast<std::size_t>(k - 3)];

    // leading log coefficients at infinity
    const double even_log = (2.0 + a) * (3.0 + a) * K1_;
    const double odd_log = (1.0 + a) * (2.0 + a) * ((uses_phi4(v) ? C10_ : 0.0) - K3_);

    // free constants: fit η^{p}·f'' − L log η = C + c₁η^{−α}log η + c₂η^{−α} on a far grid
    const auto etas = logspace(1e4, 1e7, 16);
    std::vector<double> offsets(etas.size());
    for (std::size_t i = 0; i < etas.size(); ++i) offsets[i] = etas[i] - p_.A;
    const auto pts = points(offsets);
    std::vector<double> ones(pts.size(), 1.0), c1(pts.size()), c2(pts.size()), ye(pts.size()), yo(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double eta = pts[i].eta, L = std::log(eta);
        c1[i] = std::pow(eta, -a) * L;
        c2[i] = std::pow(eta, -a);
        ye[i] = h(s, pts[i]).d2 * std::pow(eta, 4.0 + a) - even_log * L;
        yo[i] = odd_profile(v, pts[i]).d2 * std::pow(eta, 3.0 + a) - odd_log * L;
    }
    const double even_const = least_squares({ones, c1, c2}, ye)[0];
    const double odd_const = least_squares({ones, c1, c2}, yo)[0];
    t.fitted_even_constant = even_const;
    t.fitted_odd_constant = odd_const;

    const double th2 = p_.theta2(s);
    t.c[{4, 2}] = -n1 * even_log / (2.0 * g * a0);
    t.c[{4, 1}] = -n1 * even_const / (g * a0);
    t.c[{3, 2}] = -n1 * th2 * odd_log / (2.0 * g * a0);
    t.c[{3, 1}] = -n1 * th2 * odd_const / (g * a0);

    // level k pairs the second derivatives of index k' = 2k−2 (even) or 2k−3 (odd) with index k' + 2
    for (int k = 3; k <= d_.N; ++k) {
        for (int kp : {2 * k - 2, 2 * k - 3}) {
            const double P = (kp + a) * (kp + 1.0 + a);
            const double Q = 2.0 * kp + 1.0 + 2.0 * a;
            for (int i = 0; i <= k - 1; ++i) {
                const double di = P * t.get(kp, i) - (i + 1.0) * Q * t.get(kp, i + 1) +
                                  (i + 2.0) * (i + 1.0) * t.get(kp, i + 2);
                t.c[{kp + 2, i + 1}] = -n1 * di / (a0 * (i + 1.0) * g);
            }
        }
    }
    return t;
}

const CoeffTable& OuterProfiles::coeffs(PsiVariant v, Sign s) const { return tables_.at({v, s}); }

CoeffTable correction_coeffs(const OuterProfiles& profiles, PsiVariant v, Sign s) { return profiles.coeffs(v, s); }

PsiJet OuterProfiles::psi(PsiVariant v, Sign s, const PointData& pt, double tau) const {
    const double g = p_.gamma;
    const double e1 = std::exp(-g * tau);
    const double e2 = e1 * e1;
    const double th1 = p_.theta1(s), th2 = p_.theta2(s);
    const Jet p0 = phi0(pt);
    const Jet hh = h(s, pt);
    const Jet odd = odd_profile(v, pt);
    const Sources f = f_sources(pt);

    PsiJet out;
    out.value = p0.value + e2 * hh.value + e1 * th2 * odd.value;
    out.d_eta = p0.d1 + e2 * hh.d1 + e1 * th2 * odd.d1;
    out.d_etaeta = p0.d2 + e2 * hh.d2 + e1 * th2 * odd.d2;
    out.d_tau = -2.0 * g * e2 * hh.value - g * e1 * th2 * odd.value;
    double odd_source = f.f3;
    if (uses_phi4(v)) odd_source += C10_ * g * std::pow(pt.eta, -1.0 - alpha_);
    out.transport = -e2 * (f.f1 + th1 * f.f2) - e1 * th2 * odd_source;

    if (has_sums(v)) {
        const CoeffTable& t = coeffs(v, s);
        for (const auto& [key, c] : t.c) {
            const auto [k, j] = key;
            if (c == 0.0) continue;
            const double ek = std::exp(-k * g * tau);
            const Jet vk = vkj(k, j, pt.eta, alpha_);
            out.value += ek * c * vk.value;
            out.d_eta += ek * c * vk.d1;
            out.d_etaeta += ek * c * vk.d2;
            out.d_tau -= k * g * ek * c * vk.value;
            if (j > 0) out.transport -= ek * c * j * g * vkj(k, j - 1, pt.eta, alpha_).value;
        }
    }
    return out;
}

OuterProfiles::ConditionResiduals OuterProfiles::coefficient_conditions(PsiVariant v, Sign s, double eta) const {
    const CoeffTable& t = coeffs(v, s);
    const double n1 = p_.n - 1.0, g = p_.gamma, a0 = d_.a0, a = alpha_;
    const PointData pt = point(EtaOffset::from_eta(eta, p_.A));
    const double scale = std::pow(eta, -2.0 * a - 2.0);
    ConditionResiduals r;
    double even = n1 / a0 * h(s, pt).d2;
    double odd = n1 * p_.theta2(s) / a0 * odd_profile(v, pt).d2;
    for (int j = 1; j <= 2; ++j) {
        even += j * g * t.get(4, j) * vkj(4, j - 1, eta, a).value;
        odd += j * g * t.get(3, j) * vkj(3, j - 1, eta, a).value;
    }
    r.even_leading = even / scale;
    r.odd_leading = odd / scale;
    for (int k = 3; k <= d_.N; ++k) {
        for (int parity = 0; parity < 2; ++parity) {
            const int kp = parity == 0 ? 2 * k - 2 : 2 * k - 3;
            double sum = 0.0, size = 0.0;
            for (int j = 1; j <= k; ++j) {
                const double second = n1 / a0 * t.get(kp, j - 1) * vkj(kp, j - 1, eta, a).d2;
                const double transport = j * g * t.get(kp + 2, j) * vkj(kp + 2, j - 1, eta, a).value;
                sum += second + transport;
                size += std::abs(second) + std::abs(transport);
            }
            if (size > 0.0) r.recurrence = std::max(r.recurrence, std::abs(sum) / size);
        }
    }
    return r;
}

}  // namespace fdelab
