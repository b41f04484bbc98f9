#include <doctest.h>

#include <cmath>

#include "fdelab/error.hpp"
#include "fdelab/outer_profiles.hpp"

using namespace fdelab;

namespace {

ModelParams reference() { return ModelParams::with_defaults(3, 0.1, 1.5, 2.0); }
ModelParams low_gamma() { return ModelParams::with_defaults(3, 0.1, 0.5, 2.0); }

const OuterProfiles& ref_profiles() {
    static const OuterProfiles prof(reference(), ThresholdConfig{});
    return prof;
}
const OuterProfiles& low_profiles() {
    static const OuterProfiles prof(low_gamma(), ThresholdConfig{});
    return prof;
}

PointData at_eta(const OuterProfiles& prof, double eta) {
    return prof.point(EtaOffset::from_eta(eta, prof.params().A));
}

// Closed forms of the two integrals, independent of the quadrature path.
double closed_I(double eta, double eta0, double A, double g) {
    return g * std::log((std::pow(eta / A, 1.0 / g) - 1.0) / (std::pow(eta0 / A, 1.0 / g) - 1.0));
}
double closed_J(double eta, double A, double g) {
    return g * std::pow(eta, -1.0 / g) / (1.0 - std::pow(A / eta, 1.0 / g));
}

}  // namespace

TEST_CASE("phi0 values and transport identity") {
    const auto& prof = ref_profiles();
    const double a0 = prof.derived().a0, A = 2.0, g = 1.5;
    CHECK(prof.phi0(at_eta(prof, std::pow(2.0, g) * A)).value == doctest::Approx(a0 / 2.0).epsilon(1e-13));
    CHECK(std::abs(prof.phi0(at_eta(prof, 1e8)).value - a0) <= 1e-4 * a0);
    CHECK(prof.phi0(prof.point({1e-100})).value < 1e-99);
    for (double eta : logspace(A + 1e-6, 1e6, 50)) {
        const auto pt = at_eta(prof, eta);
        const Jet j = prof.phi0(pt);
        CHECK(std::abs(g * eta * j.d1 + j.value - a0) <= 1e-12 * a0);
    }
}

TEST_CASE("integrals match their closed forms") {
    for (const auto* prof : {&ref_profiles(), &low_profiles()}) {
        const double A = prof->params().A, g = prof->params().gamma, eta0 = prof->eta0();
        for (double eta : {A + 1e-9, A + 0.01, A + 0.5, 3.0, 10.0, 1e3, 1e6}) {
            const auto pt = at_eta(*prof, eta);
            CHECK(pt.I == doctest::Approx(closed_I(eta, eta0, A, g)).epsilon(1e-9));
            CHECK(pt.J == doctest::Approx(closed_J(eta, A, g)).epsilon(1e-9));
        }
        CHECK(prof->C2() == doctest::Approx((prof->params().n - 1) / (g * g * g) * std::pow(A, 2.0 / g) *
                                            closed_J(eta0, A, g))
                                .epsilon(1e-9));
    }
}

TEST_CASE("grid evaluation agrees with pointwise evaluation") {
    const auto& prof = ref_profiles();
    const auto offsets = logspace(1e-12, 2e4, 120);
    const auto pts = prof.points(offsets);
    for (std::size_t i = 0; i < pts.size(); i += 7) {
        const auto single = prof.point({offsets[i]});
        CHECK(pts[i].I == doctest::Approx(single.I).epsilon(1e-9));
        CHECK(pts[i].J == doctest::Approx(single.J).epsilon(1e-9));
    }
}

TEST_CASE("phi2 closed form and positivity") {
    const auto& prof = ref_profiles();
    const double A = 2.0, g = 1.5, a = 1.0 / g, B = std::pow(A, a);
    for (double eta : {A + 0.01, A + 1.0, A + 100.0}) {
        const double q = 1.0 - std::pow(A / eta, a);
        const double closed = 2.0 * B * B * std::pow(eta, -2.0 - 2.0 * a) / (g * g * q);
        const Jet p2 = prof.phi(2, at_eta(prof, eta));
        CHECK(p2.value > 0.0);
        CHECK(p2.value == doctest::Approx(closed).epsilon(1e-9));
    }
    CHECK(prof.phi(1, at_eta(prof, prof.eta0())).value == doctest::Approx(0.0));
}

TEST_CASE("corrections satisfy their first-order equations") {
    for (const auto* prof : {&ref_profiles(), &low_profiles()}) {
        const double A = prof->params().A, g = prof->params().gamma;
        const auto etas = logspace(A + 1e-6, 1e6, 1000);
        std::vector<double> offsets(etas.size());
        for (std::size_t i = 0; i < etas.size(); ++i) offsets[i] = etas[i] - A;
        double worst = 0.0;
        for (const auto& pt : prof->points(offsets)) {
            const Sources f = prof->f_sources(pt);
            const Jet p1 = prof->phi(1, pt), p2 = prof->phi(2, pt), p3 = prof->phi(3, pt);
            // residuals relative to the source, which reaches 1e12 next to A
            auto rel = [&](const Jet& j, double k, double src) {
                return std::abs(g * pt.eta * j.d1 + k * j.value - src) / std::max(1.0, std::abs(src));
            };
            worst = std::max({worst, rel(p1, 1 + 2 * g, f.f1), rel(p2, 1 + 2 * g, f.f2), rel(p3, 1 + g, f.f3)});
        }
        CHECK(worst <= 1e-8);
    }
}

TEST_CASE("sources are the phi0 ratios") {
    const auto& prof = ref_profiles();
    for (double eta : {2.001, 3.0, 50.0, 1e5}) {
        const auto pt = at_eta(prof, eta);
        const Sources f = prof.f_sources(pt);
        const Jet p0 = prof.phi0(pt);
        CHECK(f.f1 > 0.0);
        CHECK(f.f2 < 0.0);
        CHECK(f.f3 < 0.0);
        CHECK(f.f1 * p0.value + 2.0 * p0.d2 == doctest::Approx(0.0).scale(f.f1 * p0.value));
        CHECK(f.f2 == doctest::Approx(-2.0 * (p0.d1 / p0.value) * (p0.d1 / p0.value)).epsilon(1e-12));
        CHECK(f.f3 == doctest::Approx(-2.0 * p0.d1 / p0.value).epsilon(1e-12));
    }
}

TEST_CASE("analytic derivatives agree with stencils") {
    const auto& prof = ref_profiles();
    for (double eta : {2.5, 3.0, 7.0}) {
        auto value = [&](int which) {
            return [&prof, which](double e) {
                const auto pt = prof.point(EtaOffset::from_eta(e, 2.0));
                return which == 4 ? prof.phi4(pt).value : prof.phi(which, pt).value;
            };
        };
        for (int which : {1, 2, 3, 4}) {
            const auto pt = at_eta(prof, eta);
            const Jet j = which == 4 ? prof.phi4(pt) : prof.phi(which, pt);
            CHECK(fd_derivative(value(which), eta, 1, 10.0) == doctest::Approx(j.d1).epsilon(1e-6));
            CHECK(fd_derivative(value(which), eta, 2, 100.0) == doctest::Approx(j.d2).epsilon(1e-6));
        }
    }
}

TEST_CASE("v_kj family") {
    const double a = 1.0 / 1.5, g = 1.5;
    CHECK(OuterProfiles::vkj(3, -1, 5.0, a).value == 0.0);
    CHECK(OuterProfiles::vkj(3, 2, 1.0, a).value == 0.0);
    for (auto [k, j] : {std::pair{3, 0}, {4, 1}, {5, 3}}) {
        for (double eta : {std::exp(1.0), 3.3, 120.0}) {
            const Jet v = OuterProfiles::vkj(k, j, eta, a);
            const double rhs = j * g * OuterProfiles::vkj(k, j - 1, eta, a).value;
            CHECK(std::abs((1 + k * g) * v.value + g * eta * v.d1 - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
        }
    }
}

TEST_CASE("near-A laws by extrapolation") {
    const auto& prof = ref_profiles();
    const auto p = prof.params();
    const double target = (p.n - 1) / (p.gamma * p.A);
    // Richardson on a geometric sequence of offsets, error linear in the offset
    auto extrapolate = [](auto f) {
        const double f3 = f(1e-3), f4 = f(1e-4), f5 = f(1e-5);
        return (10.0 * f5 - f4) / 9.0 + 0.0 * f3;
    };
    const double hlim = extrapolate([&](double z) { return prof.h(Sign::minus, prof.point({z})).value * z; });
    CHECK(hlim == doctest::Approx(p.theta1_minus * target).epsilon(0.01));
    const double dlim = extrapolate([&](double z) { return prof.h(Sign::minus, prof.point({z})).d1 * z * z; });
    CHECK(dlim == doctest::Approx(-p.theta1_minus * target).epsilon(0.01));
    const double d2lim = extrapolate([&](double z) { return prof.h(Sign::minus, prof.point({z})).d2 * z * z * z; });
    CHECK(d2lim == doctest::Approx(2.0 * p.theta1_minus * target).epsilon(0.01));

    // the log singularity converges slowly; fit value = L·log(1/z) + c over small offsets
    std::vector<double> ones, logs, ys;
    for (double z : logspace(1e-14, 1e-8, 7)) {
        ones.push_back(1.0);
        logs.push_back(std::log(1.0 / z));
        ys.push_back(prof.phi(3, prof.point({z})).value);
    }
    CHECK(least_squares({logs, ones}, ys)[0] == doctest::Approx(target).epsilon(0.01));
    const double d1 = extrapolate([&](double z) { return prof.phi(3, prof.point({z})).d1 * z; });
    CHECK(d1 == doctest::Approx(-target).epsilon(0.01));
    const double d2 = extrapolate([&](double z) { return prof.phi(3, prof.point({z})).d2 * z * z; });
    CHECK(d2 == doctest::Approx(target).epsilon(0.01));
}

TEST_CASE("far-field leading coefficients") {
    const auto& prof = ref_profiles();
    const auto p = prof.params();
    const double a = 1.0 / p.gamma, B = std::pow(p.A, a), g = p.gamma;
    const double h_lead = (p.n - 1) * (1 + g) / (g * g * g) * B;
    const double p3_lead = -(p.n - 1) / (g * g) * B;
    // fit the free constants on a decade around 1e6 and compare the log coefficients
    std::vector<double> ones, logs, yh, y3, y4;
    for (double eta : logspace(1e5, 1e7, 9)) {
        const auto pt = at_eta(prof, eta);
        ones.push_back(1.0);
        logs.push_back(std::log(eta));
        yh.push_back(prof.h(Sign::plus, pt).value * std::pow(eta, 2 + a));
        y3.push_back(prof.phi(3, pt).value * std::pow(eta, 1 + a));
        y4.push_back(prof.phi4(pt).value * std::pow(eta, 1 + a));
    }
    CHECK(least_squares({logs, ones}, yh)[0] == doctest::Approx(h_lead).epsilon(0.05));
    CHECK(least_squares({logs, ones}, y3)[0] == doctest::Approx(p3_lead).epsilon(0.05));
    CHECK(least_squares({logs, ones}, y4)[0] == doctest::Approx(prof.C10() + p3_lead).epsilon(0.02));
    const auto pt = at_eta(prof, 1e6);
    CHECK(prof.h(Sign::plus, pt).value / (h_lead * std::pow(1e6, -2 - a) * std::log(1e6)) ==
          doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("phi4 shift and positivity") {
    const auto& prof = ref_profiles();
    const double A = 2.0, a = 1.0 / 1.5;
    const auto pt = at_eta(prof, A + 2.0);
    CHECK(prof.phi4(pt).value - prof.phi(3, pt).value ==
          doctest::Approx(prof.C10() * std::pow(A + 2.0, -a - 1.0) * std::log(A + 2.0)));
    CHECK(prof.C10() >= 1.0);
    for (const auto& q : prof.points(logspace(1e-12, A * 1e4, 300))) {
        CHECK(prof.phi4(q).value > 0.0);
        CHECK(prof.phi4(q).value >= 0.5 * prof.C10() * std::pow(q.eta, -a - 1.0) * std::log(q.eta) * (1 - 1e-12));
    }
}

TEST_CASE("psi composition") {
    const auto& prof = ref_profiles();
    const auto pt = at_eta(prof, 3.0);
    for (auto v : {PsiVariant::psi1, PsiVariant::psi3})
        CHECK(std::abs(prof.psi(v, Sign::minus, pt, 40.0).value - prof.phi0(pt).value) <= 1e-10);

    ModelParams flat = reference();
    flat.theta1_plus = 0.0;
    flat.theta2_plus = 0.0;
    ThresholdConfig cfg;
    cfg.eta0 = 3.0;
    const OuterProfiles degenerate(flat, cfg);
    const auto p0 = degenerate.point({1.0});
    CHECK(degenerate.psi(PsiVariant::psi1, Sign::plus, p0, 1.0).value ==
          doctest::Approx(degenerate.phi0(p0).value));

    for (const auto* pr : {&ref_profiles(), &low_profiles()}) {
        const double g = pr->params().gamma, a0 = pr->derived().a0;
        for (auto v : {PsiVariant::psi1, PsiVariant::psi2, PsiVariant::psi3, PsiVariant::psi4}) {
            for (Sign s : {Sign::plus, Sign::minus}) {
                for (double eta : {2.3, 5.0, 40.0}) {
                    const double tau = 2.0;
                    const auto q = pr->point(EtaOffset::from_eta(eta, 2.0));
                    const PsiJet j = pr->psi(v, s, q, tau);
                    CHECK(j.transport == doctest::Approx(j.d_tau - (g * eta * j.d_eta + j.value - a0)).scale(1.0));
                    auto in_tau = [&](double t) { return pr->psi(v, s, q, t).value; };
                    // the exact φ₀ part is removed so the stencils see only the small corrections
                    auto in_eta = [&](double e) {
                        const auto pe = pr->point(EtaOffset::from_eta(e, 2.0));
                        return pr->psi(v, s, pe, tau).value - pr->phi0(pe).value;
                    };
                    const Jet p0 = pr->phi0(q);
                    CHECK(fd_derivative(in_tau, tau, 1, 10.0) == doctest::Approx(j.d_tau).epsilon(1e-6));
                    CHECK(fd_derivative(in_eta, eta, 1, 10.0) == doctest::Approx(j.d_eta - p0.d1).epsilon(1e-6));
                    CHECK(fd_derivative(in_eta, eta, 2, 100.0) == doctest::Approx(j.d_etaeta - p0.d2).epsilon(1e-6));
                }
            }
        }
    }
}

TEST_CASE("coefficient tables") {
    CHECK(ref_profiles().coeffs(PsiVariant::psi4, Sign::plus).empty());
    CHECK(ref_profiles().default_variant() == PsiVariant::psi3);

    const auto& prof = low_profiles();
    CHECK(prof.default_variant() == PsiVariant::psi4);
    const auto p = prof.params();
    const double a = 1.0 / p.gamma, g = p.gamma, a0 = prof.derived().a0, B = std::pow(p.A, a);
    for (Sign s : {Sign::plus, Sign::minus}) {
        const auto& t = prof.coeffs(PsiVariant::psi4, s);
        CHECK(t.N == 2);
        // c_{4,2} cancels the log coefficient of h'' derived from the far-field lead of h
        const double lead = (p.n - 1) * (1 + g) / (g * g * g) * B;
        CHECK(t.get(4, 2) == doctest::Approx(-(p.n - 1) * lead * (2 + a) * (3 + a) / (2 * g * a0)).epsilon(1e-12));
        for (auto k : {3, 4})
            for (auto j : {1, 2}) CHECK(t.c.count({k, j}) == 1);
        if (s == Sign::minus) CHECK(t.get(3, 1) == 0.0);
        // leading conditions decay relative to the η^{−2/γ−2} scale
        const auto near = prof.coefficient_conditions(PsiVariant::psi4, s, 1e3);
        const auto far = prof.coefficient_conditions(PsiVariant::psi4, s, 1e5);
        CHECK(std::abs(far.even_leading) < 0.05 * std::abs(near.even_leading) + 1e-12);
        CHECK(std::abs(far.odd_leading) < 0.05 * std::abs(near.odd_leading) + 1e-12);
        CHECK(near.recurrence <= 1e-8);
    }
}

TEST_CASE("higher recurrence levels vanish identically") {
    const OuterProfiles prof(ModelParams::with_defaults(3, 0.1, 0.25, 2.0), ThresholdConfig{},
                             {0.3, -0.2, 0.1, 0.05});
    CHECK(prof.derived().N == 3);
    for (double eta : logspace(2.5, 1e4, 12)) {
        CHECK(prof.coefficient_conditions(PsiVariant::psi4, Sign::plus, eta).recurrence <= 1e-12);
        CHECK(prof.coefficient_conditions(PsiVariant::psi2, Sign::minus, eta).recurrence <= 1e-12);
    }
    bool thrown = false;
    try {
        const OuterProfiles bad(ModelParams::with_defaults(3, 0.1, 0.25, 2.0), ThresholdConfig{}, {1.0});
    } catch (const Error& e) {
        thrown = e.code() == ErrorCode::RecurrenceUnderdetermined;
    }
    CHECK(thrown);
}
