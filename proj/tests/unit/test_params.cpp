#include <doctest.h>

#include <cmath>
#include <random>

#include "fdelab/error.hpp"
#include "fdelab/params.hpp"

using namespace fdelab;

namespace {

ModelParams reference() { return ModelParams::with_defaults(3, 0.1, 1.5, 2.0); }

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::PreconditionViolated;
}

}  // namespace

TEST_CASE("derived constants of the reference set") {
    const auto d = validate_params(reference());
    // oracle: closed forms evaluated by hand, 2·2·0.7/0.9 and 2.5/0.9
    CHECK(d.a0 == doctest::Approx(2.8 / 0.9).epsilon(1e-14));
    CHECK(d.exponent_rate == doctest::Approx(2.5 / 0.9).epsilon(1e-14));
    CHECK(d.b1 == doctest::Approx(-0.8 / 0.9).epsilon(1e-14));
    CHECK(d.b2 == doctest::Approx(0.5 / 0.9).epsilon(1e-14));
    CHECK(d.N == 1);
    CHECK(d.beta == doctest::Approx(3.0));
    CHECK(d.slope_limit == doctest::Approx(2.8 / 2.7));
}

TEST_CASE("N follows the smallest-integer rule") {
    CHECK(validate_params(ModelParams::with_defaults(3, 0.1, 0.5, 2.0)).N == 2);
    CHECK(validate_params(ModelParams::with_defaults(3, 0.1, 1.0, 2.0)).N == 2);
    CHECK(validate_params(ModelParams::with_defaults(3, 0.1, 0.25, 2.0)).N == 3);
}

TEST_CASE("parameter validation rejects the excluded ranges") {
    auto with = [](auto edit) {
        auto p = reference();
        edit(p);
        return code_of([&] { (void)validate_params(p); });
    };
    CHECK(with([](ModelParams& p) { p.m = 0.2; }) == ErrorCode::InvalidParameter);
    CHECK(with([](ModelParams& p) { p.n = 2; }) == ErrorCode::InvalidParameter);
    CHECK(with([](ModelParams& p) { p.A = 1.0; }) == ErrorCode::InvalidParameter);
    CHECK(with([](ModelParams& p) { p.epsilon = 0.25; }) == ErrorCode::InvalidParameter);
    CHECK(with([](ModelParams& p) { p.theta2_minus = 0.1; }) == ErrorCode::InvalidParameter);
    CHECK(with([](ModelParams& p) { p.theta1_minus = p.theta1_minus + 1.0; }) == ErrorCode::InvalidParameter);
    CHECK(with([](ModelParams& p) { p.theta2_plus = 0.5; }) == ErrorCode::InvalidParameter);
    CHECK(theta_violations(reference()).empty());
}

TEST_CASE("log-radial transform") {
    const auto w = to_log_radial({1.0, 1.0}, 0.1);
    CHECK(w.w == doctest::Approx(1.0));
    CHECK(w.s == doctest::Approx(0.0));
    const auto back = from_log_radial(to_log_radial({0.37, 2.5}, 0.1), 0.1);
    CHECK(back.u == doctest::Approx(0.37).epsilon(1e-14));
    CHECK(back.r == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(code_of([] { (void)to_log_radial({-1.0, 1.0}, 0.1); }) == ErrorCode::NonPositiveInput);

    // the s-constant extinction solution maps to w = a0(T−t)
    const auto p = reference();
    const double a0 = validate_params(p).a0;
    const double t = 0.3, r = 1.7;
    const double u = std::pow(a0 * (p.T - t) / (r * r), 1.0 / (1.0 - p.m));
    CHECK(to_log_radial({u, r}, p.m).w == doctest::Approx(a0 * (p.T - t)).epsilon(1e-13));
}

TEST_CASE("outer and inner frames") {
    const auto p = reference();
    const double a0 = validate_params(p).a0;
    const auto o = to_outer({2.0, 3.0, p.T - 1.0}, p);
    CHECK(o.tau == doctest::Approx(0.0));
    CHECK(o.w_hat == doctest::Approx(2.0));
    CHECK(o.eta == doctest::Approx(3.0));
    CHECK(to_outer({a0 * 0.25, 7.0, p.T - 0.25}, p).w_hat == doctest::Approx(a0));
    CHECK(to_inner({a0 * 0.25, 7.0, p.T - 0.25}, p).w_bar ==
          doctest::Approx(a0 * std::exp(p.gamma * std::log(4.0))));
    CHECK(code_of([&] { (void)to_outer({1.0, 1.0, p.T}, p); }) == ErrorCode::TimeBeyondExtinction);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dw(0.1, 5.0), ds(-3.0, 30.0), dt(-2.0, 0.999);
    for (int i = 0; i < 200; ++i) {
        const LogRadialSample x{dw(rng), ds(rng), dt(rng)};
        const auto ro = from_outer(to_outer(x, p), p);
        const auto ri = from_inner(to_inner(x, p), p);
        CHECK(ro.w == doctest::Approx(x.w).epsilon(1e-12));
        CHECK(ro.s == doctest::Approx(x.s).epsilon(1e-12));
        CHECK(ri.w == doctest::Approx(x.w).epsilon(1e-12));
        CHECK(ri.s == doctest::Approx(x.s).epsilon(1e-12));
        const auto in = to_inner(x, p);
        const auto out = to_outer(x, p);
        // w̄(ξ,τ) = e^{γτ} ŵ(A + e^{−γτ}ξ, τ)
        CHECK(in.w_bar == doctest::Approx(std::exp(p.gamma * out.tau) * out.w_hat).epsilon(1e-12));
        CHECK(p.A + std::exp(-p.gamma * in.tau) * in.xi == doctest::Approx(out.eta).epsilon(1e-12));
    }
}

TEST_CASE("threshold settings are checked") {
    const auto p = reference();
    ThresholdConfig c;
    c.eta0 = 1.5;
    CHECK(code_of([&] { check_thresholds(c, p); }) == ErrorCode::InvalidParameter);
    ThresholdConfig ok;
    CHECK(ok.base_point(p.A) == doctest::Approx(3.0));
}
