#pragma once

#include <vector>

#include "fdelab/numerics.hpp"
#include "fdelab/outer_profiles.hpp"
#include "fdelab/params.hpp"

namespace fdelab {

struct SelfSimilarOptions {
    double r_start = 1e-6;  ///< series start radius
    double s_max = 500.0;
    OdeSpec ode{};
};

/// The stationary inner profile Φ(s) = e^{2s}v₀(e^s)^{1−m} in the log-radius s, where v₀ is the
/// radial solution of the elliptic problem with v₀(0) = λ.
///
/// The ODE is integrated for (log Φ, (log Φ)') from the origin series outward; values between
/// accepted steps come from quintic Hermite interpolation of log Φ. Below the series start the
/// two-term series is used, beyond s_max the fitted large-s expansion.
class SelfSimilarProfile {
public:
    [[nodiscard]] static SelfSimilarProfile shoot(const ModelParams& p, const SelfSimilarOptions& opt = {});

    /// Φ with first and second derivatives.
    [[nodiscard]] Jet jet(double s) const;
    [[nodiscard]] double value(double s) const { return jet(s).value; }
    [[nodiscard]] double slope(double s) const { return jet(s).d1; }
    /// v₀(r) recovered from Φ.
    [[nodiscard]] double v0(double r) const;
    /// The unique s with Φ(s) = target; TargetBelowRange when target ≤ 0.
    [[nodiscard]] double inverse(double target) const;

    /// (n−1)(Φ''/Φ + b₁Φ'²/Φ² + b₂Φ'/Φ) − a₀ + γAΦ', zero for the exact profile.
    [[nodiscard]] double stationary_residual(double s) const;

    [[nodiscard]] double s_min() const noexcept { return s_.front(); }
    [[nodiscard]] double s_max() const noexcept { return s_.back(); }
    [[nodiscard]] double slope_limit() const noexcept { return d_.slope_limit; }
    /// −(n−1)b₂/(γA), the log coefficient of the large-s expansion.
    [[nodiscard]] double log_coefficient() const noexcept;
    [[nodiscard]] double K1() const noexcept { return tail_[0]; }
    /// True when Φ' at s_max is within 1e−6 of the limiting slope (rarely reached: the
    /// approach is like 1/s).
    [[nodiscard]] bool slope_converged() const noexcept { return slope_converged_; }
    [[nodiscard]] const std::vector<double>& nodes() const noexcept { return s_; }
    [[nodiscard]] const ModelParams& params() const noexcept { return p_; }

private:
    SelfSimilarProfile() = default;
    [[nodiscard]] double log_rhs(double ell, double p) const;
    [[nodiscard]] Jet series(double s) const;
    [[nodiscard]] Jet tail(double s) const;

    ModelParams p_;
    DerivedConstants d_;
    double v2_ = 0.0;                 // r² coefficient of the origin series
    std::vector<double> s_, ell_, dell_, ddell_;
    double tail_[3] = {0.0, 0.0, 0.0};  // K₁ and the fitted 1/s, log s/s corrections
    bool slope_converged_ = false;
};

/// Tail fit of Φ against the large-s expansion.
struct TailFitReport {
    double slope = 0.0;
    double slope_target = 0.0;
    double slope_rel_dev = 0.0;
    double log_coefficient = 0.0;
    double log_target = 0.0;
    double log_rel_dev = 0.0;
    double K1 = 0.0;
    /// Largest change of K₁ when the fit window is shifted by ±20%.
    double K1_window_spread = 0.0;
};

/// Free fit of slope, log coefficient and intercept on the last decade of s; InsufficientTail
/// if the computed range is too short for a fit.
[[nodiscard]] TailFitReport verify_tail_fit(const SelfSimilarProfile& profile);

}  // namespace fdelab
