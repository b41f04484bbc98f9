#pragma once

#include <array>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "fdelab/outer_profiles.hpp"
#include "fdelab/self_similar.hpp"

namespace fdelab {

/// Value and derivatives of a glued barrier in the inner variables (ξ, τ).
struct GluedJet {
    double value = 0.0;
    double d_xi = 0.0;
    double d_xixi = 0.0;
    double d_tau = 0.0;
    bool inner = false;  ///< true for ξ ≤ ξ₁ (self-similar part)
    double s = 0.0;      ///< profile argument ξ + C (inner part only)
};

struct CornerSlopes {
    double left = 0.0;   ///< ξ → ξ₁⁻, inner part
    double right = 0.0;  ///< ξ → ξ₁⁺, outer part
    /// left > right for the upper barrier, left < right for the lower one
    bool holds = false;
};

/// Matches the self-similar inner profile to the outer barrier at the knot ξ₁ and evaluates the
/// glued barriers ψ_ε^±. Matching constants are memoised per (sign, ε, τ).
class Matching {
public:
    Matching(const OuterProfiles& outer, const SelfSimilarProfile& inner, double xi1);
    /// One variant for both signs.
    Matching(const OuterProfiles& outer, const SelfSimilarProfile& inner, double xi1, PsiVariant variant);
    Matching(const OuterProfiles& outer, const SelfSimilarProfile& inner, double xi1, PsiVariant upper,
             PsiVariant lower);
    Matching(const Matching& other);

    [[nodiscard]] double xi1() const noexcept { return xi1_; }
    [[nodiscard]] PsiVariant variant(Sign s) const noexcept { return variants_[s == Sign::plus ? 0 : 1]; }
    [[nodiscard]] const OuterProfiles& outer() const noexcept { return *outer_; }
    [[nodiscard]] const SelfSimilarProfile& inner() const noexcept { return *inner_; }

    /// Outer jet e^{γτ}ψ(A + ξe^{−γτ}, τ) in inner variables, ξ > 0.
    [[nodiscard]] GluedJet outer_jet(Sign s, double xi, double tau) const;
    /// The outer structured operator value at the same point (equal to L₁ of the outer part).
    [[nodiscard]] PsiJet outer_psi(Sign s, double xi, double tau) const;

    /// C with Φ(ξ₁ + C) = (1 ± ε)e^{γτ}ψ(A + ξ₁e^{−γτ}, τ).
    [[nodiscard]] double solve(Sign s, double eps, double tau) const;
    /// dC/dτ from differentiating the matching identity.
    [[nodiscard]] double derivative(Sign s, double eps, double tau) const;

    [[nodiscard]] GluedJet glued(Sign s, double eps, double xi, double tau) const;
    [[nodiscard]] CornerSlopes corner(Sign s, double eps, double tau) const;
    /// |inner − outer| at ξ₁ relative to the outer value.
    [[nodiscard]] double continuity_gap(Sign s, double eps, double tau) const;

private:
    const OuterProfiles* outer_;
    const SelfSimilarProfile* inner_;
    double xi1_;
    std::array<PsiVariant, 2> variants_;  // {upper, lower}
    mutable std::mutex mutex_;
    mutable std::map<std::tuple<int, double, long long>, double> memo_;
};

/// Limits of the matching data as τ → ∞ (each value taken where it has stabilised).
struct MatchingLimits {
    double growth_rate = 0.0;         ///< d/dτ of the upper matching value
    double growth_rate_target = 0.0;  ///< (n−1)θ₂⁺/A
    double lower_value = 0.0;         ///< lower matching value
    double lower_value_target = 0.0;  ///< a₀ξ₁/(γA) + (n−1)θ₁⁻/(γAξ₁)
    double right_slope[2] = {0.0, 0.0};         ///< outer slope at ξ₁, {plus, minus}
    double right_slope_target[2] = {0.0, 0.0};  ///< a₀/(γA) − (n−1)θ₂/(γAξ₁) − (n−1)θ₁/(γAξ₁²)
    double max_abs_C_rate = 0.0;      ///< sup |dC/dτ| over the sampled window, both signs
    double tau_eval = 0.0;
};

/// Evaluates the limits at τ_eval and checks that they have stabilised against τ_eval − 10;
/// ExtrapolationUnstable otherwise.
[[nodiscard]] MatchingLimits matching_limits(const Matching& match, double tau_eval = 40.0, double tau_start = 10.0);

/// Corner verdicts at ε on a τ grid.
[[nodiscard]] bool corner_verdicts_hold(const Matching& match, double eps, std::span<const double> taus);
/// ψ_ε⁺ > ψ_ε⁻ > 0 on a ξ × τ grid; returns the number of violations.
[[nodiscard]] std::size_t ordering_violations(const Matching& match, double eps, std::span<const double> xis,
                                              std::span<const double> taus);

struct EpsilonBounds {
    double eps1 = 0.0;  ///< corner verdicts
    double eps2 = 0.0;  ///< ordering
    static constexpr double cap = 0.249;
};

/// Largest admissible ε (bisected to 1e−3, capped below 1/4) for the corner verdicts and for the
/// ordering on the given grids; NoAdmissibleEpsilon when ε = 0 already fails.
[[nodiscard]] EpsilonBounds find_epsilon_bounds(const Matching& match, std::span<const double> taus,
                                                std::span<const double> xis);

/// Doubling search for the smallest knot ξ₂ ≥ start (and τ₄ ≥ tau_start) where both corner verdicts
/// hold at ε = 0 over a window of length span. A failing window doubles τ when the verdicts hold at
/// τ = max(40, τ + 2·span), and doubles the knot otherwise. Returns {ξ₂, τ₄}.
struct CornerThresholds {
    double xi2 = 0.0;
    double tau4 = 0.0;
};
[[nodiscard]] CornerThresholds find_corner_thresholds(const OuterProfiles& outer, const SelfSimilarProfile& inner,
                                                      double xi_start, double tau_start, double span,
                                                      int tau_points, int max_doublings);

}  // namespace fdelab
