#pragma once

#include <cstddef>
#include <string>

#include "fdelab/inner_matching.hpp"
#include "fdelab/outer_profiles.hpp"
#include "fdelab/params.hpp"

namespace fdelab {

/// Smallest η − A the outer sweeps use; the J integrand overflows below about 1e−150.
inline constexpr double min_outer_offset = 1e-140;

/// A profile sample in either frame: value with first/second space and first time derivative.
struct FieldSample {
    double value = 0.0;
    double d_x = 0.0;
    double d_xx = 0.0;
    double d_tau = 0.0;
};

/// Operator value with the sum of absolute values of its terms (the scale for sign verdicts).
struct Residual {
    double value = 0.0;
    double scale = 0.0;
};

/// L₀ of an outer-frame profile ŵ(η, τ), evaluated term by term.
[[nodiscard]] double L0_residual(const FieldSample& w, double eta, double tau, const ModelParams& p);
/// L₀ of an outer barrier using its assembled transport term, which avoids the O(1) cancellation
/// in ψ_τ − (γηψ_η + ψ − a₀).
[[nodiscard]] Residual L0_structured(const PsiJet& psi, double tau, const ModelParams& p);
/// The two blocks of L₀(ψ₁) = (n−1)(e^{−2γτ}I₁ + e^{−γτ}I₂).
struct L0Split {
    double I1 = 0.0;
    double I2 = 0.0;
};
[[nodiscard]] L0Split L0_decomposition(const OuterProfiles& outer, Sign s, const PointData& pt, double tau);

/// L₁ of an inner-frame profile w̄(ξ, τ), evaluated term by term.
[[nodiscard]] double L1_residual(const FieldSample& w, double tau, const ModelParams& p);
/// L₁ of the glued barrier: the reduced form on the inner part (stationary identity applied), the
/// outer structured L₀ beyond the knot.
[[nodiscard]] Residual L1_glued(const Matching& match, Sign s, double eps, double xi, double tau);

enum class Region { near_a_band, far_field, glued_outer, inner };

[[nodiscard]] const char* to_string(Region r) noexcept;

struct WorstPoint {
    double x = 0.0;    ///< η − A for outer regions, ξ for the inner one
    double tau = 0.0;
    double value = 0.0;
    double scale = 0.0;
};

struct ResidualReport {
    std::string op;  ///< "L0" or "L1"
    Region region = Region::glued_outer;
    Sign sign = Sign::plus;
    PsiVariant variant = PsiVariant::psi1;
    double eps = 0.0;
    double x_lo = 0.0, x_hi = 0.0;  ///< sampled space range at the first τ
    double tau_lo = 0.0, tau_hi = 0.0;
    int space_points = 0, tau_points = 0;
    double min = 0.0, max = 0.0, mean = 0.0;
    std::size_t total = 0, inconclusive = 0, violations = 0;
    bool supersolution = true;  ///< expected sign: ≥ 0 for the upper barrier
    bool pass = false;
    WorstPoint worst;
    ThresholdConfig thresholds;
};

/// Sweeps L₀ of the outer barrier over a region on a log-spaced offset × linear τ grid.
/// Upper barriers must satisfy L₀ ≥ −atol, lower ones L₀ ≤ atol, atol = verdict_atol × term scale.
[[nodiscard]] ResidualReport verify_sign_region(const OuterProfiles& outer, PsiVariant v, Sign s, Region region,
                                                const ThresholdConfig& cfg);
/// Sweeps L₁ of the glued barrier over the inner half-line ξ ∈ [xi_lo, ξ₁].
[[nodiscard]] ResidualReport verify_inner_region(const Matching& match, Sign s, double eps, const ThresholdConfig& cfg,
                                                 double xi_lo = -30.0);

/// Throws VerdictViolated naming the worst point when the report failed.
void require_pass(const ResidualReport& r);

struct ThresholdResult {
    ThresholdConfig cfg;  ///< xi0, tau_start and delta0 filled with the passing values
    int iterations = 0;
    ResidualReport report;
};

/// Doubling search (ξ₀ and τ doubled, δ₀ halved) until the glued outer region passes.
[[nodiscard]] ThresholdResult find_thresholds(const OuterProfiles& outer, PsiVariant v, Sign s,
                                              const ThresholdConfig& cfg);
/// Doubling search on τ for the inner verdict of the glued barrier; returns the first passing τ₃.
[[nodiscard]] ThresholdResult find_inner_threshold(const Matching& match, Sign s, double eps, const ThresholdConfig& cfg,
                                                   double tau_start);

}  // namespace fdelab
