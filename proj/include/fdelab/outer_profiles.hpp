#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "fdelab/numerics.hpp"
#include "fdelab/params.hpp"

namespace fdelab {

/// Position in the outer variable, held as the offset η − A so points inside the inner layer
/// (offsets far below machine epsilon relative to A) stay exact.
struct EtaOffset {
    double z;

    [[nodiscard]] static EtaOffset from_eta(double eta, double A) noexcept { return {eta - A}; }
};

/// Value with first and second derivatives in one variable.
struct Jet {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

struct Sources {
    double f1 = 0.0;
    double f2 = 0.0;
    double f3 = 0.0;
};

/// Everything the profile evaluators need at one η.
struct PointData {
    double z = 0.0;    ///< η − A
    double eta = 0.0;
    double x = 0.0;    ///< (A/η)^{1/γ}
    double q = 0.0;    ///< 1 − x
    double I = 0.0;    ///< ∫_{η0}^{η} dρ / (ρ (1 − (A/ρ)^{1/γ}))
    double J = 0.0;    ///< ∫_{η}^{∞} ρ^{−1−1/γ} / (1 − (A/ρ)^{1/γ})² dρ
};

enum class PsiVariant { psi1, psi2, psi3, psi4 };

[[nodiscard]] const char* to_string(PsiVariant v) noexcept;

/// Coefficients c_{k,j} of the power-log corrections, 3 ≤ k ≤ 2N.
struct CoeffTable {
    int N = 1;
    std::map<std::pair<int, int>, double> c;
    /// Free constants of the leading conditions, fitted from the profiles.
    double fitted_even_constant = 0.0;
    double fitted_odd_constant = 0.0;

    [[nodiscard]] double get(int k, int j) const;
    [[nodiscard]] bool empty() const noexcept { return c.empty(); }
};

/// ψ and the derivatives the operators consume. `transport` is ψ_τ − (γηψ_η + ψ − a0)
/// assembled from the first-order equations each piece satisfies.
struct PsiJet {
    double value = 0.0;
    double d_eta = 0.0;
    double d_etaeta = 0.0;
    double d_tau = 0.0;
    double transport = 0.0;
};

class OuterProfiles {
public:
    /// Builds the profile set: the φ₂ normalisation, C₁₀ (searched unless configured), and the
    /// coefficient tables for both signs. `seeds` holds c_{k,0} for k = 3..2N (empty means zeros).
    OuterProfiles(const ModelParams& p, const ThresholdConfig& cfg, std::vector<double> seeds = {},
                  QuadratureSpec quad = {});

    [[nodiscard]] const ModelParams& params() const noexcept { return p_; }
    [[nodiscard]] const DerivedConstants& derived() const noexcept { return d_; }
    [[nodiscard]] double eta0() const noexcept { return eta0_; }
    [[nodiscard]] double C2() const noexcept { return C2_; }
    [[nodiscard]] double C10() const noexcept { return C10_; }
    /// ψ₃ for γ > 1, ψ₄ otherwise (both built on φ₄).
    [[nodiscard]] PsiVariant default_variant() const noexcept;
    /// Variant used by the glued barriers. The lower barrier has θ₂ = 0, so ψ₃/ψ₄ coincide with
    /// ψ₁/ψ₂. The upper barrier uses the φ₃ forms ψ₁/ψ₂: at large η the C₁₀ shift adds
    /// −θ₂C₁₀γη^{−1−1/γ}e^{−γτ} to L₀, which beats the θ₂ > b₂ margin whenever φ₄ > 0 at infinity.
    [[nodiscard]] PsiVariant barrier_variant(Sign s) const noexcept;

    [[nodiscard]] PointData point(EtaOffset at) const;
    /// Points for increasing offsets; the integrals are accumulated segment by segment.
    [[nodiscard]] std::vector<PointData> points(std::span<const double> sorted_offsets) const;

    [[nodiscard]] Jet phi0(const PointData& pt) const;
    [[nodiscard]] Sources f_sources(const PointData& pt) const;
    /// φ₁, φ₂ or φ₃ from the integral representations.
    [[nodiscard]] Jet phi(int i, const PointData& pt) const;
    [[nodiscard]] Jet phi4(const PointData& pt) const;
    [[nodiscard]] Jet h(Sign s, const PointData& pt) const;
    /// η^{−k−1/γ}(log η)^j; zero for j < 0.
    [[nodiscard]] static Jet vkj(int k, int j, double eta, double inv_gamma);

    [[nodiscard]] const CoeffTable& coeffs(PsiVariant v, Sign s) const;
    [[nodiscard]] PsiJet psi(PsiVariant v, Sign s, const PointData& pt, double tau) const;
    [[nodiscard]] PsiJet psi(PsiVariant v, Sign s, EtaOffset at, double tau) const { return psi(v, s, point(at), tau); }

    /// The leading conditions at η divided by η^{−2/γ−2}, and the largest k ≥ 3 sum relative to
    /// the sum of its absolute terms.
    struct ConditionResiduals {
        double even_leading = 0.0;
        double odd_leading = 0.0;
        double recurrence = 0.0;
    };
    [[nodiscard]] ConditionResiduals coefficient_conditions(PsiVariant v, Sign s, double eta) const;

private:
    [[nodiscard]] double integral_I(double z) const;
    [[nodiscard]] double integral_J(double z) const;
    [[nodiscard]] double tail_J(double x) const;
    [[nodiscard]] double I_segment(double za, double zb) const;
    [[nodiscard]] double J_segment(double za, double zb) const;
    [[nodiscard]] double q_of(double z) const;
    [[nodiscard]] Jet log_shift(double eta) const;  // η^{−1−1/γ} log η
    [[nodiscard]] Jet odd_profile(PsiVariant v, const PointData& pt) const;
    [[nodiscard]] double search_C10() const;
    [[nodiscard]] CoeffTable build_table(PsiVariant v, Sign s) const;

    ModelParams p_;
    DerivedConstants d_;
    ThresholdConfig cfg_;
    QuadratureSpec quad_;
    std::vector<double> seeds_;
    double alpha_ = 0.0;  // 1/γ
    double B_ = 0.0;      // A^{1/γ}
    double eta0_ = 0.0;
    double zcut_ = 0.0;   // offset where the J tail series takes over
    double K1_ = 0.0, K2_ = 0.0, K3_ = 0.0;
    double C2_ = 0.0;
    double C10_ = 0.0;
    std::map<std::pair<PsiVariant, Sign>, CoeffTable> tables_;
};

/// The c_{k,j} table for one variant and sign (exposed for tests and reports).
[[nodiscard]] CoeffTable correction_coeffs(const OuterProfiles& profiles, PsiVariant v, Sign s);

}  // namespace fdelab
