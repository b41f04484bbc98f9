#pragma once

#include <string>
#include <vector>

namespace fdelab {

/// Which barrier of the pair: the supersolution (+) or the subsolution (−).
enum class Sign { plus, minus };

[[nodiscard]] constexpr double sign_factor(Sign s) noexcept { return s == Sign::plus ? 1.0 : -1.0; }
[[nodiscard]] const char* to_string(Sign s) noexcept;

struct ModelParams {
    int n = 3;
    double m = 0.1;
    double gamma = 1.5;
    double A = 2.0;
    double T = 1.0;
    double lambda = 1.0;
    double theta1_minus = 0.0;
    double theta1_plus = 0.0;
    double theta2_minus = 0.0;
    double theta2_plus = 0.0;
    double epsilon = 0.0;

    /// Parameters with the default correction weights (unit margins inside the open constraints).
    [[nodiscard]] static ModelParams with_defaults(int n, double m, double gamma, double A,
                                                   double T = 1.0, double lambda = 1.0);

    [[nodiscard]] double theta1(Sign s) const noexcept { return s == Sign::plus ? theta1_plus : theta1_minus; }
    [[nodiscard]] double theta2(Sign s) const noexcept { return s == Sign::plus ? theta2_plus : theta2_minus; }
};

struct DerivedConstants {
    double a0 = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
    int N = 1;
    double exponent_rate = 0.0;
    /// γA, the advection speed of the inner frame.
    double beta = 0.0;
    /// a0/(γA), limiting slope of the self-similar profile in log-radius.
    double slope_limit = 0.0;
};

/// Checks the standing assumptions on n, m, γ, A, T, λ, ε and returns the derived constants.
/// The θ constraints are not checked here.
[[nodiscard]] DerivedConstants derive_constants(const ModelParams& p);

/// Human-readable list of violated θ constraints (empty when all hold).
[[nodiscard]] std::vector<std::string> theta_violations(const ModelParams& p);

/// derive_constants plus the θ constraints; throws InvalidParameter naming the first violation.
[[nodiscard]] DerivedConstants validate_params(const ModelParams& p);

/// Free constants and search controls of the construction.
struct ThresholdConfig {
    double eta0 = 0.0;        ///< base point of the integral representations; 0 selects A + 1
    double homog_C1 = 0.0;
    double homog_C3 = 0.0;
    double C10 = 0.0;         ///< 0 selects the doubling search
    double xi0 = 0.0;         ///< 0 selects the threshold search
    double xi1 = 10.0;
    double tau_start = 0.0;   ///< 0 selects the threshold search
    double delta0 = 0.5;
    double delta1 = 0.5;
    int max_doublings = 8;
    int space_points = 200;
    int tau_points = 40;
    double tau_span = 20.0;
    double far_factor = 1e4;  ///< far-field sweeps reach η = A·far_factor
    double verdict_atol = 1e-9;
    double inconclusive_fraction = 1e-3;

    [[nodiscard]] double base_point(double A) const noexcept { return eta0 > 0.0 ? eta0 : A + 1.0; }
};

/// Rejects inconsistent threshold settings; InvalidParameter on failure.
void check_thresholds(const ThresholdConfig& cfg, const ModelParams& p);

// Coordinate frames. s = log r is the log-radius; t < T throughout.

struct PhysicalPoint {
    double u;
    double r;
};

struct LogRadialPoint {
    double w;
    double s;
};

struct LogRadialSample {
    double w;
    double s;
    double t;
};

struct OuterPoint {
    double w_hat;
    double eta;
    double tau;
};

struct InnerPoint {
    double w_bar;
    double xi;
    double tau;
};

[[nodiscard]] LogRadialPoint to_log_radial(PhysicalPoint pt, double m);
[[nodiscard]] PhysicalPoint from_log_radial(LogRadialPoint pt, double m);

[[nodiscard]] OuterPoint to_outer(LogRadialSample pt, const ModelParams& p);
[[nodiscard]] LogRadialSample from_outer(OuterPoint pt, const ModelParams& p);

[[nodiscard]] InnerPoint to_inner(LogRadialSample pt, const ModelParams& p);
[[nodiscard]] LogRadialSample from_inner(InnerPoint pt, const ModelParams& p);

/// τ = −log(T − t); TimeBeyondExtinction when t ≥ T.
[[nodiscard]] double tau_of(double t, const ModelParams& p);

}  // namespace fdelab
