#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "fdelab/inner_matching.hpp"
#include "fdelab/params.hpp"

namespace fdelab {

/// Physical barrier u_ε^± built from a glued barrier. Radii and u span e^{±e^{γτ}} scales, so
/// positions are passed as s = log r and values returned as log u; time is passed as the gap
/// g = T − t, which keeps its precision as t → T.
class PhysicalBarrier {
public:
    PhysicalBarrier(const Matching& match, Sign s, double eps, double tau0);

    [[nodiscard]] Sign sign() const noexcept { return sign_; }
    [[nodiscard]] double eps() const noexcept { return eps_; }
    [[nodiscard]] double tau0() const noexcept { return tau0_; }
    [[nodiscard]] const Matching& matching() const noexcept { return *match_; }

    /// log r₁(t) = ξ₁ + A g^{−γ}.
    [[nodiscard]] double log_r1(double gap) const;
    /// log u at |x| = e^s, from ψ_ε^±.
    [[nodiscard]] double log_u(double s, double gap) const;
    /// log u at x = 0.
    [[nodiscard]] double log_u_origin(double gap) const;
    /// log u for |x| ≤ r₁ through the radial profile v₀ instead of ψ_ε^±.
    [[nodiscard]] double log_u_inner_formula(double s, double gap) const;
    /// log u for |x| ≥ r₁ from the outer barrier alone.
    [[nodiscard]] double log_u_outer_formula(double s, double gap) const;
    /// Scaled profile w̄ = ψ_ε^±(ξ, τ).
    [[nodiscard]] double w_bar(double xi, double tau) const;

private:
    [[nodiscard]] double check_gap(double gap) const;

    const Matching* match_;
    Sign sign_;
    double eps_;
    double tau0_;
};

/// Builds u_ε^+ and u_ε^-; EpsilonOutOfRange unless 0 ≤ ε < min(ε₁, ε₂).
[[nodiscard]] std::pair<PhysicalBarrier, PhysicalBarrier> assemble_u_barriers(const Matching& match, double eps,
                                                                            const EpsilonBounds& bounds, double tau0);

/// Counts points of an (ξ × τ) grid, plus the origin at each τ, where u⁺ > u⁻ > 0 fails.
[[nodiscard]] std::size_t u_ordering_violations(const PhysicalBarrier& upper, const PhysicalBarrier& lower,
                                                std::span<const double> xis, std::span<const double> taus);

/// Surface term across the knot, integrated over τ ∈ [tau_lo, tau_hi] with test function 1.
struct CornerTerm {
    int sign = 0;                ///< −1, 0 or +1
    double log_magnitude = 0.0;  ///< log |J₁|
    double tau_lo = 0.0, tau_hi = 0.0;
};
[[nodiscard]] CornerTerm weak_corner_term(const Matching& match, Sign s, double eps, double tau_lo, double tau_hi,
                                          int points = 401);

/// Uniform grid on the co-moving window ξ ∈ [xi_lo, xi_hi] and a constant step in τ.
struct GridSpec {
    double xi_lo = -10.0;
    double xi_hi = 40.0;
    int points = 2001;
    double dtau = 0.02;

    [[nodiscard]] double dxi() const noexcept { return (xi_hi - xi_lo) / (points - 1); }
};

struct SolverSpec {
    int max_newton = 40;
    double newton_tol = 1e-12;  ///< on max |δ log w|
    double max_log_change = 1.0;  ///< Newton update cap in log w per iteration
    int max_halvings = 12;      ///< step rejections allowed per step
    int startup_steps = 4;      ///< leading steps taken as two implicit Euler half steps
};

/// Dirichlet values of w at (xi_lo, xi_hi) as a function of the gap.
using BoundaryFn = std::function<std::pair<double, double>(double gap)>;
/// Extra source term added to the right-hand side, as a function of (ξ, gap).
using SourceFn = std::function<double(double xi, double gap)>;

/// w on the co-moving grid s = A g^{−γ} + ξ at one instant.
struct SimState {
    double gap = 0.0;
    std::vector<double> w;

    [[nodiscard]] double tau() const { return -std::log(gap); }
};

struct SimTrajectory {
    std::vector<double> xi;
    std::vector<SimState> frames;
    int steps = 0;
    int rejected = 0;
};

/// Solves w_t = (n−1){w_ss/w + b₁w_s²/w² + b₂w_s/w} − a₀ on the co-moving window, where the frame
/// adds Aγg^{−γ−1}w_ξ. The unknown is log w̄, so positivity holds by construction and relative accuracy
/// is uniform across the many decades w̄ spans. Second-order central differences; TR-BDF2 in τ with
/// damped Newton per stage after a short implicit Euler start-up; a step whose Newton solve fails is
/// halved and retried.
[[nodiscard]] SimTrajectory solve_radial_fde(const ModelParams& p, std::vector<double> w0, double tau0, double tau1,
                                             const BoundaryFn& boundary, const GridSpec& grid,
                                             const SolverSpec& solver = {}, const SourceFn& source = {},
                                             int save_every = 1);

/// Smooth manufactured solution w = g(a₀ + ½ sin ξ + ¼ g sin ξ) with its source term.
struct ManufacturedCase {
    ModelParams p;

    [[nodiscard]] double value(double xi, double gap) const;
    [[nodiscard]] double source(double xi, double gap) const;
};

struct ConvergenceReport {
    double err_coarse = 0.0;  ///< max relative error, coarse grid
    double err_fine = 0.0;    ///< same with Δξ and Δτ halved
    double ratio = 0.0;
    /// err_coarse / (Δξ² + Δτ²) on the coarse grid
    double constant = 0.0;
};

/// Runs the manufactured case on ξ ∈ [0, 2π], τ ∈ [1, 2] at `points` and at twice the resolution.
[[nodiscard]] ConvergenceReport manufactured_convergence(const ModelParams& p, int points = 41, double dtau = 0.05);

enum class BoundaryChoice { lower, upper, mean };

struct SandwichSpec {
    double eps = 0.0;
    double tau0 = 10.0;
    double tau1 = 15.0;
    GridSpec grid;
    SolverSpec solver;
    /// tol = tol_constant·(Δξ² + Δτ²), relative in w̄; 0 takes the constant of the manufactured run
    double tol_constant = 0.0;
    int save_every = 5;
    /// ξ-window for the extinction fits; it stays off the right end so the solution's sup is its own
    double fit_xi_lo = -10.0;
    double fit_xi_hi = 10.0;
};

struct ExtinctionFit {
    double exponent = 0.0;
    double std_error = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;  ///< 95% interval
    double reference = 0.0;           ///< (1+γ)/(1−m)
    double tau_lo = 0.0, tau_hi = 0.0;
    std::size_t samples = 0;
};

/// Least-squares slope of log sup(w^{1/(1−m)}) against log(T−t) over the final two decades.
/// InsufficientDecades unless the series reaches τ ≥ 5 and starts before the fit window.
[[nodiscard]] ExtinctionFit extinction_rate(std::span<const double> taus, std::span<const double> log_sup,
                                            const ModelParams& p);

/// log sup over the ξ grid of w^{1/(1−m)}, with w̄ = e^{(1+γ)τ}w.
[[nodiscard]] double log_weighted_sup(std::span<const double> w_bar, double tau, const ModelParams& p);

struct SandwichReport {
    bool holds = false;
    double tol = 0.0;
    std::size_t frames = 0;
    int first_bad_frame = -1;
    double worst_below = 0.0;  ///< max of (w̄⁻ − w̄)/w̄⁻ over frames
    double worst_above = 0.0;  ///< max of (w̄ − w̄⁺)/w̄⁺
    double mean_gap_lower = 0.0;  ///< mean of (w̄ − w̄⁻)/w̄⁻ at the last frame
    double mean_gap_upper = 0.0;  ///< mean of (w̄⁺ − w̄)/w̄⁺ at the last frame
    ExtinctionFit fit_solution, fit_upper, fit_lower;
    bool fits_available = false;
    SimTrajectory trajectory;
};

/// w̄ on the grid at τ₀ for the given choice. `mean` is Φ(ξ + C̄) inside, C̄ the mean of the two
/// matching constants, blended in log over ξ ∈ [0, ξ₁] into the geometric mean of the barriers.
[[nodiscard]] std::vector<double> initial_w_bar(const Matching& match, double eps, double tau0, const GridSpec& grid,
                                                BoundaryChoice choice);

/// Evolves w̄₀ with Dirichlet data from the chosen barrier and checks w̄⁻(1 − tol) ≤ w̄ ≤ w̄⁺(1 + tol)
/// at every saved frame. PreconditionViolated if w̄₀ is not between the barriers.
[[nodiscard]] SandwichReport comparison_sandwich(const Matching& match, const SandwichSpec& spec,
                                                 std::span<const double> w_bar0, BoundaryChoice boundary);

/// Throws SandwichViolated naming the first offending frame when the report failed.
void require_sandwich(const SandwichReport& r);

}  // namespace fdelab
