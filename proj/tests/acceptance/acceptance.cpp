// Runs the acceptance criteria on the reference and low-gamma parameter sets and prints one
// PASS/FAIL line per criterion. Exit status 0 iff every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fdelab/cli_reports.hpp"
#include "fdelab/error.hpp"
#include "fdelab/inner_matching.hpp"
#include "fdelab/numerics.hpp"
#include "fdelab/outer_profiles.hpp"
#include "fdelab/pde_lab.hpp"
#include "fdelab/residual_lab.hpp"
#include "fdelab/self_similar.hpp"

using namespace fdelab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back(fmt::format("{}{}", ok ? "" : "FAILED ", what));
    }
};

struct Lab {
    std::string name;
    ModelParams p;
    OuterProfiles outer;
    SelfSimilarProfile inner;
    explicit Lab(std::string label, const ModelParams& params)
        : name(std::move(label)), p(params), outer(params, ThresholdConfig{}), inner(SelfSimilarProfile::shoot(params)) {}
};

// Thresholds shared by criteria 4 to 7 and 9.
struct Construction {
    std::map<Sign, ThresholdResult> outer;
    CornerThresholds corner;
    EpsilonBounds bounds;
    double tau_lo = 0.0;  ///< first τ of the ε-bound grid
    double tau0 = 0.0;
    double eps = 0.0;
    std::vector<double> taus, xis;
};

Construction construct(const Lab& lab) {
    Construction c;
    double tau_outer = 0.0;
    for (Sign s : {Sign::plus, Sign::minus}) {
        c.outer.emplace(s, find_thresholds(lab.outer, lab.outer.barrier_variant(s), s, ThresholdConfig{}));
        tau_outer = std::max(tau_outer, c.outer.at(s).cfg.tau_start);
    }
    c.corner = find_corner_thresholds(lab.outer, lab.inner, 10.0, 1.0, 10.0, 6, 8);
    const Matching match(lab.outer, lab.inner, c.corner.xi2);
    c.tau_lo = std::max(c.corner.tau4, tau_outer);
    c.taus = linspace(c.tau_lo, c.tau_lo + 8.0, 5);
    c.xis = linspace(-c.corner.xi2, 4.0 * c.corner.xi2, 26);
    c.bounds = find_epsilon_bounds(match, c.taus, c.xis);
    c.eps = 0.5 * std::min(c.bounds.eps1, c.bounds.eps2);
    double tau_inner = 0.0;
    for (Sign s : {Sign::plus, Sign::minus})
        tau_inner = std::max(tau_inner, find_inner_threshold(match, s, c.eps, ThresholdConfig{}, 1.0).cfg.tau_start);
    c.tau0 = std::max(c.tau_lo, tau_inner);
    return c;
}

double rel(double a, double b) { return std::abs(a / b - 1.0); }

// 1. defining first-order equations of the outer profiles and the v_kj identity
Outcome ode_residuals(const std::vector<const Lab*>& labs) {
    Outcome o;
    for (const Lab* lab : labs) {
        const auto& prof = lab->outer;
        const double A = lab->p.A, g = lab->p.gamma, a0 = prof.derived().a0;
        const auto etas = logspace(A + 1e-6, 1e6, 1000);
        std::vector<double> offsets(etas.size());
        for (std::size_t i = 0; i < etas.size(); ++i) offsets[i] = etas[i] - A;
        double w0 = 0.0, w123 = 0.0;
        for (const auto& pt : prof.points(offsets)) {
            const Jet p0 = prof.phi0(pt);
            w0 = std::max(w0, std::abs(g * pt.eta * p0.d1 + p0.value - a0) / a0);
            const Sources f = prof.f_sources(pt);
            auto res = [&](const Jet& j, double k, double src) {
                return std::abs(g * pt.eta * j.d1 + k * j.value - src) / std::max(1.0, std::abs(src));
            };
            w123 = std::max({w123, res(prof.phi(1, pt), 1 + 2 * g, f.f1), res(prof.phi(2, pt), 1 + 2 * g, f.f2),
                             res(prof.phi(3, pt), 1 + g, f.f3)});
        }
        double wv = 0.0;
        for (int k = 3; k <= 6; ++k)
            for (int j = 0; j <= 3; ++j)
                for (double eta : logspace(A + 0.5, 1e6, 50)) {
                    const Jet v = OuterProfiles::vkj(k, j, eta, 1.0 / g);
                    const double rhs = j * g * OuterProfiles::vkj(k, j - 1, eta, 1.0 / g).value;
                    const double scale = std::max({std::abs(rhs), std::abs((1 + k * g) * v.value), 1e-300});
                    wv = std::max(wv, std::abs((1 + k * g) * v.value + g * eta * v.d1 - rhs) / scale);
                }
        o.expect(w0 <= 1e-12, fmt::format("{}: phi0 {:.1e}", lab->name, w0));
        o.expect(w123 <= 1e-8, fmt::format("{}: phi1-3 {:.1e}", lab->name, w123));
        o.expect(wv <= 1e-12, fmt::format("{}: v_kj {:.1e}", lab->name, wv));
    }
    return o;
}

// 2. near-A laws by Richardson extrapolation and far-field leading coefficients
Outcome asymptotics(const std::vector<const Lab*>& labs) {
    Outcome o;
    for (const Lab* lab : labs) {
        const auto& prof = lab->outer;
        const auto& p = lab->p;
        const double target = (p.n - 1) / (p.gamma * p.A);
        auto richardson = [](auto f) { return (10.0 * f(1e-5) - f(1e-4)) / 9.0; };
        const double t1 = p.theta1_minus * target;
        const double h0 = richardson([&](double z) { return prof.h(Sign::minus, prof.point({z})).value * z; });
        const double h1 = richardson([&](double z) { return prof.h(Sign::minus, prof.point({z})).d1 * z * z; });
        const double h2 = richardson([&](double z) { return prof.h(Sign::minus, prof.point({z})).d2 * z * z * z; });
        std::vector<double> ones, logs, ys;
        for (double z : logspace(1e-14, 1e-8, 7)) {
            ones.push_back(1.0);
            logs.push_back(std::log(1.0 / z));
            ys.push_back(prof.phi(3, prof.point({z})).value);
        }
        const double p3log = least_squares({logs, ones}, ys)[0];
        const double p31 = richardson([&](double z) { return prof.phi(3, prof.point({z})).d1 * z; });
        const double p32 = richardson([&](double z) { return prof.phi(3, prof.point({z})).d2 * z * z; });
        const double near = std::max({rel(h0, t1), rel(h1, -t1), rel(h2, 2 * t1), rel(p3log, target),
                                      rel(p31, -target), rel(p32, target)});
        o.expect(near <= 0.01, fmt::format("{}: near-A {:.1e}", lab->name, near));

        const double a = 1.0 / p.gamma, B = std::pow(p.A, a), g = p.gamma;
        const double h_lead = (p.n - 1) * (1 + g) / (g * g * g) * B;
        const double p3_lead = -(p.n - 1) / (g * g) * B;
        std::vector<double> one, lg, yh, y3;
        for (double eta : logspace(1e5, 1e7, 9)) {
            const auto pt = prof.point(EtaOffset::from_eta(eta, p.A));
            one.push_back(1.0);
            lg.push_back(std::log(eta));
            yh.push_back(prof.h(Sign::plus, pt).value * std::pow(eta, 2 + a));
            y3.push_back(prof.phi(3, pt).value * std::pow(eta, 1 + a));
        }
        const double far = std::max(rel(least_squares({lg, one}, yh)[0], h_lead), rel(least_squares({lg, one}, y3)[0], p3_lead));
        o.expect(far <= 0.05, fmt::format("{}: far-field {:.1e}", lab->name, far));
    }
    return o;
}

// 3. self-similar profile
Outcome self_similar(const std::vector<const Lab*>& labs) {
    Outcome o;
    for (const Lab* lab : labs) {
        const auto& prof = lab->inner;
        bool increasing = true;
        double prev = prof.value(0.0);
        for (double s : linspace(1e-3, prof.s_max(), 20000)) {
            const double v = prof.value(s);
            increasing = increasing && v > prev;
            prev = v;
        }
        const double slope_dev = verify_tail_fit(prof).slope_rel_dev;
        double resid = 0.0;
        for (double s : linspace(1.0, prof.s_max(), 5001)) resid = std::max(resid, std::abs(prof.stationary_residual(s)));
        SelfSimilarOptions half;
        half.ode.rel_tol /= 2.0;
        half.ode.abs_tol /= 2.0;
        const auto fine = SelfSimilarProfile::shoot(lab->p, half);
        double halving = 0.0;
        for (double s : linspace(0.0, prof.s_max(), 501)) halving = std::max(halving, rel(fine.value(s), prof.value(s)));
        o.expect(increasing, fmt::format("{}: increasing", lab->name));
        o.expect(slope_dev <= 0.005, fmt::format("{}: slope {:.1e}", lab->name, slope_dev));
        o.expect(resid <= 1e-6, fmt::format("{}: residual {:.1e}", lab->name, resid));
        o.expect(halving <= 1e-6, fmt::format("{}: halving {:.1e}", lab->name, halving));
    }
    return o;
}

// 4. outer sign verdicts with searched thresholds
Outcome outer_signs(const std::vector<const Lab*>& labs, const std::map<const Lab*, Construction>& cons) {
    Outcome o;
    for (const Lab* lab : labs)
        for (Sign s : {Sign::plus, Sign::minus}) {
            const ResidualReport& r = cons.at(lab).outer.at(s).report;
            const double frac = static_cast<double>(r.inconclusive) / static_cast<double>(r.total);
            o.expect(r.pass && r.violations == 0 && frac < 1e-3,
                     fmt::format("{} {}: {} violations, {:.2e} inconclusive", lab->name, to_string(s), r.violations, frac));
        }
    return o;
}

// 5. matching constants
Outcome matching(const std::vector<const Lab*>& labs, const std::map<const Lab*, Construction>& cons) {
    Outcome o;
    for (const Lab* lab : labs) {
        const Construction& c = cons.at(lab);
        const Matching match(lab->outer, lab->inner, c.corner.xi2);
        std::size_t order_bad = 0, mono_bad = 0;
        for (double tau : linspace(c.tau_lo, c.tau_lo + 20.0, 11)) {
            double prev_up = -INFINITY, prev_lo = INFINITY;
            for (double eps : linspace(0.0, 0.2, 9)) {
                const double up = match.solve(Sign::plus, eps, tau), lo = match.solve(Sign::minus, eps, tau);
                if (!(up > lo)) ++order_bad;
                if (!(up > prev_up && lo < prev_lo)) ++mono_bad;
                prev_up = up;
                prev_lo = lo;
            }
        }
        o.expect(order_bad == 0, fmt::format("{}: C+ > C- ({} bad)", lab->name, order_bad));
        o.expect(mono_bad == 0, fmt::format("{}: eps-monotone ({} bad)", lab->name, mono_bad));

        ModelParams p = lab->p;
        p.theta1_minus = -1.0;
        const OuterProfiles outer(p, ThresholdConfig{});
        const Matching m10(outer, lab->inner, 10.0);
        const MatchingLimits lim = matching_limits(m10, 40.0, 10.0);
        o.expect(rel(lim.lower_value, lim.lower_value_target) <= 0.01,
                 fmt::format("{}: limit {:.4f} vs {:.4f}", lab->name, lim.lower_value, lim.lower_value_target));
        if (lab->p.gamma == 1.5) o.expect(std::abs(lim.lower_value_target - 10.304) <= 1e-3, "reference value 10.304");
    }
    return o;
}

// 6. corner verdicts and the surface term signs
Outcome corner(const std::vector<const Lab*>& labs, const std::map<const Lab*, Construction>& cons) {
    Outcome o;
    for (const Lab* lab : labs) {
        const Construction& c = cons.at(lab);
        const Matching match(lab->outer, lab->inner, c.corner.xi2);
        const double e1 = c.bounds.eps1;
        o.expect(corner_verdicts_hold(match, 0.0, c.taus) && corner_verdicts_hold(match, 0.5 * e1, c.taus),
                 fmt::format("{}: slopes at eps in {{0, {:.4f}}}", lab->name, 0.5 * e1));
        bool signs = true;
        for (double eps : {0.0, 0.5 * e1})
            for (double lo : {c.tau0, c.tau0 + 2.0}) {
                signs = signs && weak_corner_term(match, Sign::plus, eps, lo, lo + 2.0).sign <= 0;
                signs = signs && weak_corner_term(match, Sign::minus, eps, lo, lo + 2.0).sign >= 0;
            }
        o.expect(signs, fmt::format("{}: J1 signs", lab->name));
    }
    return o;
}

// 7. ordering of the glued and physical barriers
Outcome ordering(const std::vector<const Lab*>& labs, const std::map<const Lab*, Construction>& cons) {
    Outcome o;
    for (const Lab* lab : labs) {
        const Construction& c = cons.at(lab);
        const Matching match(lab->outer, lab->inner, c.corner.xi2);
        const std::size_t psi_bad = ordering_violations(match, c.eps, c.xis, c.taus);
        const auto [upper, lower] = assemble_u_barriers(match, c.eps, c.bounds, c.tau0);
        const std::size_t u_bad = u_ordering_violations(upper, lower, c.xis, linspace(c.tau0, c.tau0 + 8.0, 5));
        o.expect(psi_bad == 0 && u_bad == 0, fmt::format("{}: psi {} / u {} violations", lab->name, psi_bad, u_bad));
    }
    return o;
}

// 8. solver oracles
Outcome solver(const std::vector<const Lab*>& labs) {
    Outcome o;
    for (const Lab* lab : labs) {
        const double a0 = lab->outer.derived().a0;
        const GridSpec grid{-10.0, 40.0, 201, 0.05};
        std::vector<double> w0(static_cast<std::size_t>(grid.points), a0 * std::exp(-0.5));
        const BoundaryFn bc = [a0](double gap) { return std::pair{a0 * gap, a0 * gap}; };
        const auto traj = solve_radial_fde(lab->p, w0, 0.5, 4.5, bc, grid);
        double err = 0.0;
        for (const SimState& st : traj.frames)
            for (double w : st.w) err = std::max(err, std::abs(w / (a0 * st.gap) - 1.0));
        const ConvergenceReport conv = manufactured_convergence(lab->p);
        o.expect(err <= 1e-10, fmt::format("{}: exact {:.1e}", lab->name, err));
        o.expect(conv.ratio >= 3.5 && conv.ratio <= 4.5, fmt::format("{}: ratio {:.3f}", lab->name, conv.ratio));
    }
    return o;
}

// 9. sandwich and extinction rate from an in-between start
Outcome sandwich(const std::vector<const Lab*>& labs, const std::map<const Lab*, Construction>& cons) {
    Outcome o;
    for (const Lab* lab : labs) {
        const Construction& c = cons.at(lab);
        const Matching match(lab->outer, lab->inner, c.corner.xi2);
        SandwichSpec spec;
        spec.eps = c.eps;
        spec.tau0 = c.tau0;
        spec.tau1 = c.tau0 + 5.0;
        spec.grid = GridSpec{-c.corner.xi2, 4.0 * c.corner.xi2, 2001, 0.02};
        spec.fit_xi_lo = -c.corner.xi2;
        spec.fit_xi_hi = c.corner.xi2;
        const auto w0 = initial_w_bar(match, spec.eps, spec.tau0, spec.grid, BoundaryChoice::mean);
        const SandwichReport r = comparison_sandwich(match, spec, w0, BoundaryChoice::mean);
        o.expect(r.holds, fmt::format("{}: contained, worst {:.1e} vs tol {:.1e}", lab->name,
                                      std::max(r.worst_below, r.worst_above), r.tol));
        if (!r.fits_available) {
            o.expect(false, fmt::format("{}: fits unavailable", lab->name));
            continue;
        }
        const double ref = lab->outer.derived().exponent_rate;
        const double up = r.fit_upper.exponent, lo = r.fit_lower.exponent, sol = r.fit_solution.exponent;
        o.expect(rel(up, ref) <= 0.03 && rel(lo, ref) <= 0.03,
                 fmt::format("{}: barriers {:.4f}, {:.4f} vs {:.4f}", lab->name, up, lo, ref));
        o.expect(sol >= std::min(up, lo) && sol <= std::max(up, lo), fmt::format("{}: solution {:.4f}", lab->name, sol));
    }
    return o;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) {
            std::ifstream in(e.path(), std::ios::binary);
            out[fs::relative(e.path(), dir).string()] = {std::istreambuf_iterator<char>(in), {}};
        }
    return out;
}

// 10. byte-identical reruns of verify and simulate
Outcome determinism() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "fdelab_acceptance";
    fs::remove_all(root);
    for (Command c : {Command::verify, Command::simulate}) {
        std::map<std::string, std::string> runs[2];
        for (int k = 0; k < 2; ++k) {
            RunConfig cfg = parse_config("");
            cfg.command = c;
            cfg.out_dir = root / fmt::format("run{}", k);
            (void)run_command(cfg);
            runs[k] = snapshot(cfg.out_dir);
        }
        o.expect(!runs[0].empty() && runs[0] == runs[1], fmt::format("{}: {} files identical", to_string(c), runs[0].size()));
    }
    fs::remove_all(root);
    return o;
}

}  // namespace

int main() {
    const auto start = std::chrono::steady_clock::now();
    const Lab ref("reference", ModelParams::with_defaults(3, 0.1, 1.5, 2.0));
    const Lab low("low-gamma", ModelParams::with_defaults(3, 0.1, 0.5, 2.0));
    const std::vector<const Lab*> labs{&ref, &low};

    std::map<const Lab*, Construction> cons;
    std::string setup_error;
    try {
        for (const Lab* lab : labs) cons.emplace(lab, construct(*lab));
    } catch (const std::exception& e) {
        setup_error = e.what();
    }

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"ODE-defining residuals", [&] { return ode_residuals(labs); }},
        {"asymptotics", [&] { return asymptotics(labs); }},
        {"self-similar profile", [&] { return self_similar(labs); }},
        {"outer sign verdicts", [&] { return outer_signs(labs, cons); }},
        {"matching", [&] { return matching(labs, cons); }},
        {"corner jump", [&] { return corner(labs, cons); }},
        {"ordering", [&] { return ordering(labs, cons); }},
        {"solver oracle", [&] { return solver(labs); }},
        {"sandwich and rate", [&] { return sandwich(labs, cons); }},
        {"determinism", [] { return determinism(); }},
    };
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const bool needs_construction = i >= 3 && i != 7 && i != 9;
        if (needs_construction && !setup_error.empty()) {
            o.expect(false, "threshold search: " + setup_error);
        } else {
            try {
                o = criteria[i].second();
            } catch (const std::exception& e) {
                o.expect(false, e.what());
            }
        }
        all = all && o.pass;
        std::string detail;
        for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
        fmt::print("criterion {:2}: {}  {} ({})\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, detail);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fmt::print("acceptance: {} in {:.1f} s\n", all ? "PASS" : "FAIL", secs);
    return all ? 0 : 1;
}
