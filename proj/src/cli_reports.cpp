#include "fdelab/cli_reports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "fdelab/error.hpp"
#include "fdelab/inner_matching.hpp"
#include "fdelab/numerics.hpp"
#include "fdelab/outer_profiles.hpp"
#include "fdelab/residual_lab.hpp"
#include "fdelab/self_similar.hpp"

namespace fdelab {

using json = nlohmann::ordered_json;

const char* to_string(Command c) noexcept {
    switch (c) {
        case Command::profile: return "profile";
        case Command::verify: return "verify";
        case Command::simulate: return "simulate";
        case Command::report: return "report";
    }
    return "?";
}

Command command_from_string(const std::string& name) {
    for (Command c : {Command::profile, Command::verify, Command::simulate, Command::report})
        if (name == to_string(c)) return c;
    throw Error(ErrorCode::ConfigError, fmt::format("unknown command '{}'", name));
}

namespace {

const char* to_string(BoundaryChoice b) noexcept {
    switch (b) {
        case BoundaryChoice::lower: return "lower";
        case BoundaryChoice::upper: return "upper";
        case BoundaryChoice::mean: return "mean";
    }
    return "?";
}

std::string num(double x) { return fmt::format("{:.17g}", x); }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw std::invalid_argument(fmt::format("{}: '{}' is not a valid number", key, text));
    return value;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_number<double>(key, item));
    }
    return out;
}

struct Field {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field number_field(const char* key, T RunConfig::*group, double T::*member) {
    return {key, [=](RunConfig& c, const std::string& v) { (c.*group).*member = parse_number<double>(key, v); },
            [=](const RunConfig& c) { return num((c.*group).*member); }};
}

template <class T>
Field int_field(const char* key, T RunConfig::*group, int T::*member) {
    return {key, [=](RunConfig& c, const std::string& v) { (c.*group).*member = parse_number<int>(key, v); },
            [=](const RunConfig& c) { return std::to_string((c.*group).*member); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> all = [] {
        using P = ModelParams;
        using Th = ThresholdConfig;
        using S = SimulationConfig;
        std::vector<Field> f;
        f.push_back(int_field("n", &RunConfig::params, &P::n));
        f.push_back(number_field("m", &RunConfig::params, &P::m));
        f.push_back(number_field("gamma", &RunConfig::params, &P::gamma));
        f.push_back(number_field("A", &RunConfig::params, &P::A));
        f.push_back(number_field("T", &RunConfig::params, &P::T));
        f.push_back(number_field("lambda", &RunConfig::params, &P::lambda));
        f.push_back(number_field("theta1_minus", &RunConfig::params, &P::theta1_minus));
        f.push_back(number_field("theta1_plus", &RunConfig::params, &P::theta1_plus));
        f.push_back(number_field("theta2_minus", &RunConfig::params, &P::theta2_minus));
        f.push_back(number_field("theta2_plus", &RunConfig::params, &P::theta2_plus));
        f.push_back(number_field("epsilon", &RunConfig::params, &P::epsilon));
        f.push_back(number_field("eta0", &RunConfig::thresholds, &Th::eta0));
        f.push_back(number_field("homog_C1", &RunConfig::thresholds, &Th::homog_C1));
        f.push_back(number_field("homog_C3", &RunConfig::thresholds, &Th::homog_C3));
        f.push_back(number_field("C10", &RunConfig::thresholds, &Th::C10));
        f.push_back(number_field("xi0", &RunConfig::thresholds, &Th::xi0));
        f.push_back(number_field("xi1", &RunConfig::thresholds, &Th::xi1));
        f.push_back(number_field("tau_start", &RunConfig::thresholds, &Th::tau_start));
        f.push_back(number_field("delta0", &RunConfig::thresholds, &Th::delta0));
        f.push_back(number_field("delta1", &RunConfig::thresholds, &Th::delta1));
        f.push_back(int_field("max_doublings", &RunConfig::thresholds, &Th::max_doublings));
        f.push_back(int_field("space_points", &RunConfig::thresholds, &Th::space_points));
        f.push_back(int_field("tau_points", &RunConfig::thresholds, &Th::tau_points));
        f.push_back(number_field("tau_span", &RunConfig::thresholds, &Th::tau_span));
        f.push_back(number_field("far_factor", &RunConfig::thresholds, &Th::far_factor));
        f.push_back(number_field("verdict_atol", &RunConfig::thresholds, &Th::verdict_atol));
        f.push_back(number_field("inconclusive_fraction", &RunConfig::thresholds, &Th::inconclusive_fraction));
        f.push_back({"seeds", [](RunConfig& c, const std::string& v) { c.seeds = parse_list("seeds", v); },
                     [](const RunConfig& c) {
                         std::string out;
                         for (std::size_t i = 0; i < c.seeds.size(); ++i) out += (i ? "," : "") + num(c.seeds[i]);
                         return out;
                     }});
        f.push_back({"profile_points",
                     [](RunConfig& c, const std::string& v) { c.profile_points = parse_number<int>("profile_points", v); },
                     [](const RunConfig& c) { return std::to_string(c.profile_points); }});
        f.push_back(number_field("sim_eps", &RunConfig::sim, &S::eps));
        f.push_back(number_field("sim_tau_span", &RunConfig::sim, &S::tau_span));
        f.push_back(int_field("sim_points", &RunConfig::sim, &S::points));
        f.push_back(number_field("sim_dtau", &RunConfig::sim, &S::dtau));
        f.push_back({"sim_start",
                     [](RunConfig& c, const std::string& v) {
                         if (v == "lower") c.sim.start = BoundaryChoice::lower;
                         else if (v == "upper") c.sim.start = BoundaryChoice::upper;
                         else if (v == "mean") c.sim.start = BoundaryChoice::mean;
                         else throw std::invalid_argument(fmt::format("sim_start: '{}' is not lower, mean or upper", v));
                     },
                     [](const RunConfig& c) { return std::string(to_string(c.sim.start)); }});
        f.push_back(int_field("sim_save_every", &RunConfig::sim, &S::save_every));
        f.push_back(int_field("csv_frame_stride", &RunConfig::sim, &S::csv_frame_stride));
        f.push_back(int_field("csv_point_stride", &RunConfig::sim, &S::csv_point_stride));
        return f;
    }();
    return all;
}

void check_config(const RunConfig& c) {
    auto need = [](bool ok, const std::string& what) {
        if (!ok) throw Error(ErrorCode::ConfigError, what);
    };
    need(c.profile_points >= 2, "profile_points must be at least 2");
    need(c.sim.points >= 5, "sim_points must be at least 5");
    need(c.sim.dtau > 0.0 && c.sim.tau_span > 0.0, "sim_dtau and sim_tau_span must be positive");
    need(c.sim.eps >= 0.0 && c.sim.eps < 0.25, "sim_eps must lie in [0, 1/4)");
    need(c.sim.save_every >= 1 && c.sim.csv_frame_stride >= 1 && c.sim.csv_point_stride >= 1,
         "strides must be at least 1");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<std::string> theta_set;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ConfigError, fmt::format("line {}: expected key = value", lineno));
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const auto& all = fields();
        const auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) { return key == f.key; });
        if (it == all.end()) throw Error(ErrorCode::ConfigError, fmt::format("line {}: unknown key '{}'", lineno, key));
        try {
            it->set(cfg, value);
        } catch (const std::invalid_argument& e) {
            throw Error(ErrorCode::ConfigError, fmt::format("line {}: {}", lineno, e.what()));
        }
        if (key.starts_with("theta")) theta_set.push_back(key);
    }
    const ModelParams d = ModelParams::with_defaults(cfg.params.n, cfg.params.m, cfg.params.gamma, cfg.params.A,
                                                     cfg.params.T, cfg.params.lambda);
    auto follow = [&](const char* key, double ModelParams::*weight) {
        if (std::find(theta_set.begin(), theta_set.end(), key) == theta_set.end()) cfg.params.*weight = d.*weight;
    };
    follow("theta1_minus", &ModelParams::theta1_minus);
    follow("theta1_plus", &ModelParams::theta1_plus);
    follow("theta2_minus", &ModelParams::theta2_minus);
    follow("theta2_plus", &ModelParams::theta2_plus);
    check_config(cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigError, fmt::format("cannot read config '{}'", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig cfg = parse_config(buf.str());
    cfg.config_path = path;
    return cfg;
}

std::string canonical_config(const RunConfig& cfg) {
    std::string out;
    for (const Field& f : fields()) out += fmt::format("{} = {}\n", f.key, f.get(cfg));
    return out;
}

std::uint64_t fnv1a(const std::string& text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::filesystem::path run_directory(const RunConfig& cfg) {
    return cfg.out_dir / fmt::format("{}-{:016x}", to_string(cfg.command), fnv1a(canonical_config(cfg)));
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::ConfigError, fmt::format("cannot write '{}'", tmp.string()));
        out << content;
        out.flush();
        if (!out) throw Error(ErrorCode::ConfigError, fmt::format("short write to '{}'", tmp.string()));
    }
    std::filesystem::rename(tmp, path);
}

namespace {

struct Lab {
    ModelParams p;
    DerivedConstants d;
    OuterProfiles outer;
    SelfSimilarProfile inner;
    explicit Lab(const RunConfig& cfg)
        : p(cfg.params), d(derive_constants(cfg.params)), outer(cfg.params, cfg.thresholds, cfg.seeds),
          inner(SelfSimilarProfile::shoot(cfg.params)) {}
};

json params_json(const ModelParams& p) {
    return json{{"n", p.n},
                {"m", p.m},
                {"gamma", p.gamma},
                {"A", p.A},
                {"T", p.T},
                {"lambda", p.lambda},
                {"theta1_minus", p.theta1_minus},
                {"theta1_plus", p.theta1_plus},
                {"theta2_minus", p.theta2_minus},
                {"theta2_plus", p.theta2_plus},
                {"epsilon", p.epsilon}};
}

json derived_json(const DerivedConstants& d) {
    return json{{"a0", d.a0},   {"b1", d.b1},     {"b2", d.b2}, {"N", d.N}, {"exponent_rate", d.exponent_rate},
                {"beta", d.beta}, {"slope_limit", d.slope_limit}};
}

json report_json(const ResidualReport& r) {
    return json{{"op", r.op},
                {"region", to_string(r.region)},
                {"sign", to_string(r.sign)},
                {"variant", to_string(r.variant)},
                {"x_range", {r.x_lo, r.x_hi}},
                {"tau_range", {r.tau_lo, r.tau_hi}},
                {"points", r.total},
                {"violations", r.violations},
                {"inconclusive", r.inconclusive},
                {"min", r.min},
                {"max", r.max},
                {"worst", {{"x", r.worst.x}, {"tau", r.worst.tau}, {"value", r.worst.value}, {"scale", r.worst.scale}}}};
}

// Collects checks; a step that throws becomes a failed check carrying the message.
class Checks {
public:
    void add(const std::string& name, bool pass, json detail = json::object()) {
        json c{{"name", name}, {"pass", pass}};
        for (auto& [k, v] : detail.items()) c[k] = v;
        list_.push_back(std::move(c));
        all_ = all_ && pass;
    }
    template <class Fn>
    bool attempt(const std::string& name, Fn&& fn) {
        try {
            fn();
            return true;
        } catch (const Error& e) {
            add(name, false, json{{"error", e.what()}});
            return false;
        }
    }
    [[nodiscard]] bool pass() const noexcept { return all_; }
    [[nodiscard]] const json& list() const noexcept { return list_; }

private:
    json list_ = json::array();
    bool all_ = true;
};

struct VerifyOutcome {
    json thresholds = json::object();
    double xi1 = 10.0;
    double eps = 0.0;
    double tau0 = 0.0;
    std::optional<EpsilonBounds> bounds;
    bool complete = false;  ///< every threshold was found
};

VerifyOutcome run_verify(const Lab& lab, const RunConfig& cfg, Checks& checks) {
    const auto& p = lab.p;
    VerifyOutcome out;
    out.xi1 = cfg.thresholds.xi1;
    const auto bad_theta = theta_violations(p);
    json why = json::array();
    for (const auto& b : bad_theta) why.push_back(b);
    checks.add("theta.constraints", bad_theta.empty(), json{{"violations", why}});

    double tau_outer = 0.0;
    bool outer_found = true;
    for (Sign s : {Sign::plus, Sign::minus}) {
        const PsiVariant v = lab.outer.barrier_variant(s);
        const std::string tag = to_string(s);
        outer_found &= checks.attempt("outer.glued_outer." + tag, [&] {
            const ThresholdResult th = find_thresholds(lab.outer, v, s, cfg.thresholds);
            const ResidualReport& rep = th.report;
            const double frac = static_cast<double>(rep.inconclusive) / static_cast<double>(std::max<std::size_t>(1, rep.total));
            checks.add("outer.glued_outer." + tag, rep.pass && frac < 1e-3, report_json(rep));
            out.thresholds["outer_" + tag] =
                json{{"variant", to_string(v)}, {"xi0", th.cfg.xi0}, {"tau_start", th.cfg.tau_start},
                     {"delta0", th.cfg.delta0}, {"iterations", th.iterations}};
            tau_outer = std::max(tau_outer, th.cfg.tau_start);
            for (Region r : {Region::near_a_band, Region::far_field}) {
                const std::string name = fmt::format("outer.{}.{}", to_string(r), tag);
                checks.attempt(name, [&] {
                    const ResidualReport rr = verify_sign_region(lab.outer, v, s, r, th.cfg);
                    const double fr =
                        static_cast<double>(rr.inconclusive) / static_cast<double>(std::max<std::size_t>(1, rr.total));
                    checks.add(name, rr.pass && fr < 1e-3, report_json(rr));
                });
            }
        });
    }

    std::optional<CornerThresholds> corner;
    checks.attempt("corner.thresholds", [&] {
        corner = find_corner_thresholds(lab.outer, lab.inner, cfg.thresholds.xi1, 1.0, 10.0, 6, cfg.thresholds.max_doublings);
        checks.add("corner.thresholds", true, json{{"xi2", corner->xi2}, {"tau4", corner->tau4}});
    });
    if (!corner) return out;
    out.xi1 = corner->xi2;
    out.thresholds["corner"] = json{{"xi1", corner->xi2}, {"tau4", corner->tau4}};
    const Matching match(lab.outer, lab.inner, out.xi1);

    checks.attempt("matching.limits", [&] {
        const MatchingLimits lim = matching_limits(match, 40.0, 10.0);
        auto rel = [](double a, double b) { return std::abs(a / b - 1.0); };
        checks.add("matching.lower_limit", rel(lim.lower_value, lim.lower_value_target) <= 0.01,
                   json{{"value", lim.lower_value}, {"target", lim.lower_value_target}, {"tau", lim.tau_eval}});
        checks.add("matching.growth_rate", rel(lim.growth_rate, lim.growth_rate_target) <= 0.02,
                   json{{"value", lim.growth_rate}, {"target", lim.growth_rate_target}});
        for (int k = 0; k < 2; ++k)
            checks.add(fmt::format("matching.right_slope.{}", k == 0 ? "plus" : "minus"),
                       rel(lim.right_slope[k], lim.right_slope_target[k]) <= 0.01,
                       json{{"value", lim.right_slope[k]}, {"target", lim.right_slope_target[k]}});
    });

    // ε bounds and ψ ordering are checked from the first time every outer and corner verdict holds
    const double t_lo = std::max(corner->tau4, tau_outer);
    const auto taus = linspace(t_lo, t_lo + 8.0, 5);
    const auto xis = linspace(-out.xi1, 4.0 * out.xi1, 26);
    checks.attempt("matching.order", [&] {
        std::size_t bad = 0;
        for (double t : linspace(t_lo, t_lo + 20.0, 21))
            if (!(match.solve(Sign::plus, 0.0, t) > match.solve(Sign::minus, 0.0, t))) ++bad;
        checks.add("matching.order", bad == 0, json{{"violations", bad}});
    });

    checks.attempt("epsilon.bounds", [&] {
        out.bounds = find_epsilon_bounds(match, taus, xis);
        const double cap = std::min(out.bounds->eps1, out.bounds->eps2);
        checks.add("epsilon.bounds", cap > 0.0, json{{"eps1", out.bounds->eps1}, {"eps2", out.bounds->eps2}});
        out.eps = p.epsilon > 0.0 ? p.epsilon : 0.5 * cap;
        checks.add("epsilon.admissible", out.eps < cap, json{{"eps", out.eps}, {"cap", cap}});
        out.thresholds["epsilon"] = json{{"eps1", out.bounds->eps1}, {"eps2", out.bounds->eps2}, {"eps", out.eps}};
        checks.add("corner.verdicts", corner_verdicts_hold(match, 0.0, taus) &&
                                          corner_verdicts_hold(match, 0.5 * out.bounds->eps1, taus),
                   json{{"eps", {0.0, 0.5 * out.bounds->eps1}}});
        checks.add("ordering.psi", ordering_violations(match, out.eps, xis, taus) == 0);
    });
    if (!out.bounds) return out;

    double tau_inner = 0.0;
    bool inner_found = true;
    for (Sign s : {Sign::plus, Sign::minus}) {
        const std::string name = fmt::format("inner.{}", to_string(s));
        inner_found &= checks.attempt(name, [&] {
            const ThresholdResult th = find_inner_threshold(match, s, out.eps, cfg.thresholds, 1.0);
            checks.add(name, th.report.pass, report_json(th.report));
            out.thresholds[fmt::format("inner_{}", to_string(s))] = json{{"tau3", th.cfg.tau_start}};
            tau_inner = std::max(tau_inner, th.cfg.tau_start);
        });
    }

    out.tau0 = std::max({t_lo, tau_inner});
    out.thresholds["tau0"] = out.tau0;
    out.complete = outer_found && inner_found;

    checks.attempt("ordering.u", [&] {
        const auto [upper, lower] = assemble_u_barriers(match, out.eps, *out.bounds, out.tau0);
        const auto ut = linspace(out.tau0, out.tau0 + 8.0, 5);
        checks.add("ordering.u", u_ordering_violations(upper, lower, xis, ut) == 0);
    });

    checks.attempt("corner_term", [&] {
        json windows = json::array();
        bool ok = true;
        for (double start : {out.tau0, out.tau0 + 2.0}) {
            const CornerTerm jp = weak_corner_term(match, Sign::plus, out.eps, start, start + 2.0);
            const CornerTerm jm = weak_corner_term(match, Sign::minus, out.eps, start, start + 2.0);
            ok = ok && jp.sign <= 0 && jm.sign >= 0;
            windows.push_back(json{{"tau", {start, start + 2.0}},
                                   {"plus", {{"sign", jp.sign}, {"log_magnitude", jp.log_magnitude}}},
                                   {"minus", {{"sign", jm.sign}, {"log_magnitude", jm.log_magnitude}}}});
        }
        checks.add("corner_term.signs", ok, json{{"windows", windows}});
    });
    return out;
}

json top_level(const Lab& lab, const json& thresholds, const Checks& checks, const std::vector<std::string>& artifacts) {
    json arts = json::array();
    for (const auto& a : artifacts) arts.push_back(a);
    return json{{"params", params_json(lab.p)},
                {"derived", derived_json(lab.d)},
                {"thresholds", thresholds},
                {"checks", checks.list()},
                {"artifacts", arts}};
}

std::string csv_line(std::initializer_list<double> values) {
    std::string out;
    bool first = true;
    for (double v : values) {
        out += first ? "" : ",";
        out += num(v);
        first = false;
    }
    out += '\n';
    return out;
}

void write_profiles(const Lab& lab, const RunConfig& cfg, const std::filesystem::path& dir, Checks& checks,
                    json& thresholds, std::vector<std::string>& artifacts) {
    const auto& p = lab.p;
    const double tau_ref = 10.0;
    const auto offsets = logspace(1e-6, 1e4 * p.A, static_cast<std::size_t>(cfg.profile_points));
    const auto pts = lab.outer.points(offsets);
    std::string outer =
        "eta_offset,eta,phi0,phi1,phi2,phi3,phi4,h_plus,h_minus,psi1_plus,psi2_plus,psi3_plus,psi4_plus,"
        "psi1_minus,psi2_minus,psi3_minus,psi4_minus\n";
    std::size_t rows = 0;
    for (const PointData& pt : pts) {
        std::string line = num(pt.z) + "," + num(pt.eta) + "," + num(lab.outer.phi0(pt).value);
        for (int i = 1; i <= 3; ++i) line += "," + num(lab.outer.phi(i, pt).value);
        line += "," + num(lab.outer.phi4(pt).value);
        line += "," + num(lab.outer.h(Sign::plus, pt).value) + "," + num(lab.outer.h(Sign::minus, pt).value);
        for (Sign s : {Sign::plus, Sign::minus})
            for (PsiVariant v : {PsiVariant::psi1, PsiVariant::psi2, PsiVariant::psi3, PsiVariant::psi4})
                line += "," + num(lab.outer.psi(v, s, pt, tau_ref).value);
        outer += line + "\n";
        ++rows;
    }
    write_atomic(dir / "outer_profiles.csv", outer);
    artifacts.push_back("outer_profiles.csv");
    checks.add("profile.outer_rows", rows == static_cast<std::size_t>(cfg.profile_points), json{{"rows", rows}});

    std::string inner = "s,phibar0,phibar0_s,phibar0_ss,log_v0\n";
    const auto ss = linspace(lab.inner.s_min(), lab.inner.s_max(), 2001);
    for (double s : ss) {
        const Jet j = lab.inner.jet(s);
        inner += csv_line({s, j.value, j.d1, j.d2, (std::log(j.value) - 2.0 * s) / (1.0 - p.m)});
    }
    write_atomic(dir / "self_similar.csv", inner);
    artifacts.push_back("self_similar.csv");

    const double tail_slope = lab.inner.slope(lab.inner.s_max());
    checks.add("profile.tail_slope", std::abs(tail_slope / lab.inner.slope_limit() - 1.0) <= 5e-3,
               json{{"slope", tail_slope}, {"limit", lab.inner.slope_limit()}});
    thresholds["profile"] = json{{"eta0", lab.outer.eta0()},
                                 {"C2", lab.outer.C2()},
                                 {"C10", lab.outer.C10()},
                                 {"psi_tau", tau_ref},
                                 {"K1", lab.inner.K1()},
                                 {"log_coefficient", lab.inner.log_coefficient()},
                                 {"s_max", lab.inner.s_max()},
                                 {"slope_converged", lab.inner.slope_converged()}};
}

void write_simulation(const Lab& lab, const RunConfig& cfg, const VerifyOutcome& v, const std::filesystem::path& dir,
                      Checks& checks, json& thresholds, std::vector<std::string>& artifacts) {
    const auto& p = lab.p;
    const Matching match(lab.outer, lab.inner, v.xi1);
    SandwichSpec spec;
    spec.eps = cfg.sim.eps > 0.0 ? cfg.sim.eps : v.eps;
    spec.tau0 = std::max(v.tau0, 1.0);
    spec.tau1 = spec.tau0 + cfg.sim.tau_span;
    spec.grid = GridSpec{-v.xi1, 4.0 * v.xi1, cfg.sim.points, cfg.sim.dtau};
    spec.save_every = cfg.sim.save_every;
    spec.fit_xi_lo = -v.xi1;
    spec.fit_xi_hi = v.xi1;
    thresholds["simulation"] = json{{"eps", spec.eps},
                                    {"tau0", spec.tau0},
                                    {"tau1", spec.tau1},
                                    {"xi_range", {spec.grid.xi_lo, spec.grid.xi_hi}},
                                    {"points", spec.grid.points},
                                    {"dtau", spec.grid.dtau},
                                    {"start", to_string(cfg.sim.start)}};

    const ConvergenceReport conv = manufactured_convergence(p);
    checks.add("solver.manufactured_ratio", conv.ratio >= 3.5 && conv.ratio <= 4.5,
               json{{"ratio", conv.ratio}, {"err_coarse", conv.err_coarse}, {"err_fine", conv.err_fine},
                    {"constant", conv.constant}});
    spec.tol_constant = conv.constant;

    const auto w0 = initial_w_bar(match, spec.eps, spec.tau0, spec.grid, cfg.sim.start);
    const SandwichReport r = comparison_sandwich(match, spec, w0, cfg.sim.start);
    checks.add("sandwich.contained", r.holds,
               json{{"tol", r.tol}, {"worst_below", r.worst_below}, {"worst_above", r.worst_above},
                    {"first_bad_frame", r.first_bad_frame}, {"frames", r.frames},
                    {"rejected_steps", r.trajectory.rejected}});

    std::string csv = "t,gap,tau,xi,s,w,w_bar,log_u\n";
    const auto& traj = r.trajectory;
    for (std::size_t f = 0; f < traj.frames.size(); f += static_cast<std::size_t>(cfg.sim.csv_frame_stride)) {
        const SimState& st = traj.frames[f];
        const double tau = st.tau(), shift = p.A * std::pow(st.gap, -p.gamma);
        for (std::size_t i = 0; i < st.w.size(); i += static_cast<std::size_t>(cfg.sim.csv_point_stride)) {
            const double s = traj.xi[i] + shift;
            const double w_bar = st.w[i] * std::pow(st.gap, -(1.0 + p.gamma));
            const double log_u = (std::log(st.w[i]) - 2.0 * s) / (1.0 - p.m);
            csv += csv_line({p.T - st.gap, st.gap, tau, traj.xi[i], s, st.w[i], w_bar, log_u});
        }
    }
    write_atomic(dir / "trajectory.csv", csv);
    artifacts.push_back("trajectory.csv");

    const json sandwich{{"holds", r.holds},
                        {"tol", r.tol},
                        {"first_bad_frame", r.first_bad_frame},
                        {"worst_below", r.worst_below},
                        {"worst_above", r.worst_above},
                        {"mean_gap_lower", r.mean_gap_lower},
                        {"mean_gap_upper", r.mean_gap_upper},
                        {"frames", r.frames},
                        {"steps", traj.steps},
                        {"rejected_steps", traj.rejected}};
    write_atomic(dir / "sandwich.json", sandwich.dump(2) + "\n");
    artifacts.push_back("sandwich.json");

    if (!r.fits_available) {
        checks.add("extinction.fits", false, json{{"error", "run too short for a two-decade fit"}});
        return;
    }
    auto fit_json = [](const ExtinctionFit& f) {
        return json{{"exponent", f.exponent}, {"std_error", f.std_error}, {"ci95", {f.ci_lo, f.ci_hi}},
                    {"reference", f.reference}, {"tau_window", {f.tau_lo, f.tau_hi}}, {"samples", f.samples}};
    };
    const json fits{{"quantity", "sup over the fit window of w^(1/(1-m))"},
                    {"xi_window", {spec.fit_xi_lo, spec.fit_xi_hi}},
                    {"solution", fit_json(r.fit_solution)},
                    {"upper", fit_json(r.fit_upper)},
                    {"lower", fit_json(r.fit_lower)}};
    write_atomic(dir / "extinction_fit.json", fits.dump(2) + "\n");
    artifacts.push_back("extinction_fit.json");

    const double ref = lab.d.exponent_rate;
    for (auto [name, f] : {std::pair{"upper", &r.fit_upper}, std::pair{"lower", &r.fit_lower},
                           std::pair{"solution", &r.fit_solution}})
        checks.add(fmt::format("extinction.{}", name), std::abs(f->exponent / ref - 1.0) <= 0.03,
                   json{{"exponent", f->exponent}, {"reference", ref}});
    const double lo = std::min(r.fit_upper.exponent, r.fit_lower.exponent);
    const double hi = std::max(r.fit_upper.exponent, r.fit_lower.exponent);
    if (cfg.sim.start == BoundaryChoice::mean)
        checks.add("extinction.between", r.fit_solution.exponent >= lo && r.fit_solution.exponent <= hi,
                   json{{"solution", r.fit_solution.exponent}, {"interval", {lo, hi}}});
}

std::vector<std::string> planned_artifacts(Command c) {
    std::vector<std::string> out;
    if (c == Command::profile || c == Command::report) out.insert(out.end(), {"outer_profiles.csv", "self_similar.csv"});
    if (c == Command::simulate || c == Command::report)
        out.insert(out.end(), {"trajectory.csv", "sandwich.json", "extinction_fit.json"});
    out.push_back(std::string(to_string(c)) + ".json");
    return out;
}

}  // namespace

RunResult run_command(const RunConfig& cfg) {
    RunResult res;
    res.dir = run_directory(cfg);
    if (cfg.dry_run) {
        res.pass = true;
        res.plan.push_back(fmt::format("command: {}", to_string(cfg.command)));
        res.plan.push_back(fmt::format("run directory: {}", res.dir.string()));
        for (const auto& a : planned_artifacts(cfg.command)) res.plan.push_back(fmt::format("would write: {}", a));
        return res;
    }
    const Lab lab(cfg);
    Checks checks;
    json thresholds = json::object();
    std::vector<std::string> artifacts;
    const Command c = cfg.command;
    if (c == Command::profile || c == Command::report) write_profiles(lab, cfg, res.dir, checks, thresholds, artifacts);
    if (c != Command::profile) {
        const VerifyOutcome v = run_verify(lab, cfg, checks);
        for (auto& [k, val] : v.thresholds.items()) thresholds[k] = val;
        if (c != Command::verify) {
            const bool verified = checks.pass() && v.complete;
            checks.add("simulate.precondition", verified || cfg.force,
                       json{{"verify_passed", verified}, {"force", cfg.force}});
            if (verified || cfg.force) {
                VerifyOutcome sim_v = v;
                if (!v.bounds) sim_v.eps = cfg.sim.eps;
                if (!v.complete) sim_v.tau0 = std::max(v.tau0, 16.0);
                write_simulation(lab, cfg, sim_v, res.dir, checks, thresholds, artifacts);
            }
        }
    }
    const std::string summary_name = std::string(to_string(c)) + ".json";
    artifacts.push_back(summary_name);
    res.summary_json = top_level(lab, thresholds, checks, artifacts).dump(2) + "\n";
    write_atomic(res.dir / summary_name, res.summary_json);
    res.artifacts = artifacts;
    res.pass = checks.pass();
    return res;
}

}  // namespace fdelab
