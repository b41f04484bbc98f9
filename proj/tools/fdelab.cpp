#include <cstdio>
#include <exception>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fdelab/cli_reports.hpp"
#include "fdelab/error.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Barrier construction and comparison lab for the fast diffusion equation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "fdelab_out";
    bool force = false, dry_run = false;
    std::optional<int> grid_eta, grid_tau;

    for (const char* name : {"profile", "verify", "simulate", "report"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "key = value parameter file")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_flag("--force", force, "simulate even when verification fails");
        sub->add_flag("--dry-run", dry_run, "print the plan without writing files");
        sub->add_option("--grid-eta", grid_eta, "rows of the outer profile table")->check(CLI::Range(2, 1000000));
        sub->add_option("--grid-tau", grid_tau, "tau points of the verification sweeps")->check(CLI::Range(2, 100000));
    }
    CLI11_PARSE(app, argc, argv);

    try {
        fdelab::RunConfig cfg = config_path.empty() ? fdelab::parse_config("") : fdelab::load_config(config_path);
        cfg.command = fdelab::command_from_string(app.get_subcommands().front()->get_name());
        cfg.out_dir = out_dir;
        cfg.force = force;
        cfg.dry_run = dry_run;
        if (grid_eta) cfg.profile_points = *grid_eta;
        if (grid_tau) cfg.thresholds.tau_points = *grid_tau;

        const fdelab::RunResult r = fdelab::run_command(cfg);
        if (cfg.dry_run) {
            for (const auto& line : r.plan) fmt::print("{}\n", line);
            return 0;
        }
        for (const auto& a : r.artifacts) fmt::print("{}\n", (r.dir / a).string());
        fmt::print("{}\n", r.pass ? "PASS" : "FAIL");
        return fdelab::exit_code(r);
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    }
}
