#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fdelab/params.hpp"
#include "fdelab/pde_lab.hpp"

namespace fdelab {

enum class Command { profile, verify, simulate, report };

[[nodiscard]] const char* to_string(Command c) noexcept;
/// ConfigError for an unknown name.
[[nodiscard]] Command command_from_string(const std::string& name);

/// Controls of the simulate stage.
struct SimulationConfig {
    double eps = 0.0;         ///< 0 selects half of min(ε₁, ε₂)
    double tau_span = 5.0;    ///< run length in τ after τ₀
    int points = 2001;
    double dtau = 0.02;
    BoundaryChoice start = BoundaryChoice::mean;
    int save_every = 5;       ///< steps between saved frames
    int csv_frame_stride = 5; ///< saved frames between trajectory CSV frames
    int csv_point_stride = 4; ///< grid points between trajectory CSV rows
};

struct RunConfig {
    Command command = Command::verify;
    std::filesystem::path config_path;  ///< empty when running on defaults
    std::filesystem::path out_dir = "fdelab_out";
    bool force = false;
    bool dry_run = false;
    ModelParams params = ModelParams::with_defaults(3, 0.1, 1.5, 2.0);
    ThresholdConfig thresholds;
    std::vector<double> seeds;  ///< c_{k,0} for k = 3..2N
    int profile_points = 200;   ///< rows of the outer profile table
    SimulationConfig sim;
};

/// Parses `key = value` lines ('#' starts a comment) over the defaults. Unset θ weights follow
/// n, m from the file, each one separately. ConfigError names the line of an unknown key or a malformed value.
[[nodiscard]] RunConfig parse_config(const std::string& text);
/// Reads and parses a config file; ConfigError when it cannot be read.
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// Canonical key = value listing of everything that affects outputs (command excluded).
[[nodiscard]] std::string canonical_config(const RunConfig& cfg);
/// 64-bit FNV-1a.
[[nodiscard]] std::uint64_t fnv1a(const std::string& text) noexcept;
/// out_dir / "<command>-<16 hex digits of the hash of the canonical config>".
[[nodiscard]] std::filesystem::path run_directory(const RunConfig& cfg);

/// Writes through a temporary sibling and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Outcome of one command.
struct RunResult {
    bool pass = false;
    std::filesystem::path dir;
    std::vector<std::string> artifacts;  ///< file names inside dir
    std::string summary_json;            ///< the top-level JSON written to <command>.json
    std::vector<std::string> plan;       ///< populated for a dry run
};

/// Runs one command. Exit status policy: 0 when pass, 1 when a verdict failed; errors propagate.
[[nodiscard]] RunResult run_command(const RunConfig& cfg);

/// Process exit code for a finished run.
[[nodiscard]] inline int exit_code(const RunResult& r) noexcept { return r.pass ? 0 : 1; }

}  // namespace fdelab
