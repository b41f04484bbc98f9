"""Barrier construction and comparison lab for the fast diffusion equation."""

import json

from ._fdelab import (
    BoundaryChoice,
    FdelabError,
    Matching,
    ModelParams,
    OuterProfiles,
    SelfSimilarProfile,
    Sign,
    canonical_config,
    derive_constants,
    initial_w_bar,
    manufactured_convergence,
    run_command,
    theta_violations,
)

__all__ = [
    "BoundaryChoice",
    "FdelabError",
    "Matching",
    "ModelParams",
    "OuterProfiles",
    "SelfSimilarProfile",
    "Sign",
    "canonical_config",
    "derive_constants",
    "initial_w_bar",
    "manufactured_convergence",
    "run",
    "run_command",
    "theta_violations",
]


def run(command, config_text="", out_dir="fdelab_out", force=False, dry_run=False):
    """Runs a CLI command and returns its result with the summary parsed from JSON."""
    result = run_command(command, config_text, str(out_dir), force, dry_run)
    result["summary"] = json.loads(result["summary_json"]) if result["summary_json"] else None
    return result
