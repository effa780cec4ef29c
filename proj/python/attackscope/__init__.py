"""Honeypot attack-traffic analysis."""

import json

from ._attackscope import (
    AttackscopeError,
    bin_attacks,
    concentrated_bound,
    estimate_entropy,
    fano_entropy,
    generate_fig1,
    homogeneous_bound,
    parse_flow_csv,
    predictability,
    read_flow_file,
    region_flux,
    run_pipeline_json,
    sha256_hex,
    solve_fano,
    theoretical_sigma,
)


def run_pipeline(config):
    """Run every analysis stage for a config dict; returns the written file names."""
    return run_pipeline_json(json.dumps(config))


__all__ = [
    "AttackscopeError",
    "bin_attacks",
    "concentrated_bound",
    "estimate_entropy",
    "fano_entropy",
    "generate_fig1",
    "homogeneous_bound",
    "parse_flow_csv",
    "predictability",
    "read_flow_file",
    "region_flux",
    "run_pipeline",
    "sha256_hex",
    "solve_fano",
    "theoretical_sigma",
]
