"""Comparison schemes obtained by re-parameterizing the main pipeline."""

from __future__ import annotations

from dataclasses import replace

from .scenario import Scenario
from .spca import SpcaConfig, SpcaResult, run_spca

SCHEMES = ("proposed", "perfect_csi", "no_an", "no_cj", "non_robust")


def scheme_channels(tag: str, scn: Scenario):
    """(design channels, evaluation channels) for a scheme.

    Robustness ablations design at zero radii; only `perfect_csi` also
    evaluates at zero radii (the non-robust design faces the true errors).
    """
    if tag not in SCHEMES:
        raise ValueError(f"unknown scheme {tag!r}; expected one of {SCHEMES}")
    ch = scn.channels
    if tag == "perfect_csi":
        zero = ch.with_zero_radii()
        return zero, zero
    if tag == "non_robust":
        return ch.with_zero_radii(), ch
    return ch, ch


def scheme_config(tag: str, cfg: SpcaConfig) -> SpcaConfig:
    """Variable eliminations for the ablations (the pinned vector is removed
    from the subproblem, not penalized)."""
    if tag == "no_an":
        return replace(cfg, build=replace(cfg.build, include_an=False))
    if tag == "no_cj":
        return replace(cfg, build=replace(cfg.build, include_jammer=False))
    return cfg


def solve_scheme(tag: str, scn: Scenario, cfg: SpcaConfig = SpcaConfig(),
                 seed: int = 0) -> SpcaResult:
    design_ch, _ = scheme_channels(tag, scn)
    return run_spca(design_ch, scn.noise, scn.budget, scheme_config(tag, cfg), seed)
