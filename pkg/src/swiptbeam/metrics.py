"""True (non-approximated) physical quantities for a candidate design on a
channel realization: SINR, eavesdropper rates, secrecy rate, harvested power,
and a sampling probe of the worst case over the CSI-error balls.

Rates are in bits (log base 2).  Two eavesdropper-rate forms exist: the exact
log-det rate and the trace-ratio form the optimizer actually constrains; for
single-antenna eavesdroppers they coincide, otherwise the trace form is the
smaller of the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .scenario import ChannelSet, NoiseAndEfficiency, PowerBudget, sample_bounded_error

_LOG2 = math.log(2.0)


class MetricError(ValueError):
    pass


@dataclass
class BeamformingSolution:
    """Transmit design: per-CR beams, AN vector, jammer vector, PS ratios,
    and the slack values reported by the optimizer."""

    w: list            # K complex vectors (NT,)
    z: np.ndarray      # (NT,)
    q: np.ndarray      # (NJ,)
    rho: np.ndarray    # (K,) in (0, 1]
    e_floor_cr: float  # reported min-CR-harvest floor (W)
    e_floor_er: float  # reported min-ER-harvest floor (W)
    r1: float
    r2: float

    def __post_init__(self):
        self.w = [np.asarray(v, dtype=complex) for v in self.w]
        self.z = np.asarray(self.z, dtype=complex)
        self.q = np.asarray(self.q, dtype=complex)
        self.rho = np.asarray(self.rho, dtype=float)

    def tx_power(self) -> float:
        return float(sum(np.vdot(v, v).real for v in self.w) + np.vdot(self.z, self.z).real)

    def jam_power(self) -> float:
        return float(np.vdot(self.q, self.q).real)


def _quad(v: np.ndarray, a: np.ndarray) -> float:
    """v^H a a^H v = |a^H v|^2 for vector a; generic Re{v^H A v} otherwise."""
    return float(np.vdot(v, a @ v).real)


def sinr_cr(sol: BeamformingSolution, ch: ChannelSet, noise: NoiseAndEfficiency, k: int) -> float:
    """Post-split SINR of CR k on the given (realized) channels."""
    rho = sol.rho[k]
    if rho <= 0.0:
        raise MetricError(f"rho[{k}] must be > 0")
    h = ch.h_cr[k]
    g = ch.g_cr[k]
    signal = abs(np.vdot(h, sol.w[k])) ** 2
    interference = sum(abs(np.vdot(h, sol.w[j])) ** 2 for j in range(len(sol.w)) if j != k)
    interference += abs(np.vdot(h, sol.z)) ** 2 + abs(np.vdot(g, sol.q)) ** 2
    den = rho * (noise.sigma2_cr[k] + interference) + noise.delta2_cr[k]
    return rho * signal / den


def _er_interference(sol: BeamformingSolution, ch: ChannelSet,
                     noise: NoiseAndEfficiency, l: int) -> np.ndarray:
    """NE x NE interference-plus-noise matrix at ER l (positive definite)."""
    H = ch.H_er[l]
    G = ch.G_er[l]
    a_z = H.conj().T @ sol.z
    a_q = G.conj().T @ sol.q
    ne = H.shape[1]
    return (np.outer(a_z, a_z.conj()) + np.outer(a_q, a_q.conj())
            + noise.sigma2_er[l] * np.eye(ne))


def eavesdropper_rate(sol: BeamformingSolution, ch: ChannelSet,
                      noise: NoiseAndEfficiency, l: int, k: int) -> float:
    """Exact rate at which ER l can decode CR k's stream (log-det form)."""
    if noise.sigma2_er[l] <= 0.0:
        raise MetricError("ER noise power must be > 0")
    H = ch.H_er[l]
    m = _er_interference(sol, ch, noise, l)
    a = H.conj().T @ sol.w[k]
    # Cholesky whitening: |I + M^-1 a a^H| = 1 + ||L^-1 a||^2
    low, lower = cho_factor(m, lower=True)
    v = solve_triangular(low, a, lower=True)
    return math.log1p(float(np.vdot(v, v).real)) / _LOG2


def eavesdropper_rate_trace(sol: BeamformingSolution, ch: ChannelSet,
                            noise: NoiseAndEfficiency, l: int, k: int) -> float:
    """Trace-ratio leakage rate, the quantity the secrecy constraint bounds.
    Under-estimates the log-det rate for NE > 1."""
    H = ch.H_er[l]
    G = ch.G_er[l]
    num = float(np.linalg.norm(H.conj().T @ sol.w[k]) ** 2)
    den = noise.sigma2_er[l] + float(np.linalg.norm(H.conj().T @ sol.z) ** 2
                                     + np.linalg.norm(G.conj().T @ sol.q) ** 2)
    return math.log1p(num / den) / _LOG2


def secrecy_rate(sol: BeamformingSolution, ch: ChannelSet, noise: NoiseAndEfficiency,
                 k: int, leakage: str = "det") -> float:
    """[CR rate - worst eavesdropper rate]^+ for CR k.

    ``leakage='det'`` uses the exact log-det eavesdropper rate,
    ``leakage='trace'`` the trace-ratio form the design guarantees.
    """
    rate_fn = {"det": eavesdropper_rate, "trace": eavesdropper_rate_trace}[leakage]
    own = math.log1p(sinr_cr(sol, ch, noise, k)) / _LOG2
    worst = max(rate_fn(sol, ch, noise, l, k) for l in range(len(ch.H_er)))
    return max(own - worst, 0.0)


def harvested_power_cr(sol: BeamformingSolution, ch: ChannelSet,
                       noise: NoiseAndEfficiency, k: int) -> float:
    """Energy collected by CR k's harvesting branch (W)."""
    rho = sol.rho[k]
    if not 0.0 < rho <= 1.0:
        raise MetricError(f"rho[{k}] must lie in (0, 1]")
    h = ch.h_cr[k]
    g = ch.g_cr[k]
    total = sum(abs(np.vdot(h, v)) ** 2 for v in sol.w)
    total += abs(np.vdot(h, sol.z)) ** 2 + abs(np.vdot(g, sol.q)) ** 2
    return noise.eta_cr[k] * (1.0 - rho) * (total + noise.sigma2_cr[k])


def harvested_power_er(sol: BeamformingSolution, ch: ChannelSet,
                       noise: NoiseAndEfficiency, l: int) -> float:
    """Energy collected by ER l across its antennas (W)."""
    H = ch.H_er[l]
    G = ch.G_er[l]
    ne = H.shape[1]
    total = sum(np.linalg.norm(H.conj().T @ v) ** 2 for v in sol.w)
    total += np.linalg.norm(H.conj().T @ sol.z) ** 2
    total += np.linalg.norm(G.conj().T @ sol.q) ** 2
    return noise.eta_er[l] * float(total + ne * noise.sigma2_er[l])


def perturb_channels(ch: ChannelSet, e_cr, e_cr_jam, e_er, e_er_jam) -> ChannelSet:
    """Apply additive errors to every channel group (radii carried over)."""
    return ChannelSet(
        h_cr=[h + e for h, e in zip(ch.h_cr, e_cr)],
        H_er=[H + E for H, E in zip(ch.H_er, e_er)],
        g_cr=[g + e for g, e in zip(ch.g_cr, e_cr_jam)],
        G_er=[G + E for G, E in zip(ch.G_er, e_er_jam)],
        eps_cr=ch.eps_cr, eps_cr_jam=ch.eps_cr_jam,
        theta_er=ch.theta_er, theta_er_jam=ch.theta_er_jam,
    )


@dataclass
class WorstCaseReport:
    """Per-receiver minima over sampled admissible CSI errors."""

    min_secrecy: np.ndarray        # K, log-det leakage
    min_secrecy_trace: np.ndarray  # K, trace leakage (the designed guarantee)
    min_harvest_cr: np.ndarray     # K
    min_harvest_er: np.ndarray     # L
    n_samples: int


def empirical_worst_case(sol: BeamformingSolution, ch: ChannelSet,
                         noise: NoiseAndEfficiency, budget: PowerBudget,
                         n_samples: int, seed: int,
                         boundary_prob: float = 0.5) -> WorstCaseReport:
    """Sampling probe of the worst case over the four error balls jointly.

    The first sample is the zero perturbation, so every reported minimum is at
    most the nominal value; remaining samples mix interior and boundary draws.
    A lower-bounding probe, not an exact minimizer.
    """
    if n_samples < 1:
        raise MetricError("n_samples must be >= 1")
    dims = ch.dims
    rng = np.random.default_rng([seed, 2])  # decorrelated from scenario draws
    K, L = dims.K, dims.L
    min_sec = np.full(K, np.inf)
    min_sec_tr = np.full(K, np.inf)
    min_ecr = np.full(K, np.inf)
    min_eer = np.full(L, np.inf)
    for s in range(n_samples):
        if s == 0:
            e_cr = [np.zeros(dims.NT, dtype=complex)] * K
            e_cj = [np.zeros(dims.NJ, dtype=complex)] * K
            e_er = [np.zeros((dims.NT, dims.NE), dtype=complex)] * L
            e_ej = [np.zeros((dims.NJ, dims.NE), dtype=complex)] * L
        else:
            e_cr = [sample_bounded_error(ch.eps_cr[k], dims.NT, rng, boundary_prob) for k in range(K)]
            e_cj = [sample_bounded_error(ch.eps_cr_jam[k], dims.NJ, rng, boundary_prob) for k in range(K)]
            e_er = [sample_bounded_error(ch.theta_er[l], (dims.NT, dims.NE), rng, boundary_prob) for l in range(L)]
            e_ej = [sample_bounded_error(ch.theta_er_jam[l], (dims.NJ, dims.NE), rng, boundary_prob) for l in range(L)]
        real = perturb_channels(ch, e_cr, e_cj, e_er, e_ej)
        for k in range(K):
            min_sec[k] = min(min_sec[k], secrecy_rate(sol, real, noise, k, leakage="det"))
            min_sec_tr[k] = min(min_sec_tr[k], secrecy_rate(sol, real, noise, k, leakage="trace"))
            min_ecr[k] = min(min_ecr[k], harvested_power_cr(sol, real, noise, k))
        for l in range(L):
            min_eer[l] = min(min_eer[l], harvested_power_er(sol, real, noise, l))
    return WorstCaseReport(min_secrecy=min_sec, min_secrecy_trace=min_sec_tr,
                           min_harvest_cr=min_ecr, min_harvest_er=min_eer,
                           n_samples=n_samples)


# ---------------------------------------------------------------------------
# solution text serialization (for the `validate` CLI)


def save_solution_text(sol: BeamformingSolution) -> str:
    from .scenario import _fmt, _fmt_cvec  # shared exact-float formatting

    lines = ["# swiptbeam solution v1", "[scalars]",
             f"K = {len(sol.w)}",
             f"rho = {' '.join(_fmt(r) for r in sol.rho)}",
             f"e_floor_cr = {_fmt(sol.e_floor_cr)}",
             f"e_floor_er = {_fmt(sol.e_floor_er)}",
             f"r1 = {_fmt(sol.r1)}", f"r2 = {_fmt(sol.r2)}"]
    for k, v in enumerate(sol.w):
        lines += [f"[w.{k}]"] + _fmt_cvec(v)
    lines += ["[z]"] + _fmt_cvec(sol.z)
    lines += ["[q]"] + _fmt_cvec(sol.q)
    return "\n".join(lines) + "\n"


def load_solution_text(text: str) -> BeamformingSolution:
    from .scenario import _kv, _parse_cvec, _parse_sections

    sec = _parse_sections(text)
    sk = _kv(sec["scalars"])
    n_cr = int(sk["K"])
    return BeamformingSolution(
        w=[_parse_cvec(sec[f"w.{k}"]) for k in range(n_cr)],
        z=_parse_cvec(sec["z"]), q=_parse_cvec(sec["q"]),
        rho=np.array([float(t) for t in sk["rho"].split()]),
        e_floor_cr=float(sk["e_floor_cr"]), e_floor_er=float(sk["e_floor_er"]),
        r1=float(sk["r1"]), r2=float(sk["r2"]),
    )
