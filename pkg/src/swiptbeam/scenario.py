"""System instances: dimensions, geometry, noise, budgets, and random channel sets.

Channels follow the common distance-based model: each entry of an estimated
channel is i.i.d. circularly-symmetric complex Gaussian scaled by the
path-loss amplitude of its link, so E||h||^2 = (num entries) * H(d)^2.
CSI errors live in Euclidean (vectors) / Frobenius (matrices) balls whose
radii default to "relative" semantics: the configured bound is multiplied by
the link's path-loss amplitude, i.e. it bounds the error of the normalized
channel.  Absolute radii are available with ``radii_relative=False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

SPEED_OF_LIGHT = 3.0e8  # m/s


class ScenarioError(ValueError):
    """Raised on invalid scenario parameters."""


# ---------------------------------------------------------------------------
# unit helpers


def dbm_to_watts(p_dbm: float) -> float:
    """Convert a power level in dBm to watts."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    """Convert a power in watts (> 0) to dBm."""
    if p_w <= 0.0:
        raise ScenarioError(f"watts_to_dbm requires p_w > 0, got {p_w}")
    return 10.0 * math.log10(p_w) + 30.0


def path_loss_amplitude(d: float, f_c: float, kappa: float, c: float = SPEED_OF_LIGHT) -> float:
    """Distance-based amplitude gain H(d) = c/(4 pi f_c) * (1/d)^(kappa/2)."""
    if d <= 0.0 or f_c <= 0.0:
        raise ScenarioError(f"path_loss_amplitude requires d > 0 and f_c > 0, got d={d}, f_c={f_c}")
    return c / (4.0 * math.pi * f_c) * (1.0 / d) ** (kappa / 2.0)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class SystemDims:
    """Node and antenna counts."""

    K: int  # co-located receivers (CRs)
    L: int  # energy receivers (ERs)
    NT: int  # transmitter antennas
    NJ: int  # jammer antennas
    NE: int  # antennas per ER

    def __post_init__(self):
        for name in ("K", "L", "NT", "NJ", "NE"):
            if getattr(self, name) < 1:
                raise ScenarioError(f"SystemDims.{name} must be >= 1")


@dataclass(frozen=True)
class Geometry:
    """Link distances (m), carrier, and path-loss exponent."""

    d_cr: np.ndarray  # transmitter -> CR distance, per CR
    f_cr: np.ndarray  # jammer -> CR distance, per CR
    d_er: np.ndarray  # transmitter -> ER distance, per ER
    f_er: np.ndarray  # jammer -> ER distance, per ER
    f_carrier: float = 900e6
    kappa: float = 2.7
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("d_cr", "f_cr", "d_er", "f_er"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if np.any(arr <= 0.0):
                raise ScenarioError(f"Geometry.{name} distances must be > 0")
        if self.f_carrier <= 0.0 or self.kappa <= 0.0:
            raise ScenarioError("Geometry requires f_carrier > 0 and kappa > 0")

    @classmethod
    def uniform(cls, dims: SystemDims, d_cr=100.0, f_cr=100.0,
                d_er=9.0, f_er=9.0, **kwargs) -> "Geometry":
        """Class-level distances (scalars broadcast per receiver; sequences
        give heterogeneous layouts)."""
        spread = lambda v, n: np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
        return cls(
            d_cr=spread(d_cr, dims.K), f_cr=spread(f_cr, dims.K),
            d_er=spread(d_er, dims.L), f_er=spread(f_er, dims.L),
            **kwargs,
        )


@dataclass(frozen=True)
class NoiseAndEfficiency:
    """Noise powers (W) and energy-conversion efficiencies, per receiver."""

    sigma2_cr: np.ndarray  # CR antenna noise
    delta2_cr: np.ndarray  # CR ID-processing noise
    sigma2_er: np.ndarray  # ER noise per antenna
    eta_cr: np.ndarray
    eta_er: np.ndarray

    def __post_init__(self):
        for name in ("sigma2_cr", "delta2_cr", "sigma2_er", "eta_cr", "eta_er"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
        if np.any(self.sigma2_cr <= 0) or np.any(self.delta2_cr <= 0) or np.any(self.sigma2_er <= 0):
            raise ScenarioError("noise powers must be > 0")
        for name in ("eta_cr", "eta_er"):
            arr = getattr(self, name)
            if np.any(arr <= 0) or np.any(arr > 1):
                raise ScenarioError("efficiencies must lie in (0, 1]")

    @classmethod
    def defaults(cls, dims: SystemDims, sigma2_cr_dbm: float = -90.0,
                 delta2_cr_dbm: float = -50.0, sigma2_er_dbm: float = -90.0,
                 eta: float = 0.3) -> "NoiseAndEfficiency":
        return cls(
            sigma2_cr=np.full(dims.K, dbm_to_watts(sigma2_cr_dbm)),
            delta2_cr=np.full(dims.K, dbm_to_watts(delta2_cr_dbm)),
            sigma2_er=np.full(dims.L, dbm_to_watts(sigma2_er_dbm)),
            eta_cr=np.full(dims.K, eta),
            eta_er=np.full(dims.L, eta),
        )


@dataclass(frozen=True)
class PowerBudget:
    """Power budgets (W), secrecy-rate floor (bit/s/Hz), and objective weight."""

    p_tx: float
    p_jam: float
    rate_target: float
    tau: float = 0.5

    def __post_init__(self):
        if self.p_tx <= 0 or self.p_jam <= 0:
            raise ScenarioError("power budgets must be > 0")
        if self.rate_target < 0:
            raise ScenarioError("rate_target must be >= 0")
        if not 0.0 <= self.tau <= 1.0:
            raise ScenarioError("tau must lie in [0, 1]")


@dataclass
class ChannelSet:
    """Estimated channels plus the error-ball radii around them."""

    h_cr: list  # K complex vectors (NT,), transmitter -> CR
    H_er: list  # L complex matrices (NT, NE), transmitter -> ER
    g_cr: list  # K complex vectors (NJ,), jammer -> CR
    G_er: list  # L complex matrices (NJ, NE), jammer -> ER
    eps_cr: np.ndarray       # K: Euclidean radius on h_cr errors
    eps_cr_jam: np.ndarray   # K: radius on g_cr errors
    theta_er: np.ndarray     # L: Frobenius radius on H_er errors
    theta_er_jam: np.ndarray  # L: radius on G_er errors

    def __post_init__(self):
        self.h_cr = [np.asarray(v, dtype=complex) for v in self.h_cr]
        self.H_er = [np.asarray(m, dtype=complex) for m in self.H_er]
        self.g_cr = [np.asarray(v, dtype=complex) for v in self.g_cr]
        self.G_er = [np.asarray(m, dtype=complex) for m in self.G_er]
        for name in ("eps_cr", "eps_cr_jam", "theta_er", "theta_er_jam"):
            arr = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, arr)
            if np.any(arr < 0):
                raise ScenarioError(f"ChannelSet.{name} radii must be >= 0")

    @property
    def dims(self) -> SystemDims:
        return SystemDims(
            K=len(self.h_cr), L=len(self.H_er),
            NT=self.h_cr[0].shape[0], NJ=self.g_cr[0].shape[0],
            NE=self.H_er[0].shape[1],
        )

    def with_zero_radii(self) -> "ChannelSet":
        """Same channels, perfect CSI."""
        return ChannelSet(
            h_cr=[v.copy() for v in self.h_cr], H_er=[m.copy() for m in self.H_er],
            g_cr=[v.copy() for v in self.g_cr], G_er=[m.copy() for m in self.G_er],
            eps_cr=np.zeros_like(self.eps_cr), eps_cr_jam=np.zeros_like(self.eps_cr_jam),
            theta_er=np.zeros_like(self.theta_er), theta_er_jam=np.zeros_like(self.theta_er_jam),
        )


@dataclass
class Scenario:
    """A complete system instance."""

    dims: SystemDims
    geom: Geometry
    noise: NoiseAndEfficiency
    budget: PowerBudget
    channels: ChannelSet


# ---------------------------------------------------------------------------
# random generation


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    # unit entry variance: two N(0, 1/2) real parts
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def generate_scenario(seed: int, dims: SystemDims, geom: Geometry,
                      eps_cr=0.0, eps_cr_jam=0.0, theta_er=0.0, theta_er_jam=0.0,
                      radii_relative: bool = True) -> ChannelSet:
    """Draw an estimated channel set for the given geometry.

    The four radius arguments accept scalars or per-receiver arrays.  With
    ``radii_relative=True`` each radius is multiplied by the path-loss
    amplitude of its link, i.e. it bounds the error of the normalized channel.
    Deterministic for a fixed (seed, dims, geom).
    """
    if len(geom.d_cr) != dims.K or len(geom.d_er) != dims.L:
        raise ScenarioError("geometry sizes inconsistent with dims")
    rng = np.random.default_rng(seed)
    amp = lambda d: path_loss_amplitude(d, geom.f_carrier, geom.kappa, geom.c)

    h_cr = [amp(geom.d_cr[k]) * _complex_gaussian(rng, dims.NT) for k in range(dims.K)]
    H_er = [amp(geom.d_er[l]) * _complex_gaussian(rng, (dims.NT, dims.NE)) for l in range(dims.L)]
    g_cr = [amp(geom.f_cr[k]) * _complex_gaussian(rng, dims.NJ) for k in range(dims.K)]
    G_er = [amp(geom.f_er[l]) * _complex_gaussian(rng, (dims.NJ, dims.NE)) for l in range(dims.L)]

    def radii(value, distances):
        arr = np.broadcast_to(np.asarray(value, dtype=float), distances.shape).copy()
        if np.any(arr < 0):
            raise ScenarioError("error radii must be >= 0")
        if radii_relative:
            arr *= np.array([amp(d) for d in distances])
        return arr

    return ChannelSet(
        h_cr=h_cr, H_er=H_er, g_cr=g_cr, G_er=G_er,
        eps_cr=radii(eps_cr, geom.d_cr),
        eps_cr_jam=radii(eps_cr_jam, geom.f_cr),
        theta_er=radii(theta_er, geom.d_er),
        theta_er_jam=radii(theta_er_jam, geom.f_er),
    )


def sample_bounded_error(radius: float, shape, rng, boundary_prob: float = 0.25) -> np.ndarray:
    """Complex perturbation with Euclidean/Frobenius norm <= radius.

    With probability ``boundary_prob`` the sample sits exactly on the ball
    boundary; otherwise it is uniform in the ball.  ``rng`` may be a seed or a
    ``numpy.random.Generator``.
    """
    if radius < 0:
        raise ScenarioError(f"radius must be >= 0, got {radius}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    e = _complex_gaussian(rng, shape)
    norm = np.linalg.norm(e)
    if norm == 0.0:
        return np.zeros(shape, dtype=complex)
    e /= norm
    if rng.uniform() < boundary_prob:
        scale = radius
    else:
        n_real = 2 * int(np.prod(np.atleast_1d(shape)))
        scale = radius * rng.uniform() ** (1.0 / n_real)
    return scale * e


# ---------------------------------------------------------------------------
# convenience builder with the default simulation parameters


@dataclass(frozen=True)
class ScenarioParams:
    """Keyed bundle of everything needed to draw a Scenario."""

    K: int = 2
    L: int = 2
    NT: int = 4
    NJ: int = 4
    NE: int = 2
    d_cr: object = 100.0   # scalar or per-receiver tuple (m)
    f_cr: object = 100.0
    d_er: object = 9.0
    f_er: object = 9.0
    f_carrier: float = 900e6
    kappa: float = 2.7
    sigma2_cr_dbm: float = -90.0
    delta2_cr_dbm: float = -50.0
    sigma2_er_dbm: float = -90.0
    eta: float = 0.3
    p_tx_dbm: float = 40.0
    p_jam_dbm: float = 40.0
    rate_target: float = 0.5
    tau: float = 0.5
    eps_cr: float = 0.0
    eps_er: float = 0.0
    radii_relative: bool = True

    def replace(self, **kwargs) -> "ScenarioParams":
        return replace(self, **kwargs)


def make_scenario(seed: int, params: ScenarioParams = ScenarioParams()) -> Scenario:
    """Draw a full Scenario from high-level parameters (one shared CR-side and
    one shared ER-side error bound, as in the reference simulation setup)."""
    dims = SystemDims(params.K, params.L, params.NT, params.NJ, params.NE)
    geom = Geometry.uniform(dims, d_cr=params.d_cr, f_cr=params.f_cr,
                            d_er=params.d_er, f_er=params.f_er,
                            f_carrier=params.f_carrier, kappa=params.kappa)
    noise = NoiseAndEfficiency.defaults(
        dims, sigma2_cr_dbm=params.sigma2_cr_dbm, delta2_cr_dbm=params.delta2_cr_dbm,
        sigma2_er_dbm=params.sigma2_er_dbm, eta=params.eta)
    budget = PowerBudget(p_tx=dbm_to_watts(params.p_tx_dbm), p_jam=dbm_to_watts(params.p_jam_dbm),
                         rate_target=params.rate_target, tau=params.tau)
    channels = generate_scenario(
        seed, dims, geom,
        eps_cr=params.eps_cr, eps_cr_jam=params.eps_cr,
        theta_er=params.eps_er, theta_er_jam=params.eps_er,
        radii_relative=params.radii_relative)
    return Scenario(dims=dims, geom=geom, noise=noise, budget=budget, channels=channels)


# ---------------------------------------------------------------------------
# text serialization (exact double-precision round trip)


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_vec(arr) -> str:
    return " ".join(_fmt(v) for v in np.asarray(arr, dtype=float).ravel())


def _fmt_cvec(v) -> list:
    return [f"{_fmt(x.real)},{_fmt(x.imag)}" for x in np.asarray(v, dtype=complex).ravel()]


def _fmt_cmat(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [" ".join(f"{_fmt(x.real)},{_fmt(x.imag)}" for x in row) for row in m]


def save_scenario_text(scn: Scenario) -> str:
    """Serialize a Scenario to the keyed text format (complex entries as
    're,im' pairs, matrices row-major, floats at full precision)."""
    d, g, n, b, ch = scn.dims, scn.geom, scn.noise, scn.budget, scn.channels
    lines = ["# swiptbeam scenario v1"]
    lines += ["[dims]"] + [f"{k} = {getattr(d, k)}" for k in ("K", "L", "NT", "NJ", "NE")]
    lines += ["[geometry]",
              f"d_cr = {_fmt_vec(g.d_cr)}", f"f_cr = {_fmt_vec(g.f_cr)}",
              f"d_er = {_fmt_vec(g.d_er)}", f"f_er = {_fmt_vec(g.f_er)}",
              f"f_carrier = {_fmt(g.f_carrier)}", f"kappa = {_fmt(g.kappa)}", f"c = {_fmt(g.c)}"]
    lines += ["[noise]",
              f"sigma2_cr = {_fmt_vec(n.sigma2_cr)}", f"delta2_cr = {_fmt_vec(n.delta2_cr)}",
              f"sigma2_er = {_fmt_vec(n.sigma2_er)}",
              f"eta_cr = {_fmt_vec(n.eta_cr)}", f"eta_er = {_fmt_vec(n.eta_er)}"]
    lines += ["[budget]",
              f"p_tx = {_fmt(b.p_tx)}", f"p_jam = {_fmt(b.p_jam)}",
              f"rate_target = {_fmt(b.rate_target)}", f"tau = {_fmt(b.tau)}"]
    lines += ["[radii]",
              f"eps_cr = {_fmt_vec(ch.eps_cr)}", f"eps_cr_jam = {_fmt_vec(ch.eps_cr_jam)}",
              f"theta_er = {_fmt_vec(ch.theta_er)}", f"theta_er_jam = {_fmt_vec(ch.theta_er_jam)}"]
    for k in range(d.K):
        lines += [f"[channel.h_cr.{k}]"] + _fmt_cvec(ch.h_cr[k])
    for l in range(d.L):
        lines += [f"[channel.H_er.{l}]"] + _fmt_cmat(ch.H_er[l])
    for k in range(d.K):
        lines += [f"[channel.g_cr.{k}]"] + _fmt_cvec(ch.g_cr[k])
    for l in range(d.L):
        lines += [f"[channel.G_er.{l}]"] + _fmt_cmat(ch.G_er[l])
    return "\n".join(lines) + "\n"


def _parse_sections(text: str) -> dict:
    sections = {}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        else:
            if current is None:
                raise ScenarioError(f"content before any section: {line!r}")
            sections[current].append(line)
    return sections


def _kv(lines) -> dict:
    out = {}
    for line in lines:
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _parse_cvec(lines) -> np.ndarray:
    vals = []
    for line in lines:
        re_s, _, im_s = line.partition(",")
        vals.append(complex(float(re_s), float(im_s)))
    return np.array(vals, dtype=complex)


def _parse_cmat(lines) -> np.ndarray:
    rows = []
    for line in lines:
        row = []
        for tok in line.split():
            re_s, _, im_s = tok.partition(",")
            row.append(complex(float(re_s), float(im_s)))
        rows.append(row)
    return np.array(rows, dtype=complex)


def load_scenario_text(text: str) -> Scenario:
    """Parse the text format written by :func:`save_scenario_text`."""
    sec = _parse_sections(text)
    try:
        dk = _kv(sec["dims"])
        dims = SystemDims(**{k: int(dk[k]) for k in ("K", "L", "NT", "NJ", "NE")})
        gk = _kv(sec["geometry"])
        vec = lambda s: np.array([float(t) for t in s.split()])
        geom = Geometry(d_cr=vec(gk["d_cr"]), f_cr=vec(gk["f_cr"]),
                        d_er=vec(gk["d_er"]), f_er=vec(gk["f_er"]),
                        f_carrier=float(gk["f_carrier"]), kappa=float(gk["kappa"]),
                        c=float(gk["c"]))
        nk = _kv(sec["noise"])
        noise = NoiseAndEfficiency(sigma2_cr=vec(nk["sigma2_cr"]), delta2_cr=vec(nk["delta2_cr"]),
                                   sigma2_er=vec(nk["sigma2_er"]), eta_cr=vec(nk["eta_cr"]),
                                   eta_er=vec(nk["eta_er"]))
        bk = _kv(sec["budget"])
        budget = PowerBudget(p_tx=float(bk["p_tx"]), p_jam=float(bk["p_jam"]),
                             rate_target=float(bk["rate_target"]), tau=float(bk["tau"]))
        rk = _kv(sec["radii"])
        channels = ChannelSet(
            h_cr=[_parse_cvec(sec[f"channel.h_cr.{k}"]) for k in range(dims.K)],
            H_er=[_parse_cmat(sec[f"channel.H_er.{l}"]) for l in range(dims.L)],
            g_cr=[_parse_cvec(sec[f"channel.g_cr.{k}"]) for k in range(dims.K)],
            G_er=[_parse_cmat(sec[f"channel.G_er.{l}"]) for l in range(dims.L)],
            eps_cr=vec(rk["eps_cr"]), eps_cr_jam=vec(rk["eps_cr_jam"]),
            theta_er=vec(rk["theta_er"]), theta_er_jam=vec(rk["theta_er_jam"]),
        )
    except KeyError as exc:
        raise ScenarioError(f"scenario text missing section or key: {exc}") from exc
    return Scenario(dims=dims, geom=geom, noise=noise, budget=budget, channels=channels)
