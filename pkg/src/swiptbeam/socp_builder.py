"""Assembly of the convex subproblem: a real-valued SOCP over the lifted
variables (beams, AN, jammer vector, PS ratios, harvest floors, rate slacks,
auxiliaries), linearized around an expansion point.

Complex lifting is confined to this module: every complex vector v becomes the
real stack [Re v; Im v], and a Hermitian quadratic form v^H A v becomes
||F_r x||^2 with A = F^H F factored through its eigendecomposition (rank
trimmed).  Quadratic-over-linear right-hand sides enter through first-order
expansions that touch the original function at the expansion point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .robust_bounds import GramSet
from .scenario import ChannelSet, NoiseAndEfficiency, PowerBudget


class BuildError(ValueError):
    pass


class ExpansionError(BuildError):
    """Expansion point violates a builder precondition (caller must repair)."""


@dataclass(frozen=True)
class BuildConfig:
    """Numerical floors and toggles for the subproblem assembly."""

    r1_floor: float = 1e-4          # enforced r1 >= 1 + r1_floor
    r1_floor_expansion: float = 1e-3  # required r~1 >= 1 + this
    rho_floor: float = 1e-3
    r2_floor: float = 1e-9
    es_floor: float = 1e-12         # minimum E~_s before expanding sqrt
    paper_literal_signs: bool = False  # ER-EH jammer term: +alpha~ shift instead of -
    include_an: bool = True
    include_jammer: bool = True
    psd_tol: float = 1e-12


@dataclass
class ExpansionPoint:
    """Linearization point for the surrogate constraints."""

    w: list            # K complex vectors (NT,)
    z: np.ndarray      # (NT,), zeros when AN disabled
    q: np.ndarray      # (NJ,), zeros when jammer disabled
    r1: float
    r2: float
    e_cr: float        # expansion value for sqrt(E_floor_cr)

    def __post_init__(self):
        self.w = [np.asarray(v, dtype=complex) for v in self.w]
        self.z = np.asarray(self.z, dtype=complex)
        self.q = np.asarray(self.q, dtype=complex)

    def tx_power(self) -> float:
        return float(sum(np.vdot(v, v).real for v in self.w) + np.vdot(self.z, self.z).real)

    def jam_power(self) -> float:
        return float(np.vdot(self.q, self.q).real)


# ---------------------------------------------------------------------------
# problem containers


@dataclass
class SocBlock:
    """||A x + b|| <= c.x + d"""

    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float


@dataclass
class LinBlock:
    """g.x + h >= 0"""

    name: str
    g: np.ndarray
    h: float


@dataclass
class ConicProblem:
    """Real-valued SOCP in standard form; objective is maximized."""

    n_vars: int
    objective: np.ndarray
    socs: list
    nonneg: list
    var_index: dict
    psd_flags: dict = field(default_factory=dict)

    def names(self):
        return [blk.name for blk in self.socs] + [blk.name for blk in self.nonneg]


@dataclass(frozen=True)
class VarLayout:
    n_vars: int
    index: dict
    K: int
    include_an: bool
    include_jammer: bool

    def sl(self, name: str) -> slice:
        r = self.index[name]
        return slice(r.start, r.stop)


def make_layout(dims, cfg: BuildConfig) -> VarLayout:
    """Deterministic variable ordering; ranges partition [0, n_vars)."""
    index = {}
    pos = 0

    def add(name, size):
        nonlocal pos
        index[name] = range(pos, pos + size)
        pos += size

    for k in range(dims.K):
        add(f"w{k}", 2 * dims.NT)
    if cfg.include_an:
        add("z", 2 * dims.NT)
    if cfg.include_jammer:
        add("q", 2 * dims.NJ)
    add("rho", dims.K)
    add("e_floor_cr", 1)
    add("e_floor_er", 1)
    add("r1", 1)
    add("r2", 1)
    add("s", dims.K)  # delta^2/rho hyperbolic auxiliaries
    n_forms = (dims.K - 1) + int(cfg.include_an) + int(cfg.include_jammer)
    for k in range(dims.K):
        add(f"u_sinr{k}", n_forms)
    if cfg.include_an:
        add("u_leak_z", dims.L)
    if cfg.include_jammer:
        add("u_leak_q", dims.L)
    for l in range(dims.L):
        add(f"u_leak_w{l}", dims.K)
    return VarLayout(n_vars=pos, index=index, K=dims.K,
                     include_an=cfg.include_an, include_jammer=cfg.include_jammer)


# ---------------------------------------------------------------------------
# lifting helpers


def lift_complex(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return np.concatenate([v.real, v.imag])


def psd_factor(A: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """F with F^H F = A for Hermitian PSD A (rank-trimmed); raises on
    significantly indefinite input."""
    A = np.asarray(A, dtype=complex)
    lam, U = np.linalg.eigh(0.5 * (A + A.conj().T))
    scale = max(abs(lam[0]), abs(lam[-1]), 1.0)
    if lam[0] < -tol * scale:
        raise BuildError(f"matrix not PSD (lambda_min={lam[0]:.3e})")
    keep = lam > tol * scale
    if not np.any(keep):
        return np.zeros((0, A.shape[0]), dtype=complex)
    return (np.sqrt(lam[keep])[:, None] * U[:, keep].conj().T)


def _rows_linear_map(F: np.ndarray, sl: slice, n_vars: int) -> np.ndarray:
    """Real rows computing [Re(Fv); Im(Fv)] from x with x[sl] = [Re v; Im v]."""
    r, m = F.shape
    out = np.zeros((2 * r, n_vars))
    Fr, Fi = F.real, F.imag
    out[:r, sl.start:sl.start + m] = Fr
    out[:r, sl.start + m:sl.stop] = -Fi
    out[r:, sl.start:sl.start + m] = Fi
    out[r:, sl.start + m:sl.stop] = Fr
    return out


def _row_2re(a: np.ndarray, sl: slice, n_vars: int, scale: float = 1.0) -> np.ndarray:
    """Row computing scale * 2*Re{a^H v} from the lifted coordinates."""
    m = a.shape[0]
    row = np.zeros(n_vars)
    row[sl.start:sl.start + m] = 2.0 * scale * a.real
    row[sl.start + m:sl.stop] = 2.0 * scale * a.imag
    return row


def _quad(v: np.ndarray, A: np.ndarray) -> float:
    return float(np.vdot(v, A @ v).real)


def _quad_cone(name: str, A_mat: np.ndarray, var_sl: slice, u_coord: int,
               n_vars: int, psd_tol: float, scale: float) -> SocBlock:
    """v^H A v <= u as the rotated cone ||[2 F v; u-1]|| <= u+1, stated in
    units of ``scale`` so the cone entries sit near the +/-1 offsets (the raw
    watt-scale quantities are ~1e-7 and would drown against them)."""
    F = psd_factor(A_mat, psd_tol)
    s = max(scale, 1e-300)
    rows = _rows_linear_map(2.0 * F / math.sqrt(s), var_sl, n_vars)
    t_row = np.zeros(n_vars)
    t_row[u_coord] = 1.0 / s
    A = np.vstack([rows, t_row])
    b = np.zeros(A.shape[0])
    b[-1] = -1.0
    c = np.zeros(n_vars)
    c[u_coord] = 1.0 / s
    return SocBlock(name=name, A=A, b=b, c=c, d=1.0)


def _spectral_scale(A_mat: np.ndarray, power: float) -> float:
    """Natural magnitude of v^H A v over the power ball: lambda_max * budget."""
    lam = float(np.linalg.eigvalsh(0.5 * (A_mat + A_mat.conj().T))[-1])
    return max(lam * power, 1e-300)


def _reference_scale(grams: GramSet, budget: PowerBudget) -> float:
    """Dominant quadratic-form magnitude across all cone families; individual
    cone scales are floored relative to it so no single weak link blows up
    the coefficient range."""
    best = 1e-300
    for A in grams.cr_plus:
        best = max(best, _spectral_scale(A, budget.p_tx))
    for A in grams.cr_jam_plus:
        best = max(best, _spectral_scale(A, budget.p_jam))
    for A in grams.er_plus:
        best = max(best, _spectral_scale(A, budget.p_tx))
    for A in grams.er_jam_plus:
        best = max(best, _spectral_scale(A, budget.p_jam))
    return best


_SCALE_FLOOR_REL = 1e-6


def _normalize_row(blk: LinBlock) -> LinBlock:
    s = max(float(np.abs(blk.g).max()), abs(blk.h))
    if s <= 0.0:
        return blk
    return LinBlock(name=blk.name, g=blk.g / s, h=blk.h / s)


# ---------------------------------------------------------------------------
# quadratic-over-linear surrogate


def qol_value(A: np.ndarray, a: float, w: np.ndarray, t: float) -> float:
    """f(w, t) = w^H A w / (t - a)."""
    if t <= a:
        raise BuildError(f"qol_value requires t > a (t={t}, a={a})")
    return _quad(w, A) / (t - a)


@dataclass
class QolSurrogate:
    """First-order expansion of w^H A w/(t-a) at (w~, t~):
    2 Re{w~^H A w}/(t~-a) - w~^H A w~/(t~-a)^2 * (t-a).
    Touches the original at the expansion point; a global under-estimator
    whenever A is PSD."""

    A: np.ndarray
    a: float
    w_tilde: np.ndarray
    t_tilde: float
    lin_vec: np.ndarray = field(init=False)   # A w~ (Hermitian A)
    beta: float = field(init=False)           # w~^H A w~/(t~-a)^2

    def __post_init__(self):
        if self.t_tilde <= self.a:
            raise ExpansionError(
                f"expansion requires t~ > a (t~={self.t_tilde}, a={self.a})")
        self.A = np.asarray(self.A, dtype=complex)
        self.w_tilde = np.asarray(self.w_tilde, dtype=complex)
        self.lin_vec = self.A @ self.w_tilde
        gap = self.t_tilde - self.a
        self.beta = _quad(self.w_tilde, self.A) / gap ** 2

    def value(self, w: np.ndarray, t: float) -> float:
        gap = self.t_tilde - self.a
        return (2.0 * float(np.vdot(self.lin_vec, w).real) / gap
                - self.beta * (t - self.a))

    def rows(self, w_sl: slice, t_coord: int, n_vars: int):
        """(coeff row, const) of the affine functional over the lifted x."""
        gap = self.t_tilde - self.a
        row = _row_2re(self.lin_vec, w_sl, n_vars, scale=1.0 / gap)
        row[t_coord] -= self.beta
        const = self.beta * self.a
        return row, const


def taylor_qol(A: np.ndarray, a: float, w_tilde: np.ndarray, t_tilde: float) -> QolSurrogate:
    """Affine expansion of the quadratic-over-linear form at (w~, t~)."""
    return QolSurrogate(A=A, a=a, w_tilde=w_tilde, t_tilde=t_tilde)


# ---------------------------------------------------------------------------
# constraint builders


def build_rate_soc(rate_target: float, layout: VarLayout) -> SocBlock:
    """||[sqrt(2^(Rs+2)), r1 - r2]|| <= r1 + r2, i.e. r1*r2 >= 2^Rs."""
    if rate_target < 0:
        raise BuildError("rate_target must be >= 0")
    n = layout.n_vars
    i1 = layout.index["r1"].start
    i2 = layout.index["r2"].start
    A = np.zeros((2, n))
    b = np.zeros(2)
    b[0] = math.sqrt(2.0 ** (rate_target + 2.0))
    A[1, i1] = 1.0
    A[1, i2] = -1.0
    c = np.zeros(n)
    c[i1] = 1.0
    c[i2] = 1.0
    return SocBlock(name="rate_soc", A=A, b=b, c=c, d=0.0)


def build_cr_sinr_constraint(k: int, grams: GramSet, noise: NoiseAndEfficiency,
                             budget: PowerBudget, exp: ExpansionPoint,
                             layout: VarLayout, cfg: BuildConfig):
    """Robust SINR surrogate for CR k: lifted interference forms plus the
    hyperbolic delta^2/rho term, bounded by the expanded signal form."""
    if exp.r1 <= 1.0 + cfg.r1_floor_expansion - 1e-15:
        raise ExpansionError(f"r~1 must exceed 1 + {cfg.r1_floor_expansion}")
    n = layout.n_vars
    socs = []
    u_range = layout.index[f"u_sinr{k}"]
    u_iter = iter(u_range)
    plus = grams.cr_plus[k]
    # one scale per constraint: every auxiliary is stated in the units of the
    # row it feeds, so weak links cannot blow up the coefficient range
    row_scale = max(_spectral_scale(plus, budget.p_tx),
                    _spectral_scale(grams.cr_jam_plus[k], budget.p_jam)
                    if layout.include_jammer else 0.0,
                    float(noise.delta2_cr[k]))
    for j in range(layout.K):
        if j == k:
            continue
        socs.append(_quad_cone(f"sinr{k}_w{j}", plus, layout.sl(f"w{j}"),
                               next(u_iter), n, cfg.psd_tol, row_scale))
    if layout.include_an:
        socs.append(_quad_cone(f"sinr{k}_z", plus, layout.sl("z"),
                               next(u_iter), n, cfg.psd_tol, row_scale))
    if layout.include_jammer:
        socs.append(_quad_cone(f"sinr{k}_q", grams.cr_jam_plus[k], layout.sl("q"),
                               next(u_iter), n, cfg.psd_tol, row_scale))

    # delta^2/rho <= s: ||[2 delta, s - rho]|| <= s + rho, stated in delta^2
    # units so both cone legs are O(1)
    delta2 = float(noise.delta2_cr[k])
    i_s = layout.index["s"].start + k
    i_rho = layout.index["rho"].start + k
    A = np.zeros((2, n))
    b = np.zeros(2)
    b[0] = 2.0
    A[1, i_s] = 1.0 / delta2
    A[1, i_rho] = -1.0
    c = np.zeros(n)
    c[i_s] = 1.0 / delta2
    c[i_rho] = 1.0
    socs.append(SocBlock(name=f"sinr{k}_hyperbolic", A=A, b=b, c=c, d=0.0))

    # sigma^2 + sum(u) + s <= F(w_k, r1)
    sur = taylor_qol(grams.cr_minus[k], 1.0, exp.w[k], exp.r1)
    row, const = sur.rows(layout.sl(f"w{k}"), layout.index["r1"].start, n)
    for u in u_range:
        row[u] -= 1.0
    row[i_s] -= 1.0
    h = const - float(noise.sigma2_cr[k])
    return socs, [LinBlock(name=f"sinr{k}_row", g=row, h=h)]


def build_er_leakage_cones(l: int, k_list, grams: GramSet, budget: PowerBudget,
                           exp: ExpansionPoint, layout: VarLayout, cfg: BuildConfig):
    """Shared lifted quadratic forms on the leakage left side for ER l."""
    n = layout.n_vars
    socs = []
    plus = grams.er_plus[l]
    row_scale = max(_spectral_scale(plus, budget.p_tx),
                    _spectral_scale(grams.er_jam_plus[l], budget.p_jam)
                    if layout.include_jammer else 0.0)
    if layout.include_an:
        socs.append(_quad_cone(f"leak{l}_z", plus, layout.sl("z"),
                               layout.index["u_leak_z"].start + l, n,
                               cfg.psd_tol, row_scale))
    if layout.include_jammer:
        socs.append(_quad_cone(f"leak{l}_q", grams.er_jam_plus[l], layout.sl("q"),
                               layout.index["u_leak_q"].start + l, n, cfg.psd_tol,
                               row_scale))
    for k in k_list:
        socs.append(_quad_cone(f"leak{l}_w{k}", plus, layout.sl(f"w{k}"),
                               layout.index[f"u_leak_w{l}"].start + k, n,
                               cfg.psd_tol, row_scale))
    return socs


def build_er_leakage_constraint(l: int, k: int, grams: GramSet,
                                noise: NoiseAndEfficiency, exp: ExpansionPoint,
                                layout: VarLayout, cfg: BuildConfig) -> LinBlock:
    """Leakage surrogate row for the (ER l, CR k) pair; the left-side forms
    are referenced through the shared auxiliaries."""
    if exp.r2 <= 0.0:
        raise ExpansionError("r~2 must be > 0")
    n = layout.n_vars
    i_r2 = layout.index["r2"].start
    sigma2 = float(noise.sigma2_er[l])
    row = np.zeros(n)
    # sigma^2 * (2/r~2 - r2/r~2^2)
    row[i_r2] -= sigma2 / exp.r2 ** 2
    h = 2.0 * sigma2 / exp.r2
    if layout.include_an:
        sur_z = taylor_qol(grams.er_minus[l], 0.0, exp.z, exp.r2)
        rz, cz = sur_z.rows(layout.sl("z"), i_r2, n)
        row += rz
        h += cz
        row[layout.index["u_leak_z"].start + l] -= 1.0
    if layout.include_jammer:
        sur_q = taylor_qol(grams.er_jam_minus[l], 0.0, exp.q, exp.r2)
        rq, cq = sur_q.rows(layout.sl("q"), i_r2, n)
        row += rq
        h += cq
        row[layout.index["u_leak_q"].start + l] -= 1.0
    row[layout.index[f"u_leak_w{l}"].start + k] -= 1.0
    h -= sigma2
    return LinBlock(name=f"leak{l}_{k}_row", g=row, h=h)


def _harvest_affine(A_cr, A_jam, exp: ExpansionPoint, layout: VarLayout):
    """Affine lower bound of sum_j w^H A w + z^H A z + q^H B q linearized at
    the expansion point: sum of (2Re{v~^H A v} - v~^H A v~) terms."""
    n = layout.n_vars
    row = np.zeros(n)
    const = 0.0
    for j in range(layout.K):
        a = A_cr @ exp.w[j]
        row += _row_2re(a, layout.sl(f"w{j}"), n)
        const -= _quad(exp.w[j], A_cr)
    if layout.include_an:
        a = A_cr @ exp.z
        row += _row_2re(a, layout.sl("z"), n)
        const -= _quad(exp.z, A_cr)
    if layout.include_jammer:
        a = A_jam @ exp.q
        row += _row_2re(a, layout.sl("q"), n)
        const -= _quad(exp.q, A_jam)
    return row, const


def build_eh_cr_constraint(k: int, grams: GramSet, noise: NoiseAndEfficiency,
                           budget: PowerBudget, exp: ExpansionPoint,
                           layout: VarLayout, cfg: BuildConfig) -> SocBlock:
    """CR harvest floor as ||[2 e_s/sqrt(eta), a_k + rho - 1]|| <= a_k - rho + 1
    with a_k the linearized harvested sum and e_s the sqrt expansion."""
    if exp.e_cr < cfg.es_floor:
        raise ExpansionError(f"E~_s must be >= {cfg.es_floor}")
    n = layout.n_vars
    a_row, a_const = _harvest_affine(grams.cr_minus[k], grams.cr_jam_plus[k], exp, layout)
    a_const += float(noise.sigma2_cr[k])
    # e_s = sqrt(E~) + (E_s - E~)/(2 sqrt(E~))
    sq = math.sqrt(exp.e_cr)
    es_coeff = 1.0 / (2.0 * sq)
    es_const = 0.5 * sq
    eta = float(noise.eta_cr[k])
    i_es = layout.index["e_floor_cr"].start
    i_rho = layout.index["rho"].start + k
    # stated in units of the harvested-sum scale c_a (cone-set invariant)
    c_a = max(_spectral_scale(grams.cr[k], budget.p_tx) + float(noise.sigma2_cr[k]),
              _SCALE_FLOOR_REL * _reference_scale(grams, budget))
    A = np.zeros((2, n))
    b = np.zeros(2)
    scale = 2.0 / math.sqrt(eta * c_a)
    A[0, i_es] = scale * es_coeff
    b[0] = scale * es_const
    A[1] = a_row / c_a
    A[1, i_rho] += 1.0
    b[1] = a_const / c_a - 1.0
    c = a_row / c_a
    c[i_rho] -= 1.0
    d = a_const / c_a + 1.0
    return SocBlock(name=f"eh_cr{k}", A=A, b=b, c=c, d=d)


def build_eh_er_constraint(l: int, ne: int, grams: GramSet, noise: NoiseAndEfficiency,
                           exp: ExpansionPoint, layout: VarLayout,
                           cfg: BuildConfig) -> LinBlock:
    """ER harvest floor: linearized harvested sum >= E_floor_er/eta - NE*sigma^2."""
    jam_gram = grams.er_jam_plus[l] if cfg.paper_literal_signs else grams.er_jam_minus[l]
    row, const = _harvest_affine(grams.er_minus[l], jam_gram, exp, layout)
    eta = float(noise.eta_er[l])
    row[layout.index["e_floor_er"].start] -= 1.0 / eta
    return LinBlock(name=f"eh_er{l}", g=row,
                    h=const + float(noise.sigma2_er[l]) * ne)


def build_power_constraints(budget: PowerBudget, layout: VarLayout):
    """Exact cone encodings of the transmit and jammer power budgets."""
    if budget.p_tx <= 0 or budget.p_jam <= 0:
        raise BuildError("power budgets must be > 0")
    n = layout.n_vars
    blocks = []
    coords = []
    for k in range(layout.K):
        coords.extend(range(layout.index[f"w{k}"].start, layout.index[f"w{k}"].stop))
    if layout.include_an:
        coords.extend(range(layout.index["z"].start, layout.index["z"].stop))
    A = np.zeros((len(coords), n))
    for i, cidx in enumerate(coords):
        A[i, cidx] = 1.0
    blocks.append(SocBlock(name="power_tx", A=A, b=np.zeros(len(coords)),
                           c=np.zeros(n), d=math.sqrt(budget.p_tx)))
    if layout.include_jammer:
        qr = layout.index["q"]
        Aq = np.zeros((len(qr), n))
        for i, cidx in enumerate(qr):
            Aq[i, cidx] = 1.0
        blocks.append(SocBlock(name="power_jam", A=Aq, b=np.zeros(len(qr)),
                               c=np.zeros(n), d=math.sqrt(budget.p_jam)))
    return blocks


def _box_rows(layout: VarLayout, cfg: BuildConfig):
    n = layout.n_vars
    rows = []

    def bound(name, coord, coeff, const):
        g = np.zeros(n)
        g[coord] = coeff
        rows.append(LinBlock(name=name, g=g, h=const))

    for k in range(layout.K):
        i = layout.index["rho"].start + k
        bound(f"rho{k}_lo", i, 1.0, -cfg.rho_floor)
        bound(f"rho{k}_hi", i, -1.0, 1.0)
    bound("r1_lo", layout.index["r1"].start, 1.0, -(1.0 + cfg.r1_floor))
    bound("r2_lo", layout.index["r2"].start, 1.0, -cfg.r2_floor)
    bound("r2_hi", layout.index["r2"].start, -1.0, 1.0)
    bound("e_floor_cr_lo", layout.index["e_floor_cr"].start, 1.0, 0.0)
    bound("e_floor_er_lo", layout.index["e_floor_er"].start, 1.0, 0.0)
    return rows


def _min_eig(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (A + A.conj().T))[0])


def assemble_socp(ch: ChannelSet, rb, grams: GramSet, noise: NoiseAndEfficiency,
                  budget: PowerBudget, exp: ExpansionPoint,
                  cfg: BuildConfig = BuildConfig()) -> ConicProblem:
    """Assemble the full convex subproblem around the expansion point.

    Deterministic: identical inputs produce identical variable and constraint
    ordering.  ``psd_flags`` records whether each minus-shifted Gram used in a
    linearized lower bound is PSD (they are indefinite whenever the matching
    error radius is positive).
    """
    dims = ch.dims
    layout = make_layout(dims, cfg)
    n = layout.n_vars

    if not cfg.include_an and np.linalg.norm(exp.z) > 0:
        raise BuildError("AN disabled but expansion point has nonzero z")
    if not cfg.include_jammer and np.linalg.norm(exp.q) > 0:
        raise BuildError("jammer disabled but expansion point has nonzero q")

    objective = np.zeros(n)
    objective[layout.index["e_floor_cr"].start] = budget.tau
    objective[layout.index["e_floor_er"].start] = 1.0 - budget.tau

    socs = [build_rate_soc(budget.rate_target, layout)]
    nonneg = []
    for k in range(dims.K):
        cones, rows = build_cr_sinr_constraint(k, grams, noise, budget, exp, layout, cfg)
        socs.extend(cones)
        nonneg.extend(rows)
    for l in range(dims.L):
        socs.extend(build_er_leakage_cones(l, range(dims.K), grams, budget, exp, layout, cfg))
    for l in range(dims.L):
        for k in range(dims.K):
            nonneg.append(build_er_leakage_constraint(l, k, grams, noise, exp, layout, cfg))
    for k in range(dims.K):
        socs.append(build_eh_cr_constraint(k, grams, noise, budget, exp, layout, cfg))
    for l in range(dims.L):
        nonneg.append(build_eh_er_constraint(l, dims.NE, grams, noise, exp, layout, cfg))
    socs.extend(build_power_constraints(budget, layout))
    nonneg.extend(_box_rows(layout, cfg))
    nonneg = [_normalize_row(blk) for blk in nonneg]

    psd_flags = {}
    for k in range(dims.K):
        psd_flags[f"cr_minus_{k}"] = _min_eig(grams.cr_minus[k]) >= -cfg.psd_tol
    for l in range(dims.L):
        psd_flags[f"er_minus_{l}"] = _min_eig(grams.er_minus[l]) >= -cfg.psd_tol
        psd_flags[f"er_jam_minus_{l}"] = _min_eig(grams.er_jam_minus[l]) >= -cfg.psd_tol

    return ConicProblem(n_vars=n, objective=objective, socs=socs, nonneg=nonneg,
                        var_index=dict(layout.index), psd_flags=psd_flags)


# ---------------------------------------------------------------------------
# standard-form text dump


def _fmt(x: float) -> str:
    return repr(float(x))


def format_socp(p: ConicProblem) -> str:
    """Plain-text standard form: objective vector, variable map, cone blocks,
    nonnegative rows.  Stable ordering; exact float round trip."""
    lines = ["# swiptbeam socp standard form v1", f"nvars {p.n_vars}",
             "objective " + " ".join(_fmt(v) for v in p.objective)]
    for name, rng in p.var_index.items():
        lines.append(f"var {name} {rng.start} {rng.stop}")
    for blk in p.socs:
        lines.append(f"soc {blk.name} {blk.A.shape[0]}")
        for row in blk.A:
            lines.append("A " + " ".join(_fmt(v) for v in row))
        lines.append("b " + " ".join(_fmt(v) for v in blk.b))
        lines.append("c " + " ".join(_fmt(v) for v in blk.c))
        lines.append(f"d {_fmt(blk.d)}")
    for blk in p.nonneg:
        lines.append(f"nonneg {blk.name}")
        lines.append("g " + " ".join(_fmt(v) for v in blk.g))
        lines.append(f"h {_fmt(blk.h)}")
    return "\n".join(lines) + "\n"
