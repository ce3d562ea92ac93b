"""Solve real-valued SOCPs behind a narrow interface.

The production path hands the prebuilt standard form to Clarabel (an embedded
interior-point conic solver); all solver choice and numerics stay inside this
module.  Solutions are never trusted on solver say-so alone: an independent
residual checker (pure numpy, shared with the tests) replays every constraint
before a solve is reported optimal.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import sparse

import clarabel

from .socp_builder import ConicProblem, LinBlock, SocBlock

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"
ITERATION_LIMIT = "iteration_limit"


class BackendError(ValueError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    rel_gap_tol: float = 1e-8
    max_iters: int = 200


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray
    objective: float
    solve_time: float
    solver_iterations: int


@dataclass
class ResidualReport:
    """Signed feasibility residuals (<= 0 means satisfied)."""

    names: list
    residuals: np.ndarray
    max_residual: float
    objective: float

    def worst(self, n: int = 3):
        order = np.argsort(self.residuals)[::-1][:n]
        return [(self.names[i], float(self.residuals[i])) for i in order]


def check_solution(p: ConicProblem, x: np.ndarray) -> ResidualReport:
    """Replay every constraint at x; independent of any solver state."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n_vars,):
        raise BackendError(f"x has shape {x.shape}, expected ({p.n_vars},)")
    names = []
    residuals = []
    for blk in p.socs:
        lhs = float(np.linalg.norm(blk.A @ x + blk.b))
        rhs = float(blk.c @ x + blk.d)
        names.append(blk.name)
        residuals.append(lhs - rhs)
    for blk in p.nonneg:
        names.append(blk.name)
        residuals.append(-(float(blk.g @ x) + blk.h))
    residuals = np.array(residuals) if residuals else np.zeros(0)
    max_res = float(residuals.max()) if residuals.size else 0.0
    return ResidualReport(names=names, residuals=residuals, max_residual=max_res,
                          objective=float(p.objective @ x))


def _clarabel_data(p: ConicProblem):
    """Stack nonneg rows then cone blocks into Ax + s = b, s in K.
    Returns the dense stack plus the row grouping (scaling a whole SOC block
    by a positive factor preserves the cone; individual rows only for the
    nonnegative block)."""
    rows = []
    rhs = []
    cones = []
    groups = []
    pos = 0
    if p.nonneg:
        for blk in p.nonneg:
            rows.append(-blk.g)
            rhs.append(blk.h)
            groups.append(range(pos, pos + 1))
            pos += 1
        cones.append(clarabel.NonnegativeConeT(len(p.nonneg)))
    for blk in p.socs:
        m = blk.A.shape[0] + 1
        rows.append(-blk.c)
        rhs.append(blk.d)
        rows.append(-blk.A)
        rhs.append(blk.b)
        cones.append(clarabel.SecondOrderConeT(m))
        groups.append(range(pos, pos + m))
        pos += m
    A = np.vstack([np.atleast_2d(r) for r in rows])
    b = np.concatenate([np.atleast_1d(r) for r in rhs])
    return A, b, cones, groups


def _ruiz_equilibrate(A: np.ndarray, b: np.ndarray, groups, iters: int = 8):
    """Block-respecting Ruiz scaling: returns (row scale r, column scale d)
    with r uniform within each cone block, iterated toward unit max-norms."""
    m, n = A.shape
    r = np.ones(m)
    d = np.ones(n)
    for _ in range(iters):
        As = (A * r[:, None]) * d[None, :]
        col = np.sqrt(np.abs(As).max(axis=0))
        col[col == 0] = 1.0
        d /= col
        As = (A * r[:, None]) * d[None, :]
        for g in groups:
            gi = list(g)
            blk_max = max(float(np.abs(As[gi]).max()),
                          float(np.abs(b[gi] * r[gi]).max()))
            if blk_max > 0:
                r[gi] /= math.sqrt(blk_max)
    return r, d


# raw solver outcomes that still carry a candidate iterate worth certifying
_CANDIDATE_STATUSES = {"Solved", "AlmostSolved", "InsufficientProgress",
                       "MaxIterations", "MaxTime"}
_HARD_STATUS_MAP = {
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
    "MaxIterations": ITERATION_LIMIT,
    "MaxTime": ITERATION_LIMIT,
}


def _solve_once(p: ConicProblem, opts: SolverOptions, tighten: float):
    A, b, cones, groups = _clarabel_data(p)
    # outer equilibration: Clarabel's internal scaling is capped and the
    # physical data spans many decades
    r, d = _ruiz_equilibrate(A, b, groups)
    As = sparse.csc_matrix((A * r[:, None]) * d[None, :])
    bs = b * r
    q = -(p.objective * d)
    qn = float(np.abs(q).max())
    if qn > 0:
        q = q / qn
    P = sparse.csc_matrix((p.n_vars, p.n_vars))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = opts.max_iters
    settings.tol_feas = min(opts.feas_tol, 1e-9) * tighten
    settings.tol_gap_abs = min(opts.rel_gap_tol, 1e-9) * tighten
    settings.tol_gap_rel = min(opts.rel_gap_tol, 1e-9) * tighten
    solver = clarabel.DefaultSolver(P, q, As, bs, cones, settings)
    t0 = time.perf_counter()
    result = solver.solve()
    wall = time.perf_counter() - t0
    x = np.asarray(result.x, dtype=float)
    ok = x.shape == (p.n_vars,) and bool(np.all(np.isfinite(x)))
    if ok:
        x = x * d
    scale_back = qn if qn > 0 else 1.0
    return (str(result.status), x if ok else None,
            float(result.obj_val) * scale_back,
            float(result.obj_val_dual) * scale_back,
            wall, int(result.iterations))


def _certify(p: ConicProblem, opts: SolverOptions, x, primal, dual) -> bool:
    """Accept an iterate as optimal on our own evidence: independent primal
    residuals within feas_tol and primal-dual gap within rel_gap_tol
    (normalized by max(1, |objective|))."""
    if x is None or not (np.isfinite(primal) and np.isfinite(dual)):
        return False
    if check_solution(p, x).max_residual > opts.feas_tol:
        return False
    return abs(primal - dual) <= opts.rel_gap_tol * max(1.0, abs(primal))


def solve(p: ConicProblem, opts: SolverOptions = SolverOptions()) -> ConicSolution:
    """Solve the SOCP; 'optimal' is only reported when the independent checker
    confirms feasibility and the primal-dual gap is closed.  Never raises on
    solver divergence (returns a failure status instead)."""
    for blk in p.socs:
        if blk.A.shape[1] != p.n_vars or blk.c.shape != (p.n_vars,):
            raise BackendError(f"SOC block {blk.name} has inconsistent dimensions")
    for blk in p.nonneg:
        if blk.g.shape != (p.n_vars,):
            raise BackendError(f"row {blk.name} has inconsistent dimensions")

    last = None
    for tighten in (1.0, 1e-2):
        raw_status, x, primal, dual, wall, iters = _solve_once(p, opts, tighten)
        if raw_status in _CANDIDATE_STATUSES and _certify(p, opts, x, primal, dual):
            return ConicSolution(status=OPTIMAL, x=x,
                                 objective=float(p.objective @ x),
                                 solve_time=wall, solver_iterations=iters)
        if raw_status in (_HARD_STATUS_MAP.keys() - {"MaxIterations", "MaxTime"}):
            status = _HARD_STATUS_MAP[raw_status]
            xx = x if x is not None else np.full(p.n_vars, np.nan)
            return ConicSolution(status=status, x=xx, objective=float("nan"),
                                 solve_time=wall, solver_iterations=iters)
        status = _HARD_STATUS_MAP.get(raw_status, NUMERICAL_FAILURE)
        xx = x if x is not None else np.full(p.n_vars, np.nan)
        last = ConicSolution(status=status, x=xx,
                             objective=float(p.objective @ xx) if x is not None else float("nan"),
                             solve_time=wall, solver_iterations=iters)
    return last


# ---------------------------------------------------------------------------
# standard-form text reader (matches socp_builder.format_socp)


def read_socp(text: str) -> ConicProblem:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    it = iter(lines)

    def floats(s: str) -> np.ndarray:
        return np.array([float(t) for t in s.split()], dtype=float)

    head = next(it).split()
    if head[0] != "nvars":
        raise BackendError("dump must start with 'nvars'")
    n = int(head[1])
    obj_line = next(it)
    if not obj_line.startswith("objective "):
        raise BackendError("missing objective line")
    objective = floats(obj_line[len("objective "):])
    var_index = {}
    socs = []
    nonneg = []
    for line in it:
        tok = line.split(None, 2)
        if tok[0] == "var":
            name, start, stop = line.split()[1:4]
            var_index[name] = range(int(start), int(stop))
        elif tok[0] == "soc":
            name = tok[1]
            m = int(tok[2])
            A = np.vstack([floats(next(it)[2:]) for _ in range(m)]) if m else np.zeros((0, n))
            b = floats(next(it)[2:])
            c = floats(next(it)[2:])
            d = float(next(it).split()[1])
            socs.append(SocBlock(name=name, A=A, b=b, c=c, d=d))
        elif tok[0] == "nonneg":
            name = tok[1]
            g = floats(next(it)[2:])
            h = float(next(it).split()[1])
            nonneg.append(LinBlock(name=name, g=g, h=h))
        else:
            raise BackendError(f"unknown dump line: {line!r}")
    return ConicProblem(n_vars=n, objective=objective, socs=socs,
                        nonneg=nonneg, var_index=var_index)
