"""Configuration-driven experiment runner: sweeps and convergence traces over
(grid point x scheme x seed) cells, with deterministic CSV output and summary
statistics.

Cells are independent; with SWIPTBEAM_WORKERS > 1 they run in a process pool.
Row order in the CSV is canonical (sorted by grid, scheme, seed) regardless of
execution order, and identical spec + seeds reproduce byte-identical files
modulo the timestamped comment line.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import median

import numpy as np

from .baselines import SCHEMES, scheme_channels, solve_scheme
from .metrics import harvested_power_cr, harvested_power_er, save_solution_text
from .scenario import (ScenarioParams, dbm_to_watts, make_scenario,
                       save_scenario_text, watts_to_dbm)
from .spca import SpcaConfig, validate_solution

RESULTS_SCHEMA_VERSION = 1
SWEEP_COLUMNS = ["scheme", "rate_target", "pt_dbm", "pj_dbm", "eps_cr", "eps_er",
                 "seed", "status", "iterations", "objective_w", "objective_dbm",
                 "e_floor_cr_w", "e_floor_er_w", "realized_sum_w",
                 "min_secrecy_slack", "max_residual", "time_s"]
TRACE_COLUMNS = ["scheme", "seed", "iteration", "objective_w", "objective_dbm",
                 "e_floor_cr_w", "e_floor_er_w", "max_residual", "status", "time_s"]

EXPERIMENT_KINDS = ("convergence_trace", "sweep_secrecy_target",
                    "sweep_jammer_power", "custom")


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    schemes: tuple = ("proposed",)
    rate_targets: tuple = ()      # grid; empty means use base value
    pj_dbm_grid: tuple = ()
    eps_cr_grid: tuple = ()
    n_seeds: int = 50
    seed0: int = 1
    base: ScenarioParams = field(default_factory=ScenarioParams)
    output: str = ""
    n_wc_samples: int = 100
    save_solutions: str = ""
    spca: SpcaConfig = field(default_factory=SpcaConfig)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ExperimentError(f"unknown experiment kind {self.kind!r}")
        if self.n_seeds < 1:
            raise ExperimentError("n_seeds must be >= 1")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ExperimentError(f"unknown scheme {s!r}")
        if not self.schemes:
            raise ExperimentError("scheme list must be non-empty")
        if not self.grid_points():
            raise ExperimentError("parameter grid must be non-empty")

    def grid_points(self):
        """Scenario parameter sets for every grid point, canonically ordered."""
        rates = self.rate_targets or (self.base.rate_target,)
        pjs = self.pj_dbm_grid or (self.base.p_jam_dbm,)
        epss = self.eps_cr_grid or (self.base.eps_cr,)
        points = []
        for eps in epss:
            for rs in rates:
                for pj in pjs:
                    points.append(self.base.replace(
                        rate_target=rs, p_jam_dbm=pj, eps_cr=eps, eps_er=eps))
        return points


def _dbm_or_ninf(p_w: float) -> float:
    return watts_to_dbm(p_w) if p_w > 0 else -math.inf


def _run_sweep_cell(args):
    params, scheme, seed, cfg, n_wc_samples, save_dir = args
    scn = make_scenario(seed, params)
    t0 = time.perf_counter()
    res = solve_scheme(scheme, scn, cfg, seed)
    wall = time.perf_counter() - t0
    row = {
        "scheme": scheme, "rate_target": params.rate_target,
        "pt_dbm": params.p_tx_dbm, "pj_dbm": params.p_jam_dbm,
        "eps_cr": params.eps_cr, "eps_er": params.eps_er,
        "seed": seed, "status": res.status,
        "iterations": len(res.trace.records),
        "objective_w": float("nan"), "objective_dbm": float("nan"),
        "e_floor_cr_w": float("nan"), "e_floor_er_w": float("nan"),
        "realized_sum_w": float("nan"), "min_secrecy_slack": float("nan"),
        "max_residual": float("nan"), "time_s": wall,
    }
    if res.solution is not None:
        _, eval_ch = scheme_channels(scheme, scn)
        val = validate_solution(res, eval_ch, scn.noise, scn.budget,
                                n_samples=n_wc_samples, seed=seed)
        sol = res.solution
        realized = sum(harvested_power_cr(sol, eval_ch, scn.noise, k)
                       for k in range(scn.dims.K))
        realized += sum(harvested_power_er(sol, eval_ch, scn.noise, l)
                        for l in range(scn.dims.L))
        row.update({
            "objective_w": res.objective,
            "objective_dbm": _dbm_or_ninf(res.objective),
            "e_floor_cr_w": sol.e_floor_cr, "e_floor_er_w": sol.e_floor_er,
            "realized_sum_w": realized,
            "min_secrecy_slack": val.secrecy_margin,
            "max_residual": val.max_surrogate_residual,
        })
        if save_dir:
            os.makedirs(save_dir, exist_ok=True)
            stem = (f"{scheme}_rs{params.rate_target}_pj{params.p_jam_dbm}"
                    f"_eps{params.eps_cr}_seed{seed}")
            with open(os.path.join(save_dir, stem + ".scenario"), "w") as fh:
                fh.write(save_scenario_text(scn))
            with open(os.path.join(save_dir, stem + ".solution"), "w") as fh:
                fh.write(save_solution_text(sol))
    return row


def _run_trace_cell(args):
    params, scheme, seed, cfg, _n_wc, _save = args
    scn = make_scenario(seed, params)
    res = solve_scheme(scheme, scn, cfg, seed)
    rows = []
    for rec in res.trace.records:
        rows.append({
            "scheme": scheme, "seed": seed, "iteration": rec.iteration,
            "objective_w": rec.objective,
            "objective_dbm": _dbm_or_ninf(rec.objective),
            "e_floor_cr_w": rec.e_floor_cr, "e_floor_er_w": rec.e_floor_er,
            "max_residual": rec.max_residual, "status": rec.status,
            "time_s": rec.wall_time,
        })
    if not rows:
        rows.append({"scheme": scheme, "seed": seed, "iteration": 0,
                     "objective_w": float("nan"), "objective_dbm": float("nan"),
                     "e_floor_cr_w": float("nan"), "e_floor_er_w": float("nan"),
                     "max_residual": float("nan"), "status": res.status,
                     "time_s": 0.0})
    return rows


def _n_workers() -> int:
    raw = os.environ.get("SWIPTBEAM_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_experiment(spec: ExperimentSpec):
    """Run every (grid point x scheme x seed) cell and return the result rows
    in canonical order; writes the CSV when an output path is configured.
    Per-cell failures become rows with a failure status and the run continues.
    """
    cells = []
    for params in spec.grid_points():
        for scheme in spec.schemes:
            for i in range(spec.n_seeds):
                cells.append((params, scheme, spec.seed0 + i, spec.spca,
                              spec.n_wc_samples, spec.save_solutions))
    runner = _run_trace_cell if spec.kind == "convergence_trace" else _run_sweep_cell
    workers = _n_workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(runner, cells, chunksize=1))
    else:
        out = [runner(c) for c in cells]
    if spec.kind == "convergence_trace":
        rows = [r for cell_rows in out for r in cell_rows]
        rows.sort(key=lambda r: (r["scheme"], r["seed"], r["iteration"]))
        columns = TRACE_COLUMNS
    else:
        rows = out
        rows.sort(key=lambda r: (r["eps_cr"], r["rate_target"], r["pj_dbm"],
                                 r["scheme"], r["seed"]))
        columns = SWEEP_COLUMNS
    if spec.output:
        write_results_csv(spec.output, rows, columns, spec.kind)
    return rows


def format_results_csv(rows, columns, kind: str, timestamp: str = "") -> str:
    buf = io.StringIO()
    buf.write(f"# swiptbeam results schema={RESULTS_SCHEMA_VERSION} kind={kind}\n")
    if timestamp:
        buf.write(f"# generated {timestamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        out = []
        for c in columns:
            v = row[c]
            if isinstance(v, (float, np.floating)):
                out.append(repr(float(v)))
            else:
                out.append(v)
        writer.writerow(out)
    return buf.getvalue()


def write_results_csv(path: str, rows, columns, kind: str):
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(path, "w") as fh:
        fh.write(format_results_csv(rows, columns, kind, timestamp=stamp))


def read_results_csv(path: str):
    """Rows (with numeric fields parsed) and the experiment kind."""
    kind = "custom"
    with open(path) as fh:
        lines = fh.readlines()
    body = []
    for ln in lines:
        if ln.startswith("#"):
            if "kind=" in ln:
                kind = ln.strip().split("kind=")[1].split()[0]
            continue
        body.append(ln)
    reader = csv.DictReader(io.StringIO("".join(body)))
    rows = []
    for raw in reader:
        row = {}
        for key, val in raw.items():
            if key in ("scheme", "status"):
                row[key] = val
            elif key in ("seed", "iteration"):
                row[key] = int(val)
            else:
                row[key] = float(val)
        rows.append(row)
    return rows, kind


# ---------------------------------------------------------------------------
# summary


def _grid_key(row):
    return (row["eps_cr"], row["rate_target"], row["pj_dbm"])


def summarize(rows) -> str:
    """Per-scheme medians, dB gaps against `proposed`, monotonicity flags,
    and failure counts."""
    if not rows:
        raise ExperimentError("cannot summarize an empty result table")
    if "iteration" in rows[0]:
        final = {}
        for r in rows:
            key = (r["scheme"], r["seed"])
            if key not in final or r["iteration"] > final[key]["iteration"]:
                final[key] = r
        objs = [r["objective_w"] for r in final.values()
                if not math.isnan(r["objective_w"])]
        iters = [r["iteration"] for r in final.values()]
        lines = ["convergence trace summary",
                 f"  runs: {len(final)}",
                 f"  median final objective: {median(objs):.6e} W" if objs else "  no successful runs",
                 f"  median iterations: {median(iters):.1f}"]
        return "\n".join(lines) + "\n"

    ok = [r for r in rows if not math.isnan(r["objective_w"])]
    failures = len(rows) - len(ok)
    med = {}
    for r in ok:
        med.setdefault((_grid_key(r), r["scheme"]), []).append(r["objective_w"])
    med = {k: median(v) for k, v in med.items()}
    grid_keys = sorted({_grid_key(r) for r in rows})
    schemes = sorted({r["scheme"] for r in rows})

    lines = [f"sweep summary ({len(rows)} rows, {failures} failures)"]
    lines.append("  median objective (dBm) per grid point:")
    for gk in grid_keys:
        eps, rs, pj = gk
        cells = []
        for s in schemes:
            m = med.get((gk, s))
            cells.append(f"{s}={_dbm_or_ninf(m):+.2f}" if m is not None else f"{s}=n/a")
        lines.append(f"    eps={eps} Rs={rs} Pj={pj} dBm: " + "  ".join(cells))
    if "proposed" in schemes:
        lines.append("  gap to proposed (dB, positive = proposed higher):")
        for gk in grid_keys:
            base = med.get((gk, "proposed"))
            if base is None or base <= 0:
                continue
            eps, rs, pj = gk
            gaps = []
            for s in schemes:
                if s == "proposed":
                    continue
                m = med.get((gk, s))
                if m is not None and m > 0:
                    gaps.append(f"{s}={10.0 * math.log10(base / m):+.2f}")
            if gaps:
                lines.append(f"    eps={eps} Rs={rs} Pj={pj} dBm: " + "  ".join(gaps))
    # monotonicity flags per scheme
    for s in schemes:
        by_rs = {}
        by_pj = {}
        for gk in grid_keys:
            m = med.get((gk, s))
            if m is None:
                continue
            eps, rs, pj = gk
            by_rs.setdefault((eps, pj), []).append((rs, m))
            by_pj.setdefault((eps, rs), []).append((pj, m))
        dec = all(all(a[1] >= b[1] - 1e-15 for a, b in zip(v, v[1:]))
                  for v in by_rs.values() if len(v) > 1)
        inc = all(all(a[1] <= b[1] + 1e-15 for a, b in zip(v, v[1:]))
                  for v in by_pj.values() if len(v) > 1)
        flags = []
        if any(len(v) > 1 for v in by_rs.values()):
            flags.append(f"non-increasing in Rs: {'yes' if dec else 'NO'}")
        if any(len(v) > 1 for v in by_pj.values()):
            flags.append(f"non-decreasing in Pj: {'yes' if inc else 'NO'}")
        if flags:
            lines.append(f"  {s}: " + "; ".join(flags))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# experiment spec files (keyed text, explicit unit suffixes)


def _parse_power_dbm(value: str, key: str) -> float:
    tok = value.split()
    if len(tok) == 2 and tok[1].lower() == "dbm":
        return float(tok[0])
    if len(tok) == 2 and tok[1].lower() == "w":
        return watts_to_dbm(float(tok[0]))
    raise ExperimentError(f"{key}: expected '<value> dBm' or '<value> W', got {value!r}")


def _parse_distance_m(value: str, key: str):
    tok = value.split()
    if tok and tok[-1].lower() == "m":
        tok = tok[:-1]
    if not tok:
        raise ExperimentError(f"{key}: expected '<values> m', got {value!r}")
    vals = tuple(float(t) for t in tok)
    return vals[0] if len(vals) == 1 else vals


def parse_experiment_file(text: str) -> ExperimentSpec:
    """Parse `key = value` lines ('#' starts a comment) into an ExperimentSpec.
    Power entries carry explicit dBm/W suffixes; grids are space-separated."""
    kv = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ExperimentError(f"bad spec line (expected key = value): {raw!r}")
        key, _, value = line.partition("=")
        kv[key.strip().lower()] = value.strip()

    if "kind" not in kv:
        raise ExperimentError("spec file must set 'kind'")
    kind = kv.pop("kind")
    base = ScenarioParams()
    updates = {}
    spec_kwargs = {"kind": kind}

    def pop(key, default=None):
        return kv.pop(key) if key in kv else default

    if (v := pop("schemes")) is not None:
        spec_kwargs["schemes"] = tuple(v.split())
    if (v := pop("rate_target")) is not None:
        vals = tuple(float(t) for t in v.split())
        updates["rate_target"] = vals[0]
        if len(vals) > 1:
            spec_kwargs["rate_targets"] = vals
    if (v := pop("p_tx")) is not None:
        updates["p_tx_dbm"] = _parse_power_dbm(v, "p_tx")
    if (v := pop("p_jam")) is not None:
        tok = v.split()
        if len(tok) < 2:
            raise ExperimentError(f"p_jam: expected values with unit, got {v!r}")
        unit = tok[-1]
        vals = tuple(_parse_power_dbm(f"{t} {unit}", "p_jam") for t in tok[:-1])
        updates["p_jam_dbm"] = vals[0]
        if len(vals) > 1:
            spec_kwargs["pj_dbm_grid"] = vals
    if (v := pop("eps_cr")) is not None:
        vals = tuple(float(t) for t in v.split())
        updates["eps_cr"] = vals[0]
        if len(vals) > 1:
            spec_kwargs["eps_cr_grid"] = vals
    if (v := pop("eps_er")) is not None:
        updates["eps_er"] = float(v)
    for key, attr in (("k", "K"), ("l", "L"), ("nt", "NT"), ("nj", "NJ"), ("ne", "NE")):
        if (v := pop(key)) is not None:
            updates[attr] = int(v)
    for key in ("d_cr", "f_cr", "d_er", "f_er"):
        if (v := pop(key)) is not None:
            updates[key] = _parse_distance_m(v, key)
    if (v := pop("tau")) is not None:
        updates["tau"] = float(v)
    if (v := pop("radii_relative")) is not None:
        updates["radii_relative"] = v.lower() in ("1", "true", "yes")
    if (v := pop("n_seeds")) is not None:
        spec_kwargs["n_seeds"] = int(v)
    if (v := pop("seed0")) is not None:
        spec_kwargs["seed0"] = int(v)
    if (v := pop("output")) is not None:
        spec_kwargs["output"] = v
    if (v := pop("n_wc_samples")) is not None:
        spec_kwargs["n_wc_samples"] = int(v)
    if (v := pop("save_solutions")) is not None:
        spec_kwargs["save_solutions"] = v
    if kv:
        raise ExperimentError(f"unknown spec keys: {sorted(kv)}")
    spec_kwargs["base"] = base.replace(**updates)
    return ExperimentSpec(**spec_kwargs)
