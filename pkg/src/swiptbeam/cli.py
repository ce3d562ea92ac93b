"""Command-line interface.

Subcommands: `run` (execute an experiment spec file), `summarize` (report on a
results CSV), `validate` (re-check a stored scenario/solution pair), and
`dump-socp` (write the standard-form text of one subproblem).

Exit codes: 0 success, 1 configuration error, 2 runtime failures present.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .conic_backend import check_solution
from .experiments import (ExperimentError, parse_experiment_file,
                          read_results_csv, run_experiment, summarize)
from .metrics import load_solution_text
from .robust_bounds import build_gram_set, compute_robust_bounds
from .scenario import ScenarioError, load_scenario_text, make_scenario
from .socp_builder import assemble_socp, format_socp
from .spca import (InitializationError, SpcaConfig, find_initial_point,
                   revalidate_solution, run_spca)


def _cmd_run(args) -> int:
    try:
        with open(args.spec) as fh:
            spec = parse_experiment_file(fh.read())
    except (OSError, ExperimentError, ScenarioError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.output:
        spec = replace(spec, output=args.output)
    if not spec.output:
        print("config error: no output path (spec 'output' key or --output)",
              file=sys.stderr)
        return 1
    rows = run_experiment(spec)
    n_fail = sum(1 for r in rows
                 if r["status"] not in ("converged", "iteration_cap", "optimal"))
    print(f"wrote {len(rows)} rows to {spec.output} ({n_fail} failure rows)")
    return 2 if n_fail else 0


def _cmd_summarize(args) -> int:
    try:
        rows, _kind = read_results_csv(args.results)
        print(summarize(rows), end="")
    except (OSError, ExperimentError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return 0


def _cmd_validate(args) -> int:
    try:
        with open(args.scenario) as fh:
            scn = load_scenario_text(fh.read())
        with open(args.solution) as fh:
            sol = load_solution_text(fh.read())
    except (OSError, ScenarioError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    rep = revalidate_solution(sol, scn.channels, scn.noise, scn.budget,
                              n_samples=args.samples, seed=args.seed)
    print(f"max surrogate residual : {rep.max_surrogate_residual:.3e}")
    print(f"tx power residual      : {rep.power_residual_tx:.3e} W")
    print(f"jammer power residual  : {rep.power_residual_jam:.3e} W")
    print(f"rate-slack margin      : {rep.r_slack_margin:.3e}")
    print(f"secrecy margin (trace) : {rep.secrecy_margin:.6f} bit/s/Hz")
    print(f"CR harvest floor margin: {rep.floor_margin_cr:.3e} W")
    print(f"ER harvest floor margin: {rep.floor_margin_er:.3e} W")
    print(f"shifted Grams all PSD  : {rep.all_psd}")
    tol = args.tolerance
    bad = (rep.power_residual_tx > tol or rep.power_residual_jam > tol
           or rep.secrecy_margin < -1e-6 or rep.floor_margin_cr < -tol
           or rep.floor_margin_er < -tol)
    return 2 if bad else 0


def _cmd_dump_socp(args) -> int:
    try:
        with open(args.spec) as fh:
            spec = parse_experiment_file(fh.read())
        scn = make_scenario(args.seed, spec.base)
    except (OSError, ExperimentError, ScenarioError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    cfg = SpcaConfig()
    try:
        if args.iteration == 0:
            rb = compute_robust_bounds(scn.channels)
            grams = build_gram_set(scn.channels, rb)
            exp = find_initial_point(scn.channels, rb, scn.noise, scn.budget,
                                     cfg, args.seed)
            problem = assemble_socp(scn.channels, rb, grams, scn.noise,
                                    scn.budget, exp, cfg.build)
        else:
            short = SpcaConfig(max_outer_iters=args.iteration, build=cfg.build)
            res = run_spca(scn.channels, scn.noise, scn.budget, short, args.seed)
            if res.problem is None:
                print(f"run failed before iteration {args.iteration}: {res.status}",
                      file=sys.stderr)
                return 2
            problem = res.problem
    except InitializationError as exc:
        print(f"initialization failed: {exc}", file=sys.stderr)
        return 2
    text = format_socp(problem)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
        print(f"wrote {args.output} ({problem.n_vars} vars, "
              f"{len(problem.socs)} cones, {len(problem.nonneg)} rows)")
    else:
        print(text, end="")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="swiptbeam",
        description="Robust max-min harvested-energy beamforming experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment spec file")
    p_run.add_argument("spec")
    p_run.add_argument("-o", "--output", default="", help="override output CSV path")
    p_run.set_defaults(fn=_cmd_run)

    p_sum = sub.add_parser("summarize", help="summarize a results CSV")
    p_sum.add_argument("results")
    p_sum.set_defaults(fn=_cmd_summarize)

    p_val = sub.add_parser("validate", help="re-check a stored solution")
    p_val.add_argument("scenario")
    p_val.add_argument("solution")
    p_val.add_argument("--samples", type=int, default=200)
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--tolerance", type=float, default=1e-8)
    p_val.set_defaults(fn=_cmd_validate)

    p_dump = sub.add_parser("dump-socp", help="dump one subproblem in standard form")
    p_dump.add_argument("spec")
    p_dump.add_argument("--seed", type=int, default=1)
    p_dump.add_argument("--iteration", type=int, default=0,
                        help="0 = at the initial point, n = after n solves")
    p_dump.add_argument("-o", "--output", default="")
    p_dump.set_defaults(fn=_cmd_dump_socp)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
