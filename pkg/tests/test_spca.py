import numpy as np
import pytest

from swiptbeam import (ScenarioParams, SpcaConfig, compute_robust_bounds,
                       find_initial_point, make_scenario, revalidate_solution,
                       run_spca, validate_solution)
from swiptbeam.conic_backend import check_solution
from swiptbeam.robust_bounds import build_gram_set
from swiptbeam.socp_builder import assemble_socp
from swiptbeam.spca import (TRACE_CSV_HEADER, InitializationError,
                            IterationTrace, _embed_candidate)
from swiptbeam import conic_backend


def run_desk(desk_params, seed=1, **over):
    scn = make_scenario(seed, desk_params.replace(**over))
    return scn, run_spca(scn.channels, scn.noise, scn.budget, SpcaConfig(), seed=seed)


class TestInitialPoint:
    def test_deterministic(self, desk_params):
        scn = make_scenario(1, desk_params)
        rb = compute_robust_bounds(scn.channels)
        a = find_initial_point(scn.channels, rb, scn.noise, scn.budget, SpcaConfig(), 1)
        b = find_initial_point(scn.channels, rb, scn.noise, scn.budget, SpcaConfig(), 1)
        assert all(np.array_equal(x, y) for x, y in zip(a.w, b.w))
        assert np.array_equal(a.z, b.z) and np.array_equal(a.q, b.q)
        assert (a.r1, a.r2, a.e_cr) == (b.r1, b.r2, b.e_cr)

    def test_point_strictly_feasible_for_own_subproblem(self, desk_params):
        scn = make_scenario(2, desk_params)
        rb = compute_robust_bounds(scn.channels)
        grams = build_gram_set(scn.channels, rb)
        cfg = SpcaConfig()
        exp = find_initial_point(scn.channels, rb, scn.noise, scn.budget, cfg, 2)
        problem = assemble_socp(scn.channels, rb, grams, scn.noise, scn.budget,
                                exp, cfg.build)
        sol = conic_backend.solve(problem)
        assert sol.status == conic_backend.OPTIMAL

    def test_zero_radius_high_power_start_rate(self):
        # simulation-default geometry, perfect CSI, generous budget: the
        # starting strategy must succeed for >= 95% of seeds
        params = ScenarioParams(eps_cr=0.0, eps_er=0.0, p_tx_dbm=50.0,
                                p_jam_dbm=40.0, rate_target=0.5)
        cfg = SpcaConfig()
        ok = 0
        for seed in range(100):
            scn = make_scenario(seed, params)
            rb = compute_robust_bounds(scn.channels)
            try:
                find_initial_point(scn.channels, rb, scn.noise, scn.budget, cfg, seed)
                ok += 1
            except InitializationError:
                pass
        assert ok >= 95

    def test_failure_is_explicit(self, desk_params):
        # a plainly unreachable secrecy target
        scn = make_scenario(3, desk_params.replace(rate_target=30.0))
        rb = compute_robust_bounds(scn.channels)
        with pytest.raises(InitializationError):
            find_initial_point(scn.channels, rb, scn.noise, scn.budget, SpcaConfig(), 3)


class TestRunSpca:
    def test_converges_at_desk_scale(self, desk_params):
        scn, res = run_desk(desk_params, seed=1)
        assert res.status == "converged"
        assert res.solution is not None
        assert len(res.trace.records) <= SpcaConfig().max_outer_iters

    def test_monotone_ascent(self, desk_params):
        for seed in range(1, 9):
            _, res = run_desk(desk_params, seed=seed)
            obj = res.trace.objectives()
            assert np.all(np.diff(obj) >= -1e-8)

    def test_deterministic(self, desk_params):
        _, a = run_desk(desk_params, seed=4)
        _, b = run_desk(desk_params, seed=4)
        assert a.objective == b.objective
        assert np.array_equal(a.x, b.x)

    def test_tau_one_objective_is_cr_floor(self, desk_params):
        scn, res = run_desk(desk_params, seed=5, tau=1.0)
        assert res.status == "converged"
        assert res.objective == pytest.approx(res.solution.e_floor_cr, rel=1e-12)

    def test_budget_compliance(self, desk_params):
        for seed in (1, 2, 3):
            scn, res = run_desk(desk_params, seed=seed)
            assert res.solution.tx_power() <= scn.budget.p_tx + 1e-8
            assert res.solution.jam_power() <= scn.budget.p_jam + 1e-8

    def test_rate_slack_consistency(self, desk_params):
        for seed in (1, 2, 3):
            scn, res = run_desk(desk_params, seed=seed)
            sol = res.solution
            assert sol.r1 * sol.r2 >= 2.0 ** scn.budget.rate_target - 1e-6

    def test_fixed_point_property(self, desk_params):
        # re-assembling at the final expansion point and solving moves the
        # objective by less than the stopping tolerance (relative)
        scn, res = run_desk(desk_params, seed=6)
        assert res.status == "converged"
        rb = compute_robust_bounds(scn.channels)
        grams = build_gram_set(scn.channels, rb)
        cfg = SpcaConfig()
        from swiptbeam.socp_builder import ExpansionPoint
        sol = res.solution
        exp = ExpansionPoint(w=sol.w, z=sol.z, q=sol.q,
                             r1=max(sol.r1, 1.0 + cfg.build.r1_floor_expansion),
                             r2=float(np.clip(sol.r2, cfg.build.r2_floor, 1.0)),
                             e_cr=max(sol.e_floor_cr, cfg.build.es_floor))
        problem = assemble_socp(scn.channels, rb, grams, scn.noise, scn.budget,
                                exp, cfg.build)
        nxt = conic_backend.solve(problem)
        assert nxt.status == conic_backend.OPTIMAL
        assert abs(nxt.objective - res.objective) < 5 * cfg.rel_obj_tol * abs(res.objective)

    def test_init_failure_propagates(self, desk_params):
        scn = make_scenario(7, desk_params.replace(rate_target=30.0))
        res = run_spca(scn.channels, scn.noise, scn.budget, SpcaConfig(), seed=7)
        assert res.status == "init_failure"
        assert res.solution is None
        assert len(res.trace.records) == 0

    def test_final_solution_passes_checker(self, desk_params):
        for seed in (1, 2):
            _, res = run_desk(desk_params, seed=seed)
            assert check_solution(res.problem, res.x).max_residual <= 1e-8


class TestValidation:
    def test_power_residuals_tiny(self, desk_params):
        scn, res = run_desk(desk_params, seed=1)
        rep = validate_solution(res, scn.channels, scn.noise, scn.budget,
                                n_samples=50, seed=1)
        assert rep.power_residual_tx <= 1e-8
        assert rep.power_residual_jam <= 1e-8
        assert rep.max_surrogate_residual <= 1e-8
        assert rep.r_slack_margin >= -1e-6

    def test_zero_radius_floors_guaranteed(self, desk_params):
        # perfect CSI: PSD flags pass, sampled floors within 1e-9
        scn, res = run_desk(desk_params, seed=2, eps_cr=0.0, eps_er=0.0)
        rep = validate_solution(res, scn.channels, scn.noise, scn.budget,
                                n_samples=50, seed=2)
        assert rep.all_psd
        assert rep.floor_margin_cr >= -1e-9
        assert rep.floor_margin_er >= -1e-9
        assert rep.secrecy_margin >= -1e-6

    def test_robust_secrecy_guarantee_sampled(self, desk_params):
        # sampled trace-form secrecy stays above the target
        scn, res = run_desk(desk_params, seed=3)
        rep = validate_solution(res, scn.channels, scn.noise, scn.budget,
                                n_samples=200, seed=3)
        assert rep.secrecy_margin >= -1e-6

    def test_revalidate_from_stored_solution(self, desk_params):
        scn, res = run_desk(desk_params, seed=4)
        rep = revalidate_solution(res.solution, scn.channels, scn.noise,
                                  scn.budget, n_samples=50, seed=4)
        assert rep.power_residual_tx <= 1e-8
        assert rep.secrecy_margin >= -1e-6


class TestTrace:
    def test_csv_header_and_shape(self, desk_params):
        _, res = run_desk(desk_params, seed=1)
        text = res.trace.to_csv()
        lines = text.strip().splitlines()
        assert lines[0] == TRACE_CSV_HEADER
        assert len(lines) == len(res.trace.records) + 1

    def test_iterations_to_tol(self):
        trace = IterationTrace()
        from swiptbeam.spca import IterationRecord
        for i, obj in enumerate([1.0, 1.5, 1.6, 1.60001]):
            trace.records.append(IterationRecord(
                iteration=i + 1, objective=obj, e_floor_cr=0, e_floor_er=0,
                max_residual=0, status="optimal", wall_time=0))
        assert trace.iterations_to_tol(1e-3) == 4
        assert trace.iterations_to_tol(0.6) == 2
        assert trace.iterations_to_tol(0.1) == 3
