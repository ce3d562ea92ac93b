import numpy as np
import pytest

from swiptbeam import SCHEMES, SpcaConfig, make_scenario, solve_scheme
from swiptbeam.baselines import scheme_channels


class TestVariableElimination:
    def test_no_an_pins_z(self, desk_params):
        scn = make_scenario(1, desk_params)
        res = solve_scheme("no_an", scn, SpcaConfig(), seed=1)
        assert res.solution is not None
        assert np.linalg.norm(res.solution.z) == 0.0
        assert "z" not in res.problem.var_index
        assert "u_leak_z" not in res.problem.var_index

    def test_no_cj_pins_q(self, desk_params):
        scn = make_scenario(1, desk_params)
        res = solve_scheme("no_cj", scn, SpcaConfig(), seed=1)
        assert res.solution is not None
        assert np.linalg.norm(res.solution.q) == 0.0
        assert "q" not in res.problem.var_index
        assert "u_leak_q" not in res.problem.var_index

    def test_proposed_keeps_both(self, desk_params):
        scn = make_scenario(1, desk_params)
        res = solve_scheme("proposed", scn, SpcaConfig(), seed=1)
        assert "z" in res.problem.var_index and "q" in res.problem.var_index


class TestSchemeChannels:
    def test_perfect_csi_zeroes_both_sides(self, desk_params):
        scn = make_scenario(2, desk_params)
        design, evaluation = scheme_channels("perfect_csi", scn)
        assert np.all(design.eps_cr == 0) and np.all(evaluation.eps_cr == 0)

    def test_non_robust_designs_blind_evaluates_true(self, desk_params):
        scn = make_scenario(2, desk_params)
        design, evaluation = scheme_channels("non_robust", scn)
        assert np.all(design.theta_er == 0)
        assert np.array_equal(evaluation.theta_er, scn.channels.theta_er)
        # same channel estimates either way
        assert np.array_equal(design.h_cr[0], evaluation.h_cr[0])

    def test_unknown_scheme(self, desk_params):
        scn = make_scenario(2, desk_params)
        with pytest.raises(ValueError):
            scheme_channels("zero_forcing", scn)


class TestOrderings:
    def test_perfect_csi_dominates_proposed(self, desk_params):
        # less-constrained design; allow tiny slack and rare local-point flips
        wins = 0
        n = 0
        for seed in range(1, 11):
            scn = make_scenario(seed, desk_params)
            rp = solve_scheme("proposed", scn, SpcaConfig(), seed=seed)
            rc = solve_scheme("perfect_csi", scn, SpcaConfig(), seed=seed)
            if rp.solution is None or rc.solution is None:
                continue
            n += 1
            wins += rc.objective >= rp.objective - 1e-6 * abs(rp.objective)
        assert n >= 8
        assert wins >= n - 1

    def test_ablations_fall_below_proposed_median(self, desk_params):
        objs = {s: [] for s in ("proposed", "no_an", "no_cj")}
        for seed in range(1, 11):
            scn = make_scenario(seed, desk_params)
            for s in objs:
                r = solve_scheme(s, scn, SpcaConfig(), seed=seed)
                if r.solution is not None:
                    objs[s].append(r.objective)
        med = {s: np.median(v) for s, v in objs.items()}
        assert med["proposed"] > med["no_an"]
        assert med["proposed"] > med["no_cj"]

    def test_non_robust_loses_worst_case_secrecy(self, desk_params):
        # design blind to errors, evaluated with the true radii: the sampled
        # secrecy guarantee degrades relative to the robust design
        from swiptbeam import validate_solution
        margins_robust = []
        margins_blind = []
        for seed in range(1, 9):
            scn = make_scenario(seed, desk_params.replace(eps_cr=0.05, eps_er=0.05))
            rp = solve_scheme("proposed", scn, SpcaConfig(), seed=seed)
            rn = solve_scheme("non_robust", scn, SpcaConfig(), seed=seed)
            if rp.solution is None or rn.solution is None:
                continue
            _, eval_ch = scheme_channels("non_robust", scn)
            vp = validate_solution(rp, eval_ch, scn.noise, scn.budget, n_samples=100, seed=seed)
            vn = validate_solution(rn, eval_ch, scn.noise, scn.budget, n_samples=100, seed=seed)
            margins_robust.append(vp.secrecy_margin)
            margins_blind.append(vn.secrecy_margin)
        assert np.median(margins_blind) < np.median(margins_robust)
        assert np.median(margins_robust) >= -1e-6
