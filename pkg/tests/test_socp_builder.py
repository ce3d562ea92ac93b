import math

import numpy as np
import pytest

from swiptbeam import (BuildConfig, ExpansionPoint, assemble_socp,
                       build_gram_set, compute_robust_bounds, format_socp,
                       make_scenario, qol_value, read_socp, taylor_qol)
from swiptbeam.conic_backend import check_solution
from swiptbeam.socp_builder import (BuildError, ExpansionError, build_rate_soc,
                                    make_layout, psd_factor)
from swiptbeam.spca import SpcaConfig, _embed_candidate, find_initial_point


def random_psd(rng, n):
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return B @ B.conj().T / n


def default_expansion(scn, seed=1):
    rb = compute_robust_bounds(scn.channels)
    return find_initial_point(scn.channels, rb, scn.noise, scn.budget,
                              SpcaConfig(), seed)


def build_default(scn, seed=1, cfg=BuildConfig()):
    rb = compute_robust_bounds(scn.channels)
    grams = build_gram_set(scn.channels, rb)
    exp = find_initial_point(scn.channels, rb, scn.noise, scn.budget,
                             SpcaConfig(build=cfg), seed)
    problem = assemble_socp(scn.channels, rb, grams, scn.noise, scn.budget, exp, cfg)
    return problem, exp, grams, rb


def soc_residual(blk, x):
    return np.linalg.norm(blk.A @ x + blk.b) - (blk.c @ x + blk.d)


class TestTaylorSurrogate:
    def test_touch_at_expansion(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            A = random_psd(rng, 4)
            w_t = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            t_t = rng.uniform(1.5, 5.0)
            sur = taylor_qol(A, 1.0, w_t, t_t)
            assert sur.value(w_t, t_t) == pytest.approx(
                qol_value(A, 1.0, w_t, t_t), rel=1e-12)

    def test_symbolic_unit_case(self):
        # A = I, a = 0, w~ = (1), t~ = 1: F(w, t) = 2 Re{w} - t
        sur = taylor_qol(np.eye(1), 0.0, np.array([1.0 + 0j]), 1.0)
        rng = np.random.default_rng(1)
        for _ in range(100):
            w = rng.standard_normal() + 1j * rng.standard_normal()
            t = rng.uniform(0.2, 4.0)
            assert sur.value(np.array([w]), t) == pytest.approx(2 * w.real - t, rel=1e-12)

    def test_global_underestimator_psd(self):
        # the acceptance suite covers 1e5 samples; spot check here
        rng = np.random.default_rng(2)
        A = random_psd(rng, 3)
        w_t = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        sur = taylor_qol(A, 0.5, w_t, 2.0)
        for _ in range(2_000):
            w = 3 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
            t = rng.uniform(0.51, 8.0)
            assert sur.value(w, t) <= qol_value(A, 0.5, w, t) + 1e-10

    def test_domain_error(self):
        with pytest.raises(ExpansionError):
            taylor_qol(np.eye(2), 1.0, np.ones(2), 0.5)
        with pytest.raises(BuildError):
            qol_value(np.eye(2), 1.0, np.ones(2), 1.0)

    def test_rows_match_value(self, desk_params):
        scn = make_scenario(1, desk_params)
        _, exp, grams, _ = build_default(scn)
        cfg = BuildConfig()
        layout = make_layout(scn.dims, cfg)
        sur = taylor_qol(grams.cr_minus[0], 1.0, exp.w[0], exp.r1)
        row, const = sur.rows(layout.sl("w0"), layout.index["r1"].start, layout.n_vars)
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = rng.standard_normal(layout.n_vars)
            w = x[layout.sl("w0")][:scn.dims.NT] + 1j * x[layout.sl("w0")][scn.dims.NT:]
            t = x[layout.index["r1"].start]
            assert row @ x + const == pytest.approx(sur.value(w, t), rel=1e-9, abs=1e-12)


class TestRateCone:
    def test_zero_target_boundary(self, desk_params):
        layout = make_layout(make_scenario(1, desk_params).dims, BuildConfig())
        blk = build_rate_soc(0.0, layout)
        x = np.zeros(layout.n_vars)
        x[layout.index["r1"].start] = 1.0
        x[layout.index["r2"].start] = 1.0
        assert soc_residual(blk, x) == pytest.approx(0.0, abs=1e-12)

    def test_unit_target_boundary(self, desk_params):
        # Rs = 1, r1 = 2, r2 = 1: ||[sqrt(8), 1]|| = 3 = r1 + r2
        layout = make_layout(make_scenario(1, desk_params).dims, BuildConfig())
        blk = build_rate_soc(1.0, layout)
        x = np.zeros(layout.n_vars)
        x[layout.index["r1"].start] = 2.0
        x[layout.index["r2"].start] = 1.0
        assert soc_residual(blk, x) == pytest.approx(0.0, abs=1e-12)

    def test_equivalence_with_product_form(self, desk_params):
        layout = make_layout(make_scenario(1, desk_params).dims, BuildConfig())
        rng = np.random.default_rng(4)
        for rs in (0.0, 0.5, 1.0, 2.0):
            blk = build_rate_soc(rs, layout)
            need = 2.0 ** rs
            for _ in range(5_000):
                x = np.zeros(layout.n_vars)
                r1 = rng.uniform(1e-3, 10.0)
                if rng.uniform() < 0.1:
                    r2 = need / r1  # boundary case
                else:
                    r2 = rng.uniform(1e-3, 10.0)
                x[layout.index["r1"].start] = r1
                x[layout.index["r2"].start] = r2
                cone_ok = soc_residual(blk, x) <= 1e-9
                product_ok = r1 * r2 >= need - 1e-9
                assert cone_ok == product_ok or abs(r1 * r2 - need) < 1e-8


class TestStructure:
    def test_primary_variable_census(self, desk_params):
        # 2(K*NT + NT + NJ) + K + 4 primary real scalars
        scn = make_scenario(2, desk_params)
        layout = make_layout(scn.dims, BuildConfig())
        d = scn.dims
        primary = 2 * (d.K * d.NT + d.NT + d.NJ) + d.K + 4
        assert primary == 38
        named = ["w0", "w1", "z", "q", "rho", "e_floor_cr", "e_floor_er", "r1", "r2"]
        assert sum(len(layout.index[n]) for n in named) == primary

    def test_var_index_partitions(self, desk_params):
        scn = make_scenario(2, desk_params)
        problem, *_ = build_default(scn)
        seen = np.zeros(problem.n_vars, dtype=int)
        for rng_ in problem.var_index.values():
            for i in rng_:
                seen[i] += 1
        assert np.all(seen == 1)

    def test_constraint_census(self, desk_params):
        scn = make_scenario(2, desk_params)
        problem, *_ = build_default(scn)
        d = scn.dims
        names = problem.names()
        assert names.count("rate_soc") == 1
        assert sum(1 for n in names if n.startswith("leak") and n.endswith("_row")) == d.L * d.K
        assert sum(1 for n in names if n.startswith("eh_cr")) == d.K
        assert sum(1 for n in names if n.startswith("eh_er")) == d.L
        assert "power_tx" in names and "power_jam" in names
        assert sum(1 for n in names if n.startswith("sinr") and n.endswith("_row")) == d.K

    def test_tau_one_drops_er_floor_weight(self, desk_params):
        scn = make_scenario(3, desk_params.replace(tau=1.0))
        problem, *_ = build_default(scn)
        assert problem.objective[problem.var_index["e_floor_er"].start] == 0.0
        assert problem.objective[problem.var_index["e_floor_cr"].start] == 1.0

    def test_deterministic_assembly(self, desk_params):
        scn = make_scenario(4, desk_params)
        p1, *_ = build_default(scn)
        p2, *_ = build_default(scn)
        assert format_socp(p1) == format_socp(p2)

    def test_zero_radii_matches_nonrobust_build(self, desk_params):
        scn = make_scenario(5, desk_params.replace(eps_cr=0.0, eps_er=0.0))
        rb = compute_robust_bounds(scn.channels)
        grams = build_gram_set(scn.channels, rb)
        assert np.array_equal(grams.cr_minus[0], grams.cr[0])
        p1, *_ = build_default(scn)
        assert all(p1.psd_flags.values())

    def test_psd_flags_fail_with_radii(self, desk_params):
        scn = make_scenario(5, desk_params)
        problem, *_ = build_default(scn)
        assert not any(problem.psd_flags.values())


class TestHyperbolicCone:
    def find_block(self, problem, name):
        return next(b for b in problem.socs if b.name == name)

    def test_spec_example(self, desk_params):
        # delta = 0.001 W^1/2, rho = 0.5, s = 2e-6 sits on the cone (feasible)
        scn = make_scenario(6, desk_params)
        problem, exp, grams, rb = build_default(scn)
        # rebuild the block against a noise floor delta^2 = 1e-6
        import swiptbeam.socp_builder as sbld
        from swiptbeam.scenario import NoiseAndEfficiency
        noise = NoiseAndEfficiency(
            sigma2_cr=np.full(scn.dims.K, 1e-12), delta2_cr=np.full(scn.dims.K, 1e-6),
            sigma2_er=np.full(scn.dims.L, 1e-12), eta_cr=np.full(scn.dims.K, 0.3),
            eta_er=np.full(scn.dims.L, 0.3))
        layout = make_layout(scn.dims, BuildConfig())
        socs, _ = sbld.build_cr_sinr_constraint(0, grams, noise, scn.budget,
                                                exp, layout, BuildConfig())
        blk = next(b for b in socs if b.name == "sinr0_hyperbolic")
        x = np.zeros(layout.n_vars)
        x[layout.index["s"].start] = 2e-6
        x[layout.index["rho"].start] = 0.5
        assert soc_residual(blk, x) <= 1e-12

    def test_equivalence_sampling(self, desk_params):
        scn = make_scenario(6, desk_params)
        problem, *_ = build_default(scn)
        blk = self.find_block(problem, "sinr0_hyperbolic")
        delta2 = float(make_scenario(6, desk_params).noise.delta2_cr[0])
        i_s = problem.var_index["s"].start
        i_rho = problem.var_index["rho"].start
        rng = np.random.default_rng(7)
        for _ in range(5_000):
            x = np.zeros(problem.n_vars)
            rho = rng.uniform(1e-3, 1.0)
            if rng.uniform() < 0.1:
                s = delta2 / rho  # boundary
            else:
                s = delta2 / rho * rng.uniform(0.2, 5.0)
            x[i_s] = s
            x[i_rho] = rho
            cone_ok = soc_residual(blk, x) <= 1e-9
            truth = delta2 / rho <= s * (1 + 1e-9)
            assert cone_ok == truth or abs(s * rho - delta2) < 1e-8 * delta2


class TestSurrogateTouch:
    def test_all_surrogates_touch_parents(self, desk_params):
        """At the expansion point each surrogate equals its parent constraint
        value (Taylor/linearization exactness)."""
        scn = make_scenario(8, desk_params)
        problem, exp, grams, rb = build_default(scn)
        noise, budget = scn.noise, scn.budget
        d = scn.dims

        def quad(v, A):
            return float(np.vdot(v, A @ v).real)

        x = _embed_candidate(problem, grams, noise, exp, 0.5,
                             max(exp.e_cr * 0.9, 1e-15), 1e-12,
                             BuildConfig(), d)
        # (i) SINR right side at the point equals the quadratic-over-linear value
        for k in range(d.K):
            blk = next(b for b in problem.nonneg if b.name == f"sinr{k}_row")
            sur = taylor_qol(grams.cr_minus[k], 1.0, exp.w[k], exp.r1)
            f_val = qol_value(grams.cr_minus[k], 1.0, exp.w[k], exp.r1)
            assert sur.value(exp.w[k], exp.r1) == pytest.approx(f_val, rel=1e-9)
        # (ii) leakage right side at the point equals num/r2
        for l in range(d.L):
            num = float(noise.sigma2_er[l]) + quad(exp.z, grams.er_minus[l]) \
                + quad(exp.q, grams.er_jam_minus[l])
            sz = taylor_qol(grams.er_minus[l], 0.0, exp.z, exp.r2)
            sq = taylor_qol(grams.er_jam_minus[l], 0.0, exp.q, exp.r2)
            rhs = noise.sigma2_er[l] * (2.0 / exp.r2 - exp.r2 / exp.r2 ** 2) \
                + sz.value(exp.z, exp.r2) + sq.value(exp.q, exp.r2)
            assert rhs == pytest.approx(num / exp.r2, rel=1e-9)

    def test_eh_cr_cone_boundary_algebra(self, desk_params):
        # eta * a * (1 - rho) = e_s^2 sits exactly on the cone
        scn = make_scenario(9, desk_params)
        problem, exp, grams, rb = build_default(scn)
        blk = next(b for b in problem.socs if b.name == "eh_cr0")
        noise = scn.noise
        d = scn.dims

        def quad(v, A):
            return float(np.vdot(v, A @ v).real)

        x = _embed_candidate(problem, grams, noise, exp, 0.5, exp.e_cr, 1e-12,
                             BuildConfig(), d)
        # at the expansion point, a_0 equals the shifted harvested sum
        a_val = float(noise.sigma2_cr[0]) + quad(exp.z, grams.cr_minus[0]) \
            + quad(exp.q, grams.cr_jam_plus[0]) \
            + sum(quad(exp.w[j], grams.cr_minus[0]) for j in range(d.K))
        eta = float(noise.eta_cr[0])
        rho = 0.5
        # choose E_s so that e_s = sqrt(eta a (1-rho)) exactly: cone boundary
        e_target = math.sqrt(eta * a_val * (1 - rho))
        e_s_var = 2.0 * math.sqrt(exp.e_cr) * e_target - exp.e_cr
        x[problem.var_index["e_floor_cr"].start] = e_s_var
        x[problem.var_index["rho"].start] = rho
        assert soc_residual(blk, x) == pytest.approx(0.0, abs=1e-9)

    def test_full_id_split_forces_negative_floor(self, desk_params):
        # rho = 1 admits only e_s = 0, i.e. E_s = -E~_s <= 0
        scn = make_scenario(9, desk_params)
        problem, exp, grams, rb = build_default(scn)
        blk = next(b for b in problem.socs if b.name == "eh_cr0")
        d = scn.dims
        x = _embed_candidate(problem, grams, scn.noise, exp, 1.0, 0.0, 1e-12,
                             BuildConfig(), d)
        x[problem.var_index["e_floor_cr"].start] = -exp.e_cr  # e_s = 0
        assert soc_residual(blk, x) <= 1e-9
        x[problem.var_index["e_floor_cr"].start] = exp.e_cr  # e_s > 0 now
        assert soc_residual(blk, x) > 0


class TestLeakageRow:
    def test_zero_expansion_reduces_to_linear_noise_term(self, desk_params):
        # z~ = q~ = 0, r~2 = 1: right side is sigma^2 * (2 - r2)
        import swiptbeam.socp_builder as sbld
        scn = make_scenario(10, desk_params)
        rb = compute_robust_bounds(scn.channels)
        grams = build_gram_set(scn.channels, rb)
        cfg = BuildConfig()
        layout = make_layout(scn.dims, cfg)
        exp = ExpansionPoint(w=[np.ones(scn.dims.NT, complex) * 0.01] * scn.dims.K,
                             z=np.zeros(scn.dims.NT, complex),
                             q=np.zeros(scn.dims.NJ, complex),
                             r1=1.5, r2=1.0, e_cr=1e-9)
        blk = sbld.build_er_leakage_constraint(0, 0, grams, scn.noise, exp, layout, cfg)
        sigma2 = float(scn.noise.sigma2_er[0])
        x = np.zeros(layout.n_vars)
        # row normalization is applied in assemble, not in the sub-builder
        for r2 in (0.0, 0.5, 1.0):
            x[layout.index["r2"].start] = r2
            u_sum = 0.0  # all auxiliaries zero
            expected_rhs = sigma2 * (2.0 - r2)
            assert blk.g @ x + blk.h == pytest.approx(expected_rhs - sigma2, rel=1e-12)


class TestPowerCones:
    def test_feasible_and_boundary(self, desk_params):
        scn = make_scenario(11, desk_params)
        problem, exp, grams, rb = build_default(scn)
        blk = next(b for b in problem.socs if b.name == "power_tx")
        x = np.zeros(problem.n_vars)
        assert soc_residual(blk, x) == pytest.approx(-math.sqrt(scn.budget.p_tx))
        # single beam at exactly the budget: tight
        w0 = problem.var_index["w0"]
        x[w0.start] = math.sqrt(scn.budget.p_tx)
        assert soc_residual(blk, x) == pytest.approx(0.0, abs=1e-12)
        x[w0.start] = math.sqrt(scn.budget.p_tx + 0.01)
        assert soc_residual(blk, x) > 0

    def test_exactness_no_approximation(self, desk_params):
        scn = make_scenario(11, desk_params)
        problem, *_ = build_default(scn)
        blk = next(b for b in problem.socs if b.name == "power_jam")
        rng = np.random.default_rng(12)
        for _ in range(200):
            x = np.zeros(problem.n_vars)
            qv = rng.standard_normal(2 * scn.dims.NJ)
            x[problem.var_index["q"]] = qv
            lhs = np.linalg.norm(qv)
            assert soc_residual(blk, x) == pytest.approx(lhs - math.sqrt(scn.budget.p_jam), rel=1e-12)


class TestDump:
    def test_round_trip(self, desk_params):
        scn = make_scenario(12, desk_params)
        problem, *_ = build_default(scn)
        text = format_socp(problem)
        back = read_socp(text)
        assert back.n_vars == problem.n_vars
        assert np.array_equal(back.objective, problem.objective)
        assert len(back.socs) == len(problem.socs)
        for a, b in zip(problem.socs, back.socs):
            assert a.name == b.name
            assert np.array_equal(a.A, b.A)
            assert np.array_equal(a.b, b.b)
            assert np.array_equal(a.c, b.c)
            assert a.d == b.d
        for a, b in zip(problem.nonneg, back.nonneg):
            assert np.array_equal(a.g, b.g)
            assert a.h == b.h
        assert {k: (v.start, v.stop) for k, v in problem.var_index.items()} == \
               {k: (v.start, v.stop) for k, v in back.var_index.items()}
        assert format_socp(back) == text


class TestPsdFactor:
    def test_factorization(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            A = random_psd(rng, 4)
            F = psd_factor(A)
            assert np.allclose(F.conj().T @ F, A, atol=1e-12)

    def test_rank_deficient_trimming(self):
        h = np.array([1.0 + 1j, 2.0, 0.5j])
        A = np.outer(h, h.conj())
        F = psd_factor(A)
        assert F.shape[0] == 1
        assert np.allclose(F.conj().T @ F, A, atol=1e-12)

    def test_indefinite_rejected(self):
        with pytest.raises(BuildError):
            psd_factor(np.diag([1.0, -0.5]))
