import dataclasses

import numpy as np
import pytest

from otfs_mimo.channel import GridDims, PathParams, UserChannel, td_gram
from otfs_mimo.experiments import (
    ConfigError,
    Scenario,
    assign,
    draw_users,
    estimate_alphas,
    group_hl,
    group_sw,
    ofdm_baseline,
    run_scenario,
    sweep_kh,
)
from otfs_mimo.linalg import hermitian_solve
from otfs_mimo.precoding import domain_gram

SMALL = dict(M=4, N=2, Nt=16, R=12, R_norm=8, moment_samples=2000, snr_grid_db=(-10.0, 0.0, 10.0, 20.0))


def toy_user(uid, mobility, gain, dims=GridDims(2, 2, 4)):
    return UserChannel(uid, mobility, (PathParams(complex(np.sqrt(gain)), 0, 0.0, 0.0),), dims)


class TestGroupHL:
    def test_three_and_three(self):
        users = [toy_user(k, "high" if k < 3 else "low", 1.0) for k in range(6)]
        ga = group_hl(users)
        assert ga.zf_group == {0, 1, 2} and ga.mrt_group == {3, 4, 5}

    def test_all_high(self):
        ga = group_hl([toy_user(k, "high", 1.0) for k in range(3)])
        assert ga.mrt_group == frozenset()

    def test_all_low(self):
        ga = group_hl([toy_user(k, "low", 1.0) for k in range(3)])
        assert ga.zf_group == frozenset()


class TestGroupSW:
    def test_argmax(self):
        ga = group_sw([toy_user(0, "high", 0.3), toy_user(1, "low", 0.9)], 1)
        assert ga.zf_group == {1} and ga.mrt_group == {0}

    def test_ties_to_lowest_id(self):
        ga = group_sw([toy_user(k, "high", 0.5) for k in range(4)], 2)
        assert ga.zf_group == {0, 1}

    def test_exchangeable_frequency(self):
        s = Scenario(3, 3, scheme="PZF_SW", M=2, N=2, Nt=4)
        counts = np.zeros(6)
        n = 10_000
        for r in range(n):
            for k in assign(s, draw_users(s, 0, r)).zf_group:
                counts[k] += 1
        np.testing.assert_allclose(counts / n, 0.5, rtol=0.05)

    def test_partition(self):
        s = Scenario(2, 3, scheme="PZF_SW", K_s=2, M=2, N=2, Nt=4)
        for r in range(50):
            ga = assign(s, draw_users(s, 0, r))
            assert ga.zf_group | ga.mrt_group == set(range(5))
            assert not ga.zf_group & ga.mrt_group


class TestScenario:
    def test_defaults(self):
        s = Scenario(3, 3)
        assert (s.M, s.N, s.Nt, s.P, s.l_max, s.k_max_high, s.k_max_low) == (8, 8, 100, 2, 4, 4.0, 2.0)
        assert s.dims.Lcp == 13 and s.K_s == 3

    def test_scheme_forces_criterion(self):
        assert Scenario(3, 3, scheme="PZF_SW").criterion == "channel_gain"
        assert Scenario(3, 3, scheme="PZF_HL", criterion="channel_gain").criterion == "mobility"

    def test_rank_condition(self):
        with pytest.raises(ConfigError, match="rank"):
            Scenario(3, 3, Nt=4).validate()

    @pytest.mark.parametrize("bad", [dict(scheme="ZF"), dict(P=0), dict(cp_fraction=1.0), dict(R=1),
                                     dict(aoa_prior="gauss"), dict(scheme="PZF_SW", K_s=6)])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            Scenario(3, 3, **bad).validate()

    def test_run_rejects_before_work(self):
        with pytest.raises(ConfigError):
            run_scenario(Scenario(10, 10, Nt=8))


class TestRunScenario:
    def test_fzf_closed_form(self):
        res = run_scenario(Scenario(2, 2, scheme="FZF", **SMALL))
        assert np.max(np.abs(res.se_sim - res.se_closed) / res.se_closed) < 1e-6
        assert res.alphas["FZF_H"] == pytest.approx(res.alphas["FZF_L"], rel=1e-10)

    def test_fzf_psi_identity(self):
        res = run_scenario(Scenario(2, 2, scheme="FZF", **SMALL))
        for row in res.inputs:
            for inp in row:
                assert np.linalg.norm(inp.Psi - np.eye(8)) < 1e-8

    def test_ofdm_only_fzf(self):
        s = Scenario(2, 2, scheme="FZF", **SMALL)
        res = ofdm_baseline(s)
        a = res.alphas["FZF"]
        for j, snr in enumerate(s.snr_grid_db):
            expect = (8 - s.dims.Lcp) / 8 * np.log2(1 + a * a * 10 ** (snr / 10))
            np.testing.assert_allclose(res.se_sim[:, j], expect, rtol=1e-6)

    def test_no_cp_hybrid_equals_ofdm(self):
        s = Scenario(2, 2, scheme="FZF", cp_fraction=0.0, **SMALL)
        np.testing.assert_allclose(run_scenario(s).se_sim, ofdm_baseline(s).se_sim, rtol=1e-6)

    def test_pzf_without_mrt_is_fzf(self):
        pzf = run_scenario(Scenario(3, 0, scheme="PZF_HL", **SMALL))
        fzf = run_scenario(Scenario(3, 0, scheme="FZF", **SMALL))
        np.testing.assert_allclose(pzf.se_sim, fzf.se_sim, rtol=1e-6)

    def test_thread_count_invariant(self):
        s = Scenario(2, 2, scheme="PZF_HL", **SMALL)
        a, b = run_scenario(s, threads=1), run_scenario(s, threads=3)
        assert a.se_sim.tobytes() == b.se_sim.tobytes()
        assert a.ci95.tobytes() == b.ci95.tobytes()

    def test_ci_contains_mean(self):
        res = run_scenario(Scenario(2, 2, scheme="PZF_HL", **SMALL))
        assert np.all(res.ci95 >= 0) and np.all(np.isfinite(res.ci95))

    def test_closed_forms_only_where_defined(self):
        hl = run_scenario(Scenario(2, 2, scheme="PZF_HL", **SMALL))
        sw = run_scenario(Scenario(2, 2, scheme="PZF_SW", **SMALL))
        assert np.all(np.isfinite(hl.se_closed)) and np.all(np.isfinite(hl.se_approx))
        assert np.all(np.isnan(sw.se_closed)) and sw.roles == ["n/a"] * 4

    def test_sw_zf_frequency(self):
        res = run_scenario(Scenario(2, 2, scheme="PZF_SW", **SMALL))
        assert res.zf_frequency.sum() == pytest.approx(2.0)

    def test_alpha_common_draws(self):
        a = estimate_alphas(Scenario(2, 2, scheme="FZF", **SMALL))
        assert a["FZF_H"] == pytest.approx(a["FZF_L"], rel=0.02)
        assert a["MRT"] == pytest.approx(0.25)


class TestSweep:
    def test_full_group_matches_fzf(self):
        base = Scenario(1, 2, scheme="PZF_HL", **SMALL)
        sweep = sweep_kh(base, [3])
        fzf = run_scenario(Scenario(3, 0, scheme="FZF", **SMALL))
        np.testing.assert_allclose(sweep[0].se_sim, fzf.se_sim, rtol=1e-6)

    def test_splits(self):
        res = sweep_kh(Scenario(1, 3, scheme="PZF_HL", **SMALL), [1, 2, 3])
        assert [(r.scenario.K_h, r.scenario.K_l) for r in res] == [(1, 3), (2, 2), (3, 1)]

    def test_out_of_range(self):
        with pytest.raises(ConfigError):
            sweep_kh(Scenario(1, 3, **SMALL), [5])


@pytest.mark.parametrize("scheme", ["FZF", "PZF_HL", "PZF_SW", "OFDM_only_FZF", "OFDM_only_PZF"])
def test_power_contract(scheme):
    """Mean transmit power per user over 200 realizations lies in [0.9, 1.1] MN.

    The expectation over unit-variance symbols, E||W s||^2 = Tr(W^H W), is taken
    exactly; ZF traces come from the Gram (rotation invariant) so the
    (Nt*MN)-row precoders are never formed.
    """
    s = Scenario(3, 3, scheme=scheme)
    alphas = estimate_alphas(s)
    mn = s.dims.MN
    a_zf = alphas.get("FZF" if s.full_zf else "PZF", 0.0)
    power = np.zeros((200, s.K))
    for r in range(200):
        users = draw_users(s, 0, r)
        ga = assign(s, users)
        cl = domain_gram(users, td_gram(users))
        zf = sorted(ga.zf_group)
        idx = np.concatenate([np.arange(k * mn, (k + 1) * mn) for k in zf])
        ginv = hermitian_solve(cl[np.ix_(idx, idx)], np.eye(idx.size))
        for p, k in enumerate(zf):
            power[r, k] = a_zf ** 2 * np.trace(ginv[p * mn:(p + 1) * mn, p * mn:(p + 1) * mn]).real
        for k in ga.mrt_group:
            power[r, k] = alphas["MRT"] ** 2 * np.trace(cl[k * mn:(k + 1) * mn, k * mn:(k + 1) * mn]).real
    mean = power.mean() / mn
    assert 0.9 <= mean <= 1.1, f"{scheme}: mean power {mean:.3f} MN"
