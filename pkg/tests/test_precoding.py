import numpy as np
import pytest

from otfs_mimo.channel import Domain, GridDims, PathParams, UserChannel, all_domain_channels, td_gram
from otfs_mimo.experiments import Scenario, draw_users
from otfs_mimo.linalg import InvalidDimensionError, SingularGramError
from otfs_mimo.precoding import (
    domain_gram,
    effective_gains,
    estimate_zf_alpha,
    fzf_precoders,
    mrt_alpha,
    mrt_precoders,
    pzf_precoders,
    selection_operator,
    stack_channels,
    stack_order,
)

from conftest import random_users

OWN = {"DD": Domain.DD, "TF": Domain.TF}
CROSS = {("DD", "DD"): Domain.DD, ("TF", "TF"): Domain.TF, ("DD", "TF"): Domain.CROSS_DD, ("TF", "DD"): Domain.CROSS_TF}


def leak_matrix(users, channels, ps, k, kp):
    rx = ps.side[k]
    return channels[k][CROSS[(rx, ps.side[kp])]].mat @ ps.W[kp]


class TestSelection:
    def test_single_block(self):
        np.testing.assert_array_equal(selection_operator(1, 1, 3), np.eye(3))

    def test_middle_block(self):
        s = selection_operator(3, 2, 2)
        ref = np.zeros((6, 2))
        ref[2:4] = np.eye(2)
        np.testing.assert_array_equal(s, ref)

    def test_extracts_block(self):
        rng = np.random.default_rng(0)
        stacked = rng.standard_normal((12, 7))
        sel = selection_operator(4, 3, 3)
        np.testing.assert_array_equal(sel.T @ stacked, stacked[6:9])

    @pytest.mark.parametrize("k", [0, 4])
    def test_out_of_range(self, k):
        with pytest.raises(InvalidDimensionError):
            selection_operator(3, k, 2)


class TestStackOrder:
    def test_full_zf_orders(self, small_users):
        dd = stack_order(small_users, "DD")
        tf = stack_order(small_users, "TF")
        assert dd == [(0, Domain.DD), (1, Domain.DD), (2, Domain.CROSS_TF), (3, Domain.CROSS_TF)]
        assert tf == [(2, Domain.TF), (3, Domain.TF), (0, Domain.CROSS_DD), (1, Domain.CROSS_DD)]

    def test_block_lookup(self, small_users, small_channels):
        st = stack_channels(stack_order(small_users, "TF"), small_channels)
        np.testing.assert_array_equal(st.block(0), small_channels[0][Domain.CROSS_DD].mat)


class TestZFAlpha:
    def test_orthonormal_rows(self):
        q = np.linalg.qr(np.random.default_rng(1).standard_normal((20, 6)))[0].T
        assert estimate_zf_alpha(lambda r: q, 3, 2, 5) == pytest.approx(1.0, rel=1e-12)

    def test_identity_channel(self):
        d = GridDims(4, 2, 1)
        u = UserChannel(0, "high", (PathParams(1.0 + 0j, 0, 0.0, 0.0),), d)
        h = all_domain_channels(u)[Domain.DD].mat
        assert estimate_zf_alpha(lambda r: h, 1, 8, 3) == pytest.approx(1.0, rel=1e-12)

    def test_trace_oracle(self, small_dims):
        draws = [random_users(s, small_dims, 2, 1) for s in range(10)]

        def stacked(r):
            ch = {u.user_id: all_domain_channels(u) for u in draws[r]}
            return stack_channels(stack_order(draws[r], "DD"), ch).mat

        ref = np.mean([np.trace(np.linalg.inv(stacked(r) @ stacked(r).conj().T)).real for r in range(10)])
        expect = np.sqrt(3 * small_dims.MN / ref)
        assert estimate_zf_alpha(stacked, 3, small_dims.MN, 10) == pytest.approx(expect, rel=1e-10)

    def test_gram_input(self, small_users, small_channels):
        h = stack_channels(stack_order(small_users, "DD"), small_channels).mat
        a = estimate_zf_alpha(lambda r: h, 4, 8, 1)
        b = estimate_zf_alpha(lambda r: h @ h.conj().T, 4, 8, 1, gram=True)
        assert a == pytest.approx(b, rel=1e-12)

    def test_singular_propagates(self):
        h = np.zeros((4, 8))
        h[0, 0] = 1.0
        with pytest.raises(SingularGramError):
            estimate_zf_alpha(lambda r: h, 2, 2, 1)

    def test_bad_count(self):
        with pytest.raises(ValueError):
            estimate_zf_alpha(lambda r: np.eye(2), 1, 2, 0)


class TestFZF:
    def test_orthogonality(self, small_users, small_channels):
        alpha = 1.7
        ps = fzf_precoders(small_users[:2], small_users[2:], small_channels, alpha)
        mn = small_users[0].dims.MN
        for u in small_users:
            for v in small_users:
                m = leak_matrix(small_users, small_channels, ps, u.user_id, v.user_id)
                target = alpha * np.eye(mn) if u is v else 0
                assert np.linalg.norm(m - target) <= 1e-8 * alpha * np.sqrt(mn)

    def test_single_user_pseudo_inverse(self, small_dims):
        u = random_users(3, small_dims, 1, 0)
        ch = {0: all_domain_channels(u[0])}
        ps = fzf_precoders(u, [], ch, 2.0)
        h = ch[0][Domain.DD].mat
        np.testing.assert_allclose(ps.W[0], 2.0 * np.linalg.pinv(h), atol=1e-10)
        np.testing.assert_allclose(h @ ps.W[0], 2.0 * np.eye(small_dims.MN), atol=1e-10)

    def test_rank_condition(self):
        d = GridDims(2, 1, 2)
        users = random_users(0, d, 2, 1)
        ch = {u.user_id: all_domain_channels(u) for u in users}
        with pytest.raises(InvalidDimensionError):
            fzf_precoders(users[:2], users[2:], ch, 1.0)


class TestPZF:
    def test_within_group(self, small_users, small_channels):
        ps = pzf_precoders(small_users[:2], small_channels, 1.2)
        for a in (0, 1):
            for b in (0, 1):
                m = leak_matrix(small_users, small_channels, ps, a, b)
                target = 1.2 * np.eye(8) if a == b else 0
                assert np.linalg.norm(m - target) <= 1e-8 * 1.2 * np.sqrt(8)

    def test_inter_group_not_nulled(self, small_users, small_channels):
        ps = pzf_precoders(small_users[:2], small_channels, 1.0)
        # the MRT group is not in the null space of a partial ZF precoder
        m = small_channels[2][Domain.CROSS_TF].mat @ ps.W[0]
        assert np.linalg.norm(m) > 1e-3

    def test_singleton_is_single_user_zf(self, small_users, small_channels):
        ps = pzf_precoders(small_users[:1], small_channels, 1.0)
        h = small_channels[0][Domain.DD].mat
        np.testing.assert_allclose(ps.W[0], np.linalg.pinv(h), atol=1e-10)

    def test_gram_dimension(self):
        s = Scenario(3, 3)
        users = draw_users(s, 0, 0)
        zf = users[:3]
        assert domain_gram(zf, td_gram(zf)).shape == (192, 192)
        assert domain_gram(users, td_gram(users)).shape == (384, 384)

    def test_empty_group(self, small_channels):
        assert pzf_precoders([], small_channels, 1.0).W == {}


class TestMRT:
    def test_alpha(self):
        assert mrt_alpha(100) == pytest.approx(0.1, abs=1e-15)

    def test_unit_channel(self):
        d = GridDims(4, 2, 1)
        u = UserChannel(0, "low", (PathParams(1.0 + 0j, 2, 0.0, 0.3),), d)
        ch = {0: all_domain_channels(u)}
        ps = mrt_precoders([u], ch)
        h = ch[0][Domain.TF].mat
        np.testing.assert_allclose(ps.W[0], h.conj().T, atol=1e-15)
        assert np.linalg.norm(ps.W[0]) ** 2 == pytest.approx(8.0, rel=1e-12)

    def test_diagonal_mean(self):
        # first low-mobility user of the default scenario, 200 draws
        s = Scenario(3, 3)
        k = 3
        vals = []
        for r in range(200):
            u = draw_users(s, 0, r)[k]
            h = all_domain_channels(u)[Domain.TF].mat
            vals.append(np.mean(np.diag(h @ (mrt_alpha(s.Nt) * h.conj().T))).real)
        assert abs(np.mean(vals) / np.sqrt(s.Nt) - 1.0) <= 0.05

    def test_roles(self, small_users, small_channels):
        ps = mrt_precoders(small_users[2:], small_channels)
        assert ps.roles == {2: "mrt", 3: "mrt"} and ps.side == {2: "TF", 3: "TF"}


class TestEffectiveGains:
    @pytest.mark.parametrize("zf,mrt", [([0, 1, 2, 3], []), ([0, 1], [2, 3]), ([1, 3], [0, 2])])
    def test_dense_vs_gram(self, small_users, small_channels, zf, mrt):
        by = {u.user_id: u for u in small_users}
        zf_users = [by[i] for i in zf]
        ps = pzf_precoders(zf_users, small_channels, 1.4) if zf else None
        mp = mrt_precoders([by[i] for i in mrt], small_channels)
        ps = ps.merge(mp) if ps is not None else mp
        cl = domain_gram(small_users, td_gram(small_users))
        E = effective_gains(cl, 8, zf, mrt, 1.4, mrt_alpha(12))
        for k in range(4):
            for kp in range(4):
                dense = leak_matrix(small_users, small_channels, ps, k, kp)
                np.testing.assert_allclose(E[k, kp], dense, atol=1e-10)

    def test_duplicate_merge_rejected(self, small_users, small_channels):
        a = mrt_precoders(small_users[2:], small_channels)
        with pytest.raises(ValueError):
            a.merge(a)
