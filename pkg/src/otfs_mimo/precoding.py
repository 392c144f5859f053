"""Full/partial zero-forcing and MRT precoders for the hybrid OTFS/OFDM downlink.

A ZF precoder for a user that transmits in domain ``T`` (DD for OTFS, TF for
OFDM) is built on the stacked channel whose rows are every ZF-group user's
channel with that user's receive domain and transmit domain ``T``. Users
sharing ``T`` come first (ascending id), then the others (ascending id); for
full ZF this gives exactly the high-first / low-first stacks ``H_H``, ``H_L``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import Domain, UserChannel, domain_for, rx_transform
from .linalg import InvalidDimensionError, hermitian_solve, kron, symmetrize


@dataclass(frozen=True)
class StackedChannel:
    order: tuple  # ((user_id, Domain), ...) top to bottom
    mat: np.ndarray = field(repr=False)

    def block(self, user_id: int) -> np.ndarray:
        ids = [u for u, _ in self.order]
        mn = self.mat.shape[0] // len(ids)
        i = ids.index(user_id)
        return self.mat[i * mn:(i + 1) * mn]


@dataclass
class PrecoderSet:
    """Per-user precoders ``W_k`` (Nt*MN x MN) with their transmit domains."""

    W: dict = field(default_factory=dict)
    side: dict = field(default_factory=dict)
    roles: dict = field(default_factory=dict)
    alphas: dict = field(default_factory=dict)
    scheme: str = ""

    def merge(self, other: "PrecoderSet") -> "PrecoderSet":
        if set(self.W) & set(other.W):
            raise ValueError("precoder sets overlap")
        scheme = self.scheme if not other.scheme else (other.scheme if not self.scheme else f"{self.scheme}+{other.scheme}")
        return PrecoderSet(
            {**self.W, **other.W},
            {**self.side, **other.side},
            {**self.roles, **other.roles},
            {**self.alphas, **other.alphas},
            scheme,
        )


def selection_operator(K: int, k: int, MN: int) -> np.ndarray:
    """``b_K^(k) kron I_MN`` with 1-based block index ``k``."""
    if not 1 <= k <= K:
        raise InvalidDimensionError(f"block index {k} outside 1..{K}")
    b = np.zeros((K, 1))
    b[k - 1] = 1.0
    return kron(b, np.eye(MN))


def stack_order(group, tx_side: str) -> list:
    """Stack ordering for a ZF group transmitting in ``tx_side``."""
    same = sorted(u.user_id for u in group if u.side == tx_side)
    other = sorted(u.user_id for u in group if u.side != tx_side)
    by_id = {u.user_id: u for u in group}
    return [(uid, domain_for(by_id[uid].side, tx_side)) for uid in same + other]


def stack_channels(order, channels) -> StackedChannel:
    mats = [channels[uid][dom].mat for uid, dom in order]
    return StackedChannel(tuple(order), np.vstack(mats))


def _zf_for_side(group, channels, tx_side, alpha, ridge, context):
    order = stack_order(group, tx_side)
    stacked = stack_channels(order, channels)
    H = stacked.mat
    K = len(order)
    mn = H.shape[0] // K
    G = H @ H.conj().T
    X = hermitian_solve(G, np.eye(K * mn), ridge=ridge, context=context)
    out = {}
    for pos, (uid, _) in enumerate(order):
        out[uid] = alpha * (H.conj().T @ X[:, pos * mn:(pos + 1) * mn])
    return out


def _zf_set(group, channels, alpha, scheme, key, ridge, context):
    group = list(group)
    ps = PrecoderSet(alphas={key: alpha}, scheme=scheme)
    for side in sorted({u.side for u in group}):
        built = _zf_for_side(group, channels, side, alpha, ridge, context)
        for u in group:
            if u.side == side:
                ps.W[u.user_id] = built[u.user_id]
                ps.side[u.user_id] = side
                ps.roles[u.user_id] = "zf"
    return ps


def fzf_precoders(high_users, low_users, channels, alpha_fzf: float, *, ridge=False, context="FZF") -> PrecoderSet:
    """Full ZF over all ``K`` users; every cross-user leakage is nulled."""
    users = list(high_users) + list(low_users)
    if len(users) > users[0].dims.Nt:
        raise InvalidDimensionError(f"FZF needs K <= Nt, got K={len(users)}")
    return _zf_set(users, channels, alpha_fzf, "FZF", "FZF", ridge, context)


def pzf_precoders(zf_group, channels, alpha_pzf: float, *, ridge=False, context="PZF") -> PrecoderSet:
    """ZF restricted to ``zf_group``; its Gram is only ``K_zf*MN`` square."""
    zf_group = list(zf_group)
    if not zf_group:
        return PrecoderSet(alphas={"PZF": alpha_pzf}, scheme="PZF")
    if len(zf_group) > zf_group[0].dims.Nt:
        raise InvalidDimensionError(f"PZF needs K_zf <= Nt, got {len(zf_group)}")
    return _zf_set(zf_group, channels, alpha_pzf, "PZF", "PZF", ridge, context)


def mrt_alpha(Nt: int) -> float:
    return 1.0 / np.sqrt(Nt)


def mrt_precoders(mrt_group, channels) -> PrecoderSet:
    """``W_k = H_k^H / sqrt(Nt)`` on each user's own-domain channel."""
    ps = PrecoderSet(scheme="MRT")
    for u in mrt_group:
        own = Domain.DD if u.side == "DD" else Domain.TF
        ps.W[u.user_id] = mrt_alpha(u.dims.Nt) * channels[u.user_id][own].mat.conj().T
        ps.side[u.user_id] = u.side
        ps.roles[u.user_id] = "mrt"
        ps.alphas["MRT"] = mrt_alpha(u.dims.Nt)
    return ps


def estimate_zf_alpha(stacked_draw, K: int, MN: int, R_norm: int, *, gram=False, ridge=False, context=None) -> float:
    """``sqrt(K*MN / mean_r Tr[(H H^H)^-1])`` over ``R_norm`` draws.

    ``stacked_draw(r)`` returns realization ``r`` of the stacked channel, or
    its Gram when ``gram=True``.
    """
    if R_norm < 1:
        raise ValueError("R_norm must be >= 1")
    total = 0.0
    for r in range(R_norm):
        m = stacked_draw(r)
        g = m if gram else m @ m.conj().T
        if g.shape != (K * MN, K * MN):
            raise InvalidDimensionError(f"Gram shape {g.shape} does not match K*MN={K * MN}")
        ctx = f"{context}, normalization draw {r}" if context else f"normalization draw {r}"
        total += np.trace(hermitian_solve(g, np.eye(K * MN), ridge=ridge, context=ctx)).real
    return float(np.sqrt(K * MN / (total / R_norm)))


def domain_gram(users, td_gram_mat: np.ndarray) -> np.ndarray:
    """Rotate a stacked TD Gram into each user's receive domain.

    Block ``(a, b)`` equals ``H_a H_b^H`` for the channels seen in the two
    users' receive domains under any common transmit domain.
    """
    mn = users[0].dims.MN
    L = [rx_transform(u.side, u.dims) for u in users]
    out = np.empty_like(td_gram_mat)
    for a in range(len(users)):
        for b in range(len(users)):
            blk = td_gram_mat[a * mn:(a + 1) * mn, b * mn:(b + 1) * mn]
            out[a * mn:(a + 1) * mn, b * mn:(b + 1) * mn] = L[a] @ blk @ L[b].conj().T
    return out


def effective_gains(cl: np.ndarray, mn: int, zf_idx, mrt_idx, alpha_zf: float, alpha_mrt: float,
                    *, ridge=False, context=None) -> np.ndarray:
    """All effective channels ``H_k W_k'`` (without sqrt(Es)), shape (K, K, MN, MN).

    ``cl`` comes from :func:`domain_gram`; ``zf_idx``/``mrt_idx`` are stack
    positions. ZF leakage only depends on the receive-domain Gram, so the
    (Nt*MN)-long precoders are never formed.
    """
    K = cl.shape[0] // mn
    out = np.zeros((K, K, mn, mn), dtype=complex)

    def rows(idx):
        return np.concatenate([np.arange(i * mn, (i + 1) * mn) for i in idx])

    if len(zf_idx):
        z = rows(zf_idx)
        G = symmetrize(cl[np.ix_(z, z)])
        # Y = cl[:, z] G^-1, taken as (G^-1 cl[z, :])^H
        Y = hermitian_solve(G, cl[z, :], ridge=ridge, context=context).conj().T
        for pos, kp in enumerate(zf_idx):
            cols = Y[:, pos * mn:(pos + 1) * mn] * alpha_zf
            out[:, kp] = cols.reshape(K, mn, mn)
    for kp in mrt_idx:
        out[:, kp] = alpha_mrt * cl[:, kp * mn:(kp + 1) * mn].reshape(K, mn, mn)
    return out
