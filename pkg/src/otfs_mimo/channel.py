"""Multipath delay-Doppler channel with a uniform linear array at the BS.

The time-domain channel of user ``k`` is

    H_TD = sum_i theta_i kron (h_i * Pi**l_i @ Delta**k_i)

with ``theta_i`` the 1 x Nt steering row, ``Pi`` the forward cyclic shift and
``Delta`` the Doppler phase diagonal. Equivalent-domain channels sandwich it
between a receive transform (DD: F_N kron I_M, TF: I_N kron F_M) and a
per-antenna transmit transform (DD: F_N^H kron I_M, TF: I_N kron F_M^H).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .linalg import (
    InvalidDimensionError,
    UnitaryTransform,
    delay_shift_power,
    dft_matrix,
    doppler_phases,
    kron,
)

AOA_PRIORS = ("uniform_angle", "uniform_sine")


class Domain(str, Enum):
    TD = "TD"
    DD = "DD"
    TF = "TF"
    CROSS_DD = "crossDD"
    CROSS_TF = "crossTF"


# (receive side, transmit side) for each equivalent-domain channel
DOMAIN_SIDES = {
    Domain.DD: ("DD", "DD"),
    Domain.TF: ("TF", "TF"),
    Domain.CROSS_DD: ("DD", "TF"),
    Domain.CROSS_TF: ("TF", "DD"),
}

MODULATION_SIDE = {"otfs": "DD", "ofdm": "TF"}


def domain_for(rx_side: str, tx_side: str) -> Domain:
    for dom, sides in DOMAIN_SIDES.items():
        if sides == (rx_side, tx_side):
            return dom
    raise ValueError(f"no channel domain for rx={rx_side!r}, tx={tx_side!r}")


@dataclass(frozen=True)
class GridDims:
    M: int
    N: int
    Nt: int
    Lcp: int = -1

    def __post_init__(self):
        if min(self.M, self.N, self.Nt) < 1:
            raise InvalidDimensionError(f"M, N, Nt must be >= 1, got {self.M}, {self.N}, {self.Nt}")
        if self.Lcp == -1:
            object.__setattr__(self, "Lcp", cp_length(0.2, self.MN))
        if not 0 <= self.Lcp < self.MN:
            raise InvalidDimensionError(f"Lcp must lie in [0, {self.MN}), got {self.Lcp}")

    @property
    def MN(self) -> int:
        return self.M * self.N

    @classmethod
    def with_cp_fraction(cls, M: int, N: int, Nt: int, cp_fraction: float = 0.2) -> "GridDims":
        return cls(M, N, Nt, cp_length(cp_fraction, M * N))

    def rate_factor(self, modulation: str) -> float:
        """``MN * alpha_SE``: 1 for OTFS, ``(MN - Lcp)/MN`` for OFDM."""
        if modulation == "otfs":
            return 1.0
        if modulation == "ofdm":
            return (self.MN - self.Lcp) / self.MN
        raise ValueError(f"unknown modulation {modulation!r}")


def cp_length(cp_fraction: float, mn: int) -> int:
    # ceiling, with a guard so 0.2 * 50 does not round up to 11
    return int(math.ceil(cp_fraction * mn - 1e-9))


@dataclass(frozen=True)
class PathParams:
    h: complex
    l: int
    k: float
    phi: float


@dataclass(frozen=True)
class UserChannel:
    user_id: int
    mobility: str
    paths: tuple
    dims: GridDims
    modulation: str = ""

    def __post_init__(self):
        if self.mobility not in ("high", "low"):
            raise ValueError(f"mobility must be 'high' or 'low', got {self.mobility!r}")
        if not self.paths:
            raise ValueError("a user channel needs at least one path")
        if not self.modulation:
            object.__setattr__(self, "modulation", "otfs" if self.mobility == "high" else "ofdm")
        if self.modulation not in MODULATION_SIDE:
            raise ValueError(f"unknown modulation {self.modulation!r}")

    @property
    def side(self) -> str:
        """Domain ("DD" or "TF") in which this user transmits and receives."""
        return MODULATION_SIDE[self.modulation]

    @property
    def gain(self) -> float:
        return float(sum(abs(p.h) ** 2 for p in self.paths))


@dataclass(frozen=True)
class ChannelMatrix:
    domain: Domain
    mat: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.mat.shape


def steering_vector(phi: float, Nt: int) -> np.ndarray:
    """Half-wavelength ULA response, shape (1, Nt)."""
    if Nt < 1:
        raise InvalidDimensionError(f"Nt must be >= 1, got {Nt}")
    return np.exp(-1j * np.pi * np.arange(Nt) * np.sin(phi))[None, :]


def draw_aoa(rng: np.random.Generator, size, prior: str = "uniform_angle") -> np.ndarray:
    if prior == "uniform_angle":
        return rng.uniform(-np.pi / 2, np.pi / 2, size)
    if prior == "uniform_sine":
        return np.arcsin(rng.uniform(-1.0, 1.0, size))
    raise ValueError(f"unknown AoA prior {prior!r}; expected one of {AOA_PRIORS}")


def draw_user_channel(
    rng: np.random.Generator,
    profile: str,
    dims: GridDims,
    P: int,
    l_max: int,
    k_max: float,
    *,
    user_id: int = 0,
    aoa_prior: str = "uniform_angle",
    modulation: str = "",
) -> UserChannel:
    """Draw ``P`` paths with a uniform power delay profile.

    Gains are circularly-symmetric Gaussian with variance ``1/(2P)`` per real
    dimension, delays uniform on ``{0..l_max}``, Doppler uniform on
    ``[-k_max, k_max]``. The draw order is fixed so the result depends only on
    the generator state.
    """
    if P < 1:
        raise ValueError(f"P must be >= 1, got {P}")
    g = rng.standard_normal((2, P)) * np.sqrt(1.0 / (2 * P))
    l = rng.integers(0, l_max + 1, P)
    kap = k_max * rng.uniform(-1.0, 1.0, P)
    phi = draw_aoa(rng, P, aoa_prior)
    paths = tuple(
        PathParams(complex(g[0, i], g[1, i]), int(l[i]), float(kap[i]), float(phi[i])) for i in range(P)
    )
    return UserChannel(user_id, profile, paths, dims, modulation)


def path_block(path: PathParams, mn: int) -> np.ndarray:
    """``h * Pi**l @ Delta**k`` (MN x MN)."""
    return path.h * delay_shift_power(mn, path.l) * doppler_phases(mn, path.k)[None, :]


def td_channel(user: UserChannel) -> ChannelMatrix:
    """Time-domain channel, shape (MN, Nt*MN); large-scale gain fixed to one."""
    d = user.dims
    mat = np.zeros((d.MN, d.Nt * d.MN), dtype=complex)
    for p in user.paths:
        mat += kron(steering_vector(p.phi, d.Nt), path_block(p, d.MN))
    return ChannelMatrix(Domain.TD, mat)


def rx_transform(side: str, dims: GridDims) -> np.ndarray:
    if side == "DD":
        return kron(dft_matrix(dims.N), np.eye(dims.M))
    if side == "TF":
        return kron(np.eye(dims.N), dft_matrix(dims.M))
    raise ValueError(f"unknown side {side!r}")


def tx_transform(side: str, dims: GridDims) -> np.ndarray:
    """Per-antenna transmit block; the full transform is ``I_Nt kron`` this."""
    return rx_transform(side, dims).conj().T


def domain_transform(domain: Domain, dims: GridDims) -> UnitaryTransform:
    rx, tx = DOMAIN_SIDES[Domain(domain)]
    return UnitaryTransform(rx_transform(rx, dims), tx_transform(tx, dims))


def _to_domain(td: ChannelMatrix, dims: GridDims, domain: Domain) -> ChannelMatrix:
    if td.domain != Domain.TD:
        raise ValueError(f"expected a TD channel, got {td.domain.value}")
    if td.mat.shape != (dims.MN, dims.Nt * dims.MN):
        raise InvalidDimensionError(f"TD channel shape {td.mat.shape} does not match {dims}")
    return ChannelMatrix(domain, domain_transform(domain, dims).apply(td.mat))


def dd_channel(td: ChannelMatrix, dims: GridDims) -> ChannelMatrix:
    return _to_domain(td, dims, Domain.DD)


def tf_channel(td: ChannelMatrix, dims: GridDims) -> ChannelMatrix:
    return _to_domain(td, dims, Domain.TF)


def cross_dd_channel(td: ChannelMatrix, dims: GridDims) -> ChannelMatrix:
    return _to_domain(td, dims, Domain.CROSS_DD)


def cross_tf_channel(td: ChannelMatrix, dims: GridDims) -> ChannelMatrix:
    return _to_domain(td, dims, Domain.CROSS_TF)


def all_domain_channels(user: UserChannel) -> dict:
    """TD channel plus its four equivalent-domain versions, keyed by Domain."""
    td = td_channel(user)
    out = {Domain.TD: td}
    for dom in DOMAIN_SIDES:
        out[dom] = _to_domain(td, user.dims, dom)
    return out


def td_gram(users) -> np.ndarray:
    """Stacked time-domain Gram ``[H_a @ H_b^H]_{a,b}``, shape (K*MN, K*MN).

    Uses the mixed-product rule ``(t kron A)(s kron B)^H = (t s^H) (A B^H)``
    so the (MN, Nt*MN) channels never need to be formed.
    """
    dims = users[0].dims
    mn = dims.MN
    thetas = [np.vstack([steering_vector(p.phi, dims.Nt) for p in u.paths]) for u in users]
    blocks = [np.stack([path_block(p, mn) for p in u.paths]) for u in users]
    K = len(users)
    out = np.empty((K * mn, K * mn), dtype=complex)
    for a in range(K):
        for b in range(a, K):
            s = thetas[a] @ thetas[b].conj().T  # (P_a, P_b) steering inner products
            ab = np.einsum("ij,ixy,jzy->xz", s, blocks[a], blocks[b].conj(), optimize=True)
            out[a * mn:(a + 1) * mn, b * mn:(b + 1) * mn] = ab
            if b != a:
                out[b * mn:(b + 1) * mn, a * mn:(a + 1) * mn] = ab.conj().T
    return out


@dataclass
class ReceivedSignal:
    total: np.ndarray
    desired: np.ndarray
    intra: np.ndarray
    inter: np.ndarray
    noise: np.ndarray


def assemble_received_signal(channels, precoders, symbols, Es, noise, groups=None) -> dict:
    """Per-user received vectors in each user's own domain, split by source.

    ``channels`` maps user id to the dict from :func:`all_domain_channels`;
    ``precoders`` is a :class:`~otfs_mimo.precoding.PrecoderSet`. User ``k``
    sees the signal of user ``k'`` through the channel whose receive side is
    ``k``'s domain and whose transmit side is ``k'``'s precoding domain.
    ``groups`` maps user id to a group label (default: the ``role`` recorded
    in the precoder set) and decides intra- versus inter-group terms.
    """
    ids = sorted(precoders.W)
    if set(ids) != set(channels) or set(ids) != set(symbols) or set(ids) != set(noise):
        raise ValueError("channels, precoders, symbols and noise must cover the same users")
    groups = groups if groups is not None else precoders.roles
    root = np.sqrt(Es)
    out = {}
    for k in ids:
        rx = precoders.side[k]
        desired = np.zeros_like(noise[k], dtype=complex)
        intra = np.zeros_like(desired)
        inter = np.zeros_like(desired)
        for kp in ids:
            h = channels[k][domain_for(rx, precoders.side[kp])].mat
            term = root * (h @ (precoders.W[kp] @ symbols[kp]))
            if kp == k:
                desired = desired + term
            elif groups[kp] == groups[k]:
                intra = intra + term
            else:
                inter = inter + term
        z = np.asarray(noise[k], dtype=complex)
        out[k] = ReceivedSignal(desired + intra + inter + z, desired, intra, inter, z)
    return out


_DUMP_FIELDS = ("user", "i", "re_h", "im_h", "l", "k", "phi")


def dump_paths(users) -> str:
    """One CSV record per path: user, i, re(h), im(h), l, k, phi."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_DUMP_FIELDS)
    for u in users:
        for i, p in enumerate(u.paths):
            w.writerow([u.user_id, i, repr(p.h.real), repr(p.h.imag), p.l, repr(p.k), repr(p.phi)])
    return buf.getvalue()


def load_paths(text: str) -> dict:
    """Inverse of :func:`dump_paths`: user id -> list of PathParams."""
    out: dict = {}
    for row in csv.DictReader(io.StringIO(text)):
        p = PathParams(complex(float(row["re_h"]), float(row["im_h"])), int(row["l"]), float(row["k"]), float(row["phi"]))
        out.setdefault(int(row["user"]), []).append(p)
    return out
