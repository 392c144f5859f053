"""MMSE-SIC spectral efficiency: Monte Carlo evaluation and closed forms.

The simulated SE of user ``k`` is

    SE_k = alpha_SE * log2 det(I + Dbar^H Psi^-1 Dbar),
    Psi  = I + E{sum_k' D_kk' D_kk'^H} - Dbar Dbar^H,

with ``D_kk' = sqrt(Es) H_k W_k'`` and ``alpha_SE`` equal to ``1/MN`` for
OTFS users and ``(MN - Lcp)/MN**2`` for OFDM users.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import GridDims, draw_aoa
from .linalg import SingularGramError, hermitian_solve, logdet_hermitian, symmetrize


@dataclass
class SEInputs:
    Dbar: np.ndarray
    Psi: np.ndarray
    alpha_se: float


def se_mmse_sic(inputs: SEInputs) -> float:
    mn = inputs.Dbar.shape[0]
    try:
        x = hermitian_solve(inputs.Psi, inputs.Dbar, context="interference-plus-noise covariance")
    except SingularGramError as exc:
        raise SingularGramError(f"Psi is not positive definite: {exc}") from exc
    a = np.eye(mn) + inputs.Dbar.conj().T @ x
    return max(inputs.alpha_se * logdet_hermitian(a), 0.0)


def alpha_se(dims: GridDims, modulation: str) -> float:
    return dims.rate_factor(modulation) / dims.MN


def accumulate_psi(realizations, k: int, alpha_se: float) -> SEInputs:
    """Sample ``Dbar`` and ``Psi`` for user at position ``k``.

    Each realization is an array (K, MN, MN) holding ``D_kk'`` for every
    ``k'`` (``sqrt(Es)`` already applied).
    """
    realizations = [np.asarray(r) for r in realizations]
    if not realizations:
        raise ValueError("need at least one realization")
    mn = realizations[0].shape[-1]
    dbar = np.mean([r[k] for r in realizations], axis=0)
    second = np.mean([np.einsum("kij,klj->il", r, r.conj()) for r in realizations], axis=0)
    psi = symmetrize(np.eye(mn) + second - dbar @ dbar.conj().T)
    return SEInputs(dbar, psi, alpha_se)


def se_fzf_closed(Es: float, alpha_fzf: float, dims: GridDims, modulation: str) -> float:
    return dims.rate_factor(modulation) * float(np.log2(1.0 + alpha_fzf ** 2 * Es))


@dataclass(frozen=True)
class MomentTable:
    """Second moments ``E|theta_a theta_b^H|^2`` of ULA steering rows."""

    Nt: int
    same_path: float
    same_user_cross_path: float
    cross_user: float
    n_samples: int = 0


def _pair_moment(u: np.ndarray, Nt: int, chunk: int = 8192) -> float:
    # U-statistic over all ordered pairs a != b of |theta_a theta_b^H|^2, using
    # sum_{a,b} |theta_a theta_b^H|^2 = sum_d (Nt - |d|) |sum_a exp(-j pi d u_a)|^2
    n = u.size
    if n < 2:
        raise ValueError("need at least two samples for a pair moment")
    d = np.arange(1, Nt)
    c = np.zeros(Nt - 1, dtype=complex)
    for start in range(0, n, chunk):
        c += np.exp(-1j * np.pi * np.outer(u[start:start + chunk], d)).sum(axis=0)
    total = Nt * float(n) ** 2 + 2.0 * np.sum((Nt - d) * np.abs(c) ** 2)
    return float((total - n * Nt ** 2) / (n * (n - 1.0)))


def estimate_steering_moments(rng: np.random.Generator, Nt: int, P: int, n_samples: int,
                              prior: str = "uniform_angle") -> MomentTable:
    """Monte Carlo steering moments under the AoA prior.

    Paths of one user and paths of different users have independent AoAs, so
    both off-diagonal moments are pair averages over i.i.d. draws; they are
    taken from two separate sample sets. The same-path value is exactly Nt^2.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if Nt == 1:
        return MomentTable(1, 1.0, 1.0, 1.0, n_samples)
    n = max(n_samples, 2)
    cross = _pair_moment(np.sin(draw_aoa(rng, n, prior)), Nt)
    same = _pair_moment(np.sin(draw_aoa(rng, n, prior)), Nt) if P > 1 else float(Nt ** 2)
    return MomentTable(Nt, float(Nt ** 2), same, cross, n_samples)


@dataclass
class ClosedFormContext:
    Es: float
    alpha_pzf: float
    alpha_mrt: float
    Nt: int
    P: int
    K_h: int
    K_l: int
    moments: MomentTable
    dims: GridDims
    high_modulation: str = "otfs"
    low_modulation: str = "ofdm"


def se_pzf_high_closed(ctx: ClosedFormContext) -> float:
    """ZF-group user under HL grouping; MRT leakage enters through the cross-user moment."""
    P = ctx.P
    leak = ctx.K_l * ctx.Es * ctx.alpha_mrt ** 2 / P ** 2 * (P * P * ctx.moments.cross_user)
    sinr = ctx.Es * ctx.alpha_pzf ** 2 / (1.0 + leak)
    return ctx.dims.rate_factor(ctx.high_modulation) * float(np.log2(1.0 + sinr))


def se_pzf_high_approx(Es: float, alpha_pzf: float, alpha_mrt: float, K_l: int, Nt: int,
                       rate_factor: float = 1.0) -> float:
    sinr = Es * alpha_pzf ** 2 / (1.0 + K_l * Es * alpha_mrt ** 2 * Nt)
    return rate_factor * float(np.log2(1.0 + sinr))


def _mrt_se(ctx: ClosedFormContext, inner: np.ndarray) -> float:
    # log det(I + c X^-1) = log det(X + c I) - log det(X)
    mn = inner.shape[0]
    c = ctx.Es * ctx.Nt
    try:
        base = logdet_hermitian(inner)
    except SingularGramError as exc:
        raise SingularGramError("MRT interference matrix is not positive definite; "
                                "closed-form context is inconsistent") from exc
    se = alpha_se(ctx.dims, ctx.low_modulation) * (logdet_hermitian(inner + c * np.eye(mn)) - base)
    return max(se, 0.0)


def se_mrt_low_closed(ctx: ClosedFormContext, inter_term: np.ndarray) -> float:
    """MRT-group user under HL grouping.

    ``inter_term`` is the sample mean of ``D_{kl,kh'} D_{kl,kh'}^H`` for one
    ZF interferer (Es included); it is scaled by ``K_h`` here.
    """
    P, Nt, Es, a2 = ctx.P, ctx.Nt, ctx.Es, ctx.alpha_mrt ** 2
    m = ctx.moments
    self_term = Es * a2 * ((P + 1) / P * Nt ** 2 + (P * (P - 1)) / P ** 2 * m.same_user_cross_path)
    intra_term = Es * a2 / P ** 2 * max(ctx.K_l - 1, 0) * (P * P * m.cross_user)
    mn = ctx.dims.MN
    inner = (1.0 - Es * Nt + self_term + intra_term) * np.eye(mn) + ctx.K_h * np.asarray(inter_term)
    return _mrt_se(ctx, symmetrize(inner))


def mrt_psi(ctx: ClosedFormContext) -> float:
    Nt, Es = ctx.Nt, ctx.Es
    return 1.0 + (Nt + (Nt - 1) / ctx.P + ctx.K_l) * Es * ctx.alpha_mrt ** 2 * Nt - Es * Nt


def se_mrt_low_approx(ctx: ClosedFormContext, inter_term: np.ndarray) -> float:
    mn = ctx.dims.MN
    inner = ctx.K_h * np.asarray(inter_term) + mrt_psi(ctx) * np.eye(mn)
    return _mrt_se(ctx, symmetrize(inner))
