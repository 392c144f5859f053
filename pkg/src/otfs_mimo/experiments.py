"""User grouping, scenario orchestration and Monte Carlo statistics.

Randomness: user ``k`` of realization ``r`` draws from its own stream
``SeedSequence(seed, spawn_key=(stream, r, k))`` with stream 0 for SE
realizations, 1 for normalization draws and 2 for steering moments. A user's
draw does not depend on its mobility beyond the Doppler range, so scenarios
sharing a seed see the same small-scale fading.

Confidence intervals come from a delete-a-group jackknife over the
realizations (one group per realization when ``R <= 100``); the simulated SE
is a smooth function of sample means, so per-realization SE values are not
defined on their own.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import AOA_PRIORS, GridDims, cp_length, draw_user_channel, td_gram
from .linalg import symmetrize
from .precoding import domain_gram, effective_gains, estimate_zf_alpha, mrt_alpha, stack_order
from .spectral import (
    ClosedFormContext,
    MomentTable,
    SEInputs,
    alpha_se,
    estimate_steering_moments,
    se_fzf_closed,
    se_mmse_sic,
    se_mrt_low_approx,
    se_mrt_low_closed,
    se_pzf_high_approx,
    se_pzf_high_closed,
)

SCHEMES = ("FZF", "PZF_HL", "PZF_SW", "OFDM_only_FZF", "OFDM_only_PZF")
CRITERIA = ("mobility", "channel_gain")
Z95 = 1.959963984540054
MAX_JACKKNIFE_GROUPS = 100

_SE_STREAM, _NORM_STREAM, _MOMENT_STREAM = 0, 1, 2


class ConfigError(ValueError):
    """A scenario violates its invariants (dimensions, rank condition, ranges)."""


@dataclass(frozen=True)
class Scenario:
    K_h: int
    K_l: int
    scheme: str = "FZF"
    M: int = 8
    N: int = 8
    Nt: int = 100
    cp_fraction: float = 0.2
    P: int = 2
    l_max: int = 4
    k_max_high: float = 4.0
    k_max_low: float = 2.0
    aoa_prior: str = "uniform_sine"
    criterion: str = "mobility"
    K_s: int | None = None
    snr_grid_db: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    R: int = 100
    R_norm: int = 100
    moment_samples: int = 100_000
    seed: int = 0
    ridge: bool = False

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if self.K_s is None:
            object.__setattr__(self, "K_s", self.K // 2)
        if self.scheme == "PZF_HL":
            object.__setattr__(self, "criterion", "mobility")
        elif self.scheme == "PZF_SW":
            object.__setattr__(self, "criterion", "channel_gain")

    @property
    def K(self) -> int:
        return self.K_h + self.K_l

    @property
    def dims(self) -> GridDims:
        return GridDims(self.M, self.N, self.Nt, cp_length(self.cp_fraction, self.M * self.N))

    @property
    def full_zf(self) -> bool:
        return self.scheme in ("FZF", "OFDM_only_FZF")

    @property
    def ofdm_only(self) -> bool:
        return self.scheme.startswith("OFDM_only")

    @property
    def grouping(self) -> str:
        return "n/a" if self.full_zf else self.criterion

    @property
    def K_zf(self) -> int:
        if self.full_zf:
            return self.K
        return self.K_h if self.criterion == "mobility" else self.K_s

    def validate(self) -> "Scenario":
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.criterion not in CRITERIA:
            raise ConfigError(f"grouping criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.aoa_prior not in AOA_PRIORS:
            raise ConfigError(f"aoa_prior must be one of {AOA_PRIORS}, got {self.aoa_prior!r}")
        if min(self.M, self.N, self.Nt) < 1:
            raise ConfigError("M, N and Nt must be >= 1")
        if self.K_h < 0 or self.K_l < 0 or self.K < 1:
            raise ConfigError(f"need K_h, K_l >= 0 and K >= 1, got K_h={self.K_h}, K_l={self.K_l}")
        if not 0.0 <= self.cp_fraction < 1.0:
            raise ConfigError(f"cp_fraction must lie in [0, 1), got {self.cp_fraction}")
        if self.P < 1 or self.l_max < 0 or self.k_max_high < 0 or self.k_max_low < 0:
            raise ConfigError("need P >= 1, l_max >= 0 and non-negative Doppler ranges")
        if self.R < 2 or self.R_norm < 1 or self.moment_samples < 2:
            raise ConfigError("need R >= 2, R_norm >= 1 and moment_samples >= 2")
        if not self.snr_grid_db:
            raise ConfigError("snr grid is empty")
        if self.criterion == "channel_gain" and not self.full_zf and not 1 <= self.K_s < self.K:
            raise ConfigError(f"K_s must satisfy 1 <= K_s < K={self.K}, got {self.K_s}")
        # rank condition: the stacked ZF channel (K_zf*MN x Nt*MN) needs full row rank
        if self.K_zf > self.Nt:
            raise ConfigError(
                f"rank condition violated: K_zf*MN = {self.K_zf * self.M * self.N} exceeds "
                f"Nt*MN = {self.Nt * self.M * self.N}"
            )
        return self


@dataclass(frozen=True)
class GroupAssignment:
    zf_group: frozenset
    mrt_group: frozenset
    criterion: str


def group_hl(users) -> GroupAssignment:
    """ZF for high-mobility users, MRT for low-mobility users."""
    zf = frozenset(u.user_id for u in users if u.mobility == "high")
    mrt = frozenset(u.user_id for u in users if u.mobility == "low")
    return GroupAssignment(zf, mrt, "mobility")


def group_sw(users, K_s: int) -> GroupAssignment:
    """ZF for the ``K_s`` users with the largest small-scale gain ``sum_i |h_i|^2``.

    Ties go to the lower user id.
    """
    ranked = sorted(users, key=lambda u: (-u.gain, u.user_id))
    zf = frozenset(u.user_id for u in ranked[:K_s])
    mrt = frozenset(u.user_id for u in users) - zf
    return GroupAssignment(zf, mrt, "channel_gain")


def _rng(seed: int, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def draw_users(s: Scenario, stream: int, r: int) -> list:
    dims = s.dims
    users = []
    for k in range(s.K):
        high = k < s.K_h
        users.append(draw_user_channel(
            _rng(s.seed, stream, r, k),
            "high" if high else "low",
            dims,
            s.P,
            s.l_max,
            s.k_max_high if high else s.k_max_low,
            user_id=k,
            aoa_prior=s.aoa_prior,
            modulation="ofdm" if s.ofdm_only else "",
        ))
    return users


def assign(s: Scenario, users) -> GroupAssignment:
    if s.full_zf:
        return GroupAssignment(frozenset(u.user_id for u in users), frozenset(), "none")
    if s.criterion == "mobility":
        return group_hl(users)
    return group_sw(users, s.K_s)


def _gram_in_stack_order(users, zf_ids, tx_side):
    group = [u for u in users if u.user_id in zf_ids]
    order = [uid for uid, _ in stack_order(group, tx_side)]
    by_id = {u.user_id: u for u in users}
    ordered = [by_id[uid] for uid in order]
    return domain_gram(ordered, td_gram(ordered))


def estimate_alphas(s: Scenario) -> dict:
    """ZF normalization constants from ``R_norm`` dedicated draws.

    For full ZF both the DD-transmit stack ``H_H`` and the TF-transmit stack
    ``H_L`` are evaluated on the same draws and must agree within 2%.
    """
    dims = s.dims
    out = {"MRT": mrt_alpha(s.Nt)}
    if s.K_zf == 0:
        return out
    cache = {}

    def draw(r):
        if r not in cache:
            cache.clear()
            users = draw_users(s, _NORM_STREAM, r)
            cache[r] = (users, assign(s, users).zf_group)
        return cache[r]

    def gram_for(side):
        return lambda r: _gram_in_stack_order(*draw(r), side)

    ctx = f"scenario {s.scheme} K_h={s.K_h} K_l={s.K_l} seed={s.seed}"
    if s.full_zf:
        a_h = estimate_zf_alpha(gram_for("DD"), s.K, dims.MN, s.R_norm, gram=True, ridge=s.ridge, context=ctx)
        a_l = estimate_zf_alpha(gram_for("TF"), s.K, dims.MN, s.R_norm, gram=True, ridge=s.ridge, context=ctx)
        if abs(a_h - a_l) > 0.02 * max(a_h, a_l):
            raise ArithmeticError(f"alpha_FZF,H={a_h:.6g} and alpha_FZF,L={a_l:.6g} disagree by more than 2%")
        out.update({"FZF": a_h, "FZF_H": a_h, "FZF_L": a_l})
    else:
        side = "TF" if s.ofdm_only else "DD"
        out["PZF"] = estimate_zf_alpha(gram_for(side), s.K_zf, dims.MN, s.R_norm, gram=True,
                                       ridge=s.ridge, context=ctx)
    return out


@dataclass
class Realization:
    """Per-user effective channels of one draw (``sqrt(Es)`` not applied)."""

    own: np.ndarray        # (K, MN, MN)  H_k W_k
    second: np.ndarray     # (K, MN, MN)  sum_k' H_k W_k' (H_k W_k')^H
    zf_leak: np.ndarray    # (K, MN, MN)  same sum restricted to ZF-group k' != k
    in_zf: np.ndarray      # (K,) bool
    gains: np.ndarray      # (K, K, MN, MN) kept only on request


def simulate_realization(s: Scenario, r: int, alphas: dict, *, keep_gains=False) -> Realization:
    users = draw_users(s, _SE_STREAM, r)
    ga = assign(s, users)
    mn = s.dims.MN
    cl = domain_gram(users, td_gram(users))
    zf_idx = sorted(ga.zf_group)
    mrt_idx = sorted(ga.mrt_group)
    a_zf = alphas.get("FZF" if s.full_zf else "PZF", 0.0)
    E = effective_gains(cl, mn, zf_idx, mrt_idx, a_zf, alphas["MRT"], ridge=s.ridge,
                        context=f"scenario {s.scheme} seed={s.seed} realization {r}")
    K = s.K
    own = np.stack([E[k, k] for k in range(K)])
    second = np.einsum("kqij,kqlj->kil", E, E.conj())
    mask = np.zeros(K, dtype=bool)
    mask[zf_idx] = True
    zf_leak = np.zeros_like(second)
    for k in range(K):
        sel = mask.copy()
        sel[k] = False
        if sel.any():
            zf_leak[k] = np.einsum("qij,qlj->il", E[k, sel], E[k, sel].conj())
    return Realization(own, second, zf_leak, mask, E if keep_gains else None)


@dataclass
class ScenarioResult:
    scenario: Scenario
    mobility: list
    modulation: list
    roles: list
    se_sim: np.ndarray          # (K, S)
    se_closed: np.ndarray       # (K, S), nan where no closed form
    se_approx: np.ndarray       # (K, S), nan where no approximation
    ci95: np.ndarray            # (K, S) jackknife half-widths
    se_loo: np.ndarray = field(repr=False)    # (K, S, B) delete-a-group replicates
    inputs: list = field(repr=False, default_factory=list)  # [S][K] SEInputs
    alphas: dict = field(default_factory=dict)
    moments: MomentTable | None = None
    zf_frequency: np.ndarray | None = None
    runtime_s: float = 0.0

    @property
    def snr_db(self):
        return self.scenario.snr_grid_db

    def users_in(self, group: str) -> list:
        """User indices with mobility ``group`` ("high"/"low") or role ("zf"/"mrt")."""
        if group in ("high", "low"):
            return [k for k, m in enumerate(self.mobility) if m == group]
        return [k for k, r in enumerate(self.roles) if r == group]

    def _jack(self, est: float, reps: np.ndarray) -> tuple:
        B = reps.size
        var = (B - 1) / B * np.sum((reps - reps.mean()) ** 2)
        return float(est), float(Z95 * np.sqrt(var))

    def group_mean(self, group: str, j: int) -> tuple:
        """(mean per-user SE, 95% half-width) of a user group at SNR index ``j``."""
        ks = self.users_in(group)
        if not ks:
            raise ValueError(f"no users in group {group!r}")
        return self._jack(self.se_sim[ks, j].mean(), self.se_loo[ks, j].mean(axis=0))

    def gap(self, j: int, a: str = "high", b: str = "low") -> tuple:
        """Difference of group means with a jackknife half-width."""
        ka, kb = self.users_in(a), self.users_in(b)
        est = self.se_sim[ka, j].mean() - self.se_sim[kb, j].mean()
        reps = self.se_loo[ka, j].mean(axis=0) - self.se_loo[kb, j].mean(axis=0)
        return self._jack(est, reps)


def _se_from_sums(s1, s2, n, Es, a_se):
    mn = s1.shape[0]
    dbar = np.sqrt(Es) * s1 / n
    psi = symmetrize(np.eye(mn) + Es * (s2 / n) - dbar @ dbar.conj().T)
    inp = SEInputs(dbar, psi, a_se)
    return se_mmse_sic(inp), inp


def run_scenario(s: Scenario, *, threads: int = 1) -> ScenarioResult:
    """Monte Carlo SE of every user over the SNR grid, plus closed forms.

    One realization set is drawn and shared by all SNR points; normalization
    constants come from a separate set of ``R_norm`` draws and stay fixed.
    """
    s.validate()
    t0 = time.perf_counter()
    dims = s.dims
    mn, K, R = dims.MN, s.K, s.R
    alphas = estimate_alphas(s)

    B = min(R, MAX_JACKKNIFE_GROUPS)
    group_of = np.concatenate([np.full(len(ix), g) for g, ix in enumerate(np.array_split(np.arange(R), B))])
    g_own = np.zeros((B, K, mn, mn), dtype=complex)
    g_second = np.zeros((B, K, mn, mn), dtype=complex)
    g_count = np.bincount(group_of, minlength=B).astype(float)
    leak_sum = np.zeros((K, mn, mn), dtype=complex)
    zf_count = np.zeros(K)

    def work(r):
        return simulate_realization(s, r, alphas)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reals = pool.map(work, range(R))
            _reduce(reals, group_of, g_own, g_second, leak_sum, zf_count)
    else:
        _reduce(map(work, range(R)), group_of, g_own, g_second, leak_sum, zf_count)

    users = draw_users(s, _SE_STREAM, 0)
    mobility = [u.mobility for u in users]
    modulation = [u.modulation for u in users]
    if s.full_zf:
        roles = ["zf"] * K
    elif s.criterion == "mobility":
        roles = ["zf" if m == "high" else "mrt" for m in mobility]
    else:
        roles = ["n/a"] * K

    tot_own, tot_second = g_own.sum(axis=0), g_second.sum(axis=0)
    S = len(s.snr_grid_db)
    se_sim = np.zeros((K, S))
    se_loo = np.zeros((K, S, B))
    inputs = []
    for j, snr in enumerate(s.snr_grid_db):
        Es = 10.0 ** (snr / 10.0)
        row = []
        for k in range(K):
            a_se = alpha_se(dims, modulation[k])
            se_sim[k, j], inp = _se_from_sums(tot_own[k], tot_second[k], R, Es, a_se)
            row.append(inp)
            for g in range(B):
                se_loo[k, j, g], _ = _se_from_sums(tot_own[k] - g_own[g, k], tot_second[k] - g_second[g, k],
                                                   R - g_count[g], Es, a_se)
        inputs.append(row)
    reps_mean = se_loo.mean(axis=2)
    ci95 = Z95 * np.sqrt((B - 1) / B * np.sum((se_loo - reps_mean[..., None]) ** 2, axis=2))

    se_closed = np.full((K, S), np.nan)
    se_approx = np.full((K, S), np.nan)
    moments = None
    if s.full_zf:
        for j, snr in enumerate(s.snr_grid_db):
            Es = 10.0 ** (snr / 10.0)
            for k in range(K):
                se_closed[k, j] = se_fzf_closed(Es, alphas["FZF"], dims, modulation[k])
    elif s.criterion == "mobility":
        moments = estimate_steering_moments(_rng(s.seed, _MOMENT_STREAM), s.Nt, s.P, s.moment_samples, s.aoa_prior)
        high_mod = "ofdm" if s.ofdm_only else "otfs"
        for j, snr in enumerate(s.snr_grid_db):
            Es = 10.0 ** (snr / 10.0)
            ctx = ClosedFormContext(Es, alphas.get("PZF", 0.0), alphas["MRT"], s.Nt, s.P, s.K_h, s.K_l,
                                    moments, dims, high_modulation=high_mod)
            for k in range(K):
                if mobility[k] == "high":
                    se_closed[k, j] = se_pzf_high_closed(ctx)
                    se_approx[k, j] = se_pzf_high_approx(Es, ctx.alpha_pzf, ctx.alpha_mrt, s.K_l, s.Nt,
                                                         dims.rate_factor(high_mod))
                else:
                    inter = Es * leak_sum[k] / R / max(s.K_h, 1)
                    se_closed[k, j] = se_mrt_low_closed(ctx, inter)
                    se_approx[k, j] = se_mrt_low_approx(ctx, inter)

    return ScenarioResult(
        scenario=s,
        mobility=mobility,
        modulation=modulation,
        roles=roles,
        se_sim=se_sim,
        se_closed=se_closed,
        se_approx=se_approx,
        ci95=ci95,
        se_loo=se_loo,
        inputs=inputs,
        alphas=alphas,
        moments=moments,
        zf_frequency=zf_count / R,
        runtime_s=time.perf_counter() - t0,
    )


def _reduce(reals, group_of, g_own, g_second, leak_sum, zf_count):
    # fixed realization order keeps the floating-point sums reproducible
    for r, real in enumerate(reals):
        g = group_of[r]
        g_own[g] += real.own
        g_second[g] += real.second
        leak_sum += real.zf_leak
        zf_count += real.in_zf


def sweep_kh(base: Scenario, kh_values, *, threads: int = 1) -> list:
    """PZF with HL grouping for each split ``K_h + K_l = K``; the seed is shared."""
    K = base.K
    out = []
    for kh in kh_values:
        if not 0 <= kh <= K:
            raise ConfigError(f"K_h={kh} outside 0..{K}")
        s = dataclasses.replace(base, scheme="PZF_HL", K_h=kh, K_l=K - kh)
        out.append(run_scenario(s, threads=threads))
    return out


def ofdm_baseline(s: Scenario, *, threads: int = 1) -> ScenarioResult:
    """Same pipeline with every user on OFDM (TF domain, CP penalty for all)."""
    if s.full_zf:
        scheme, criterion = "OFDM_only_FZF", s.criterion
    else:
        scheme, criterion = "OFDM_only_PZF", s.criterion
    return run_scenario(dataclasses.replace(s, scheme=scheme, criterion=criterion), threads=threads)
