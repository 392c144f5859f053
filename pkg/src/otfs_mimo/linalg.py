"""Dense complex linear-algebra kernels for delay-Doppler channel models.

Everything here returns plain ``numpy`` arrays of dtype ``complex128``; the
functions are pure and safe to call from concurrent realization workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.linalg import lapack

COND_LIMIT = 1e12


class InvalidDimensionError(ValueError):
    """A matrix dimension or index is out of its admissible range."""


class SingularGramError(np.linalg.LinAlgError):
    """A Gram matrix is not positive definite or is too ill-conditioned."""


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix with entries ``exp(-2j*pi*p*q/n)/sqrt(n)``."""
    if n < 1:
        raise InvalidDimensionError(f"DFT size must be >= 1, got {n}")
    p = np.arange(n)
    # reduce pq mod n before scaling so large products keep full phase accuracy
    return np.exp(-2j * np.pi * (np.outer(p, p) % n) / n) / np.sqrt(n)


def kron(a, b) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a))
    b = np.atleast_2d(np.asarray(b))
    if a.size == 0 or b.size == 0:
        raise InvalidDimensionError("Kronecker operands must be non-empty")
    return np.kron(a, b)


def delay_shift_power(mn: int, l: int) -> np.ndarray:
    """Power ``l`` of the forward cyclic shift ``circ([0, 1, 0, ..., 0])``.

    Column ``n`` of the result is the basis vector ``e_{(n + l) mod mn}``.
    """
    if mn < 1:
        raise InvalidDimensionError(f"mn must be >= 1, got {mn}")
    if l < 0 or int(l) != l:
        raise InvalidDimensionError(f"delay index must be a non-negative integer, got {l}")
    out = np.zeros((mn, mn), dtype=complex)
    cols = np.arange(mn)
    out[(cols + int(l)) % mn, cols] = 1.0
    return out


def doppler_diag_power(mn: int, kappa: float) -> np.ndarray:
    """``diag(exp(2j*pi*kappa*n/mn))`` for ``n = 0..mn-1``; kappa may be fractional."""
    if mn < 1:
        raise InvalidDimensionError(f"mn must be >= 1, got {mn}")
    return np.diag(doppler_phases(mn, kappa))


def doppler_phases(mn: int, kappa: float) -> np.ndarray:
    return np.exp(2j * np.pi * kappa * np.arange(mn) / mn)


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def _cholesky(g: np.ndarray, context: str | None):
    where = f" ({context})" if context else ""
    try:
        c, lower = sla.cho_factor(g, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise SingularGramError(f"Gram matrix is not positive definite{where}") from exc
    return c, lower


def hermitian_solve(
    g: np.ndarray,
    b: np.ndarray,
    *,
    ridge: bool = False,
    cond_limit: float = COND_LIMIT,
    context: str | None = None,
) -> np.ndarray:
    """Solve ``g @ x = b`` for Hermitian positive definite ``g``.

    ``g`` is symmetrized before a Cholesky factorization. An LAPACK
    reciprocal-condition estimate above ``cond_limit`` raises
    :class:`SingularGramError`; with ``ridge=True`` the diagonal is loaded
    with ``1e-10 * trace(g) / dim`` first instead.
    """
    g = np.asarray(g, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise InvalidDimensionError(f"Gram must be square, got shape {g.shape}")
    if b.shape[0] != g.shape[0]:
        raise InvalidDimensionError(f"right-hand side has {b.shape[0]} rows, Gram has {g.shape[0]}")
    g = symmetrize(g)
    if ridge:
        dim = g.shape[0]
        g = g + (1e-10 * np.trace(g).real / dim) * np.eye(dim)
    c, lower = _cholesky(g, context)
    anorm = np.linalg.norm(g, 1)
    rcond, info = lapack.zpocon(c, anorm, uplo="L")
    if info != 0 or rcond * cond_limit < 1.0:
        where = f" ({context})" if context else ""
        raise SingularGramError(
            f"Gram condition estimate {1.0 / max(rcond, 1e-300):.3g} exceeds {cond_limit:.0e}{where}"
        )
    return sla.cho_solve((c, lower), b)


def logdet_hermitian(a: np.ndarray) -> float:
    """``log2 det(a)`` for Hermitian positive definite ``a`` via Cholesky."""
    a = symmetrize(np.asarray(a, dtype=complex))
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise SingularGramError("matrix is not Hermitian positive definite") from exc
    return float(2.0 * np.sum(np.log2(np.diag(c).real)))


@dataclass(frozen=True)
class UnitaryTransform:
    """Receive/transmit domain sandwich ``left @ H @ (I_Nt kron right)``.

    ``right`` is the per-antenna block; the full transmit-side transform is
    block diagonal and is applied by reshaping rather than materialized.
    """

    left: np.ndarray
    right: np.ndarray

    def apply(self, h: np.ndarray) -> np.ndarray:
        rows, cols = h.shape
        blk = self.right.shape[0]
        if cols % blk:
            raise InvalidDimensionError(f"{cols} columns is not a multiple of block size {blk}")
        out = (h.reshape(rows, cols // blk, blk) @ self.right).reshape(rows, cols)
        return self.left @ out

    def is_unitary(self, tol: float = 1e-10) -> bool:
        for u in (self.left, self.right):
            eye = np.eye(u.shape[0])
            if np.linalg.norm(u @ u.conj().T - eye) > tol * np.linalg.norm(eye):
                return False
        return True
