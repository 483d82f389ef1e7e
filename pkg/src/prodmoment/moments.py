"""Chebyshev moments of 1D measures on [-1, 1] and their moment matrices."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .poly import cheb_table


@lru_cache(maxsize=None)
def moment_matrix_map(d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Linear map from a moment vector to the upper triangle of its matrix.

    Returns ``(rows, cols, A)`` where ``rows[j] <= cols[j]`` enumerate the
    upper triangle row by row and ``A`` has shape ``(n_upper, 2d+1)`` with
    ``A @ mu == M[rows, cols]``.
    """
    rows, cols = np.triu_indices(d + 1)
    a = np.zeros((rows.size, 2 * d + 1))
    np.add.at(a, (np.arange(rows.size), rows + cols), 0.5)
    np.add.at(a, (np.arange(rows.size), np.abs(rows - cols)), 0.5)
    for arr in (rows, cols, a):
        arr.setflags(write=False)
    return rows, cols, a


def assemble_moment_matrix(mu, d: int) -> np.ndarray:
    """``(d+1) x (d+1)`` matrix with entries ``mu[m+n]/2 + mu[|m-n|]/2``."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape[-1] < 2 * d + 1:
        raise ValueError(f"moment vector has length {mu.shape[-1]}, need {2 * d + 1}")
    m = np.arange(d + 1)
    return 0.5 * mu[..., m[:, None] + m[None, :]] + 0.5 * mu[..., np.abs(m[:, None] - m[None, :])]


def min_eigenvalue(matrix) -> float:
    return float(np.linalg.eigvalsh(np.asarray(matrix, dtype=float))[0])


def delta_moments(x: float, d: int) -> np.ndarray:
    """Chebyshev moments ``T_k(x)``, ``k = 0..2d``, of the point mass at ``x``."""
    if not -1.0 <= x <= 1.0:
        raise ValueError(f"point {x} lies outside [-1, 1]")
    return cheb_table(float(x), 2 * d)


def psd_factor(matrix, rank: int | None = None) -> np.ndarray:
    """Factor ``R`` with ``R @ R.T ~= matrix``, negative eigenvalues clipped.

    With ``rank`` smaller than the matrix order the leading eigenpairs are
    kept.
    """
    matrix = np.asarray(matrix, dtype=float)
    w, v = np.linalg.eigh(0.5 * (matrix + matrix.T))
    w = np.clip(w, 0.0, None)
    factor = v * np.sqrt(w)
    if rank is None:
        return factor
    return factor[:, ::-1][:, :rank]


def tail_bound(alpha: float, L: int, d: int, max_coef: float) -> float:
    """``(d+1) max|p_j| / (alpha (1+alpha)^(2L-(d+1)))``.

    Bounds how much of ``int p dmu`` a pseudo-measure with a PSD order-``L``
    moment matrix and ``|mu_k| <= 1`` can carry outside
    ``[-1-alpha, 1+alpha]``, for ``p`` of degree ``d``.  ``L`` here is the
    moment-matrix order, not the number of product measures.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not 2 * L > d >= 0:
        raise ValueError("requires 2L > d >= 0")
    if max_coef < 0:
        raise ValueError("max_coef must be non-negative")
    return (d + 1) * max_coef / (alpha * (1.0 + alpha) ** (2 * L - (d + 1)))
