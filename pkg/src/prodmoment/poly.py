"""Sparse multivariate polynomials in the Chebyshev and monomial bases.

A polynomial is an immutable map from multi-indices (tuples of ``D``
non-negative integers) to real coefficients.  Terms are kept in sorted
lexicographic order so iteration, serialization and everything derived from
it (objective gradients, constraint layouts) are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

DROP_TOL = 1e-14


class Basis(str, Enum):
    CHEBYSHEV = "chebyshev"
    MONOMIAL = "monomial"


class PolyFormatError(ValueError):
    """Malformed polynomial text; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


MultiIndex = tuple[int, ...]


@dataclass(frozen=True)
class SparseChebPoly:
    """Sparse polynomial ``sum_n p_n prod_i B_{n_i}(x_i)``.

    Parameters
    ----------
    dimension : int
        Number of variables ``D``.
    terms : mapping
        Multi-index -> coefficient.  Coefficients with magnitude below
        ``DROP_TOL`` are discarded.
    basis : Basis
        Chebyshev (the working basis) or monomial.
    """

    dimension: int
    terms: Mapping[MultiIndex, float]
    basis: Basis = Basis.CHEBYSHEV
    per_var_degree: int = field(init=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        clean: dict[MultiIndex, float] = {}
        for key, coef in self.terms.items():
            idx = tuple(int(k) for k in key)
            if len(idx) != self.dimension:
                raise ValueError(
                    f"multi-index {idx} has {len(idx)} entries, expected {self.dimension}"
                )
            if any(k < 0 for k in idx):
                raise ValueError(f"negative entry in multi-index {idx}")
            if abs(coef) >= DROP_TOL:
                clean[idx] = float(coef)
        ordered = dict(sorted(clean.items()))
        object.__setattr__(self, "terms", ordered)
        object.__setattr__(self, "basis", Basis(self.basis))
        degree = max((max(idx) for idx in ordered), default=0)
        object.__setattr__(self, "per_var_degree", degree)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def index_array(self) -> np.ndarray:
        """Multi-indices stacked into an ``(N, D)`` integer array."""
        if not self.terms:
            return np.zeros((0, self.dimension), dtype=np.int64)
        return np.array(list(self.terms), dtype=np.int64)

    def coef_array(self) -> np.ndarray:
        return np.array(list(self.terms.values()), dtype=float)

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def __add__(self, other: SparseChebPoly) -> SparseChebPoly:
        _check_compatible(self, other)
        out = dict(self.terms)
        for idx, c in other.terms.items():
            out[idx] = out.get(idx, 0.0) + c
        return SparseChebPoly(self.dimension, out, self.basis)

    def scale(self, factor: float) -> SparseChebPoly:
        return SparseChebPoly(
            self.dimension, {k: factor * v for k, v in self.terms.items()}, self.basis
        )

    def __mul__(self, other: SparseChebPoly) -> SparseChebPoly:
        return cheb_mul(self, other)


def _check_compatible(a: SparseChebPoly, b: SparseChebPoly) -> None:
    if a.dimension != b.dimension:
        raise ValueError(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    if a.basis != b.basis:
        raise ValueError(f"basis mismatch: {a.basis.value} vs {b.basis.value}")


def cheb_eval_1d(n: int, x):
    """Chebyshev polynomial ``T_n(x)`` by the three-term recurrence.

    Works elementwise on arrays and for ``|x| > 1``.
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    x = np.asarray(x, dtype=float)
    t_prev, t = np.ones_like(x), x
    if n == 0:
        return t_prev if t_prev.ndim else float(t_prev)
    for _ in range(n - 1):
        t_prev, t = t, 2.0 * x * t - t_prev
    return t if t.ndim else float(t)


def cheb_table(x, degree: int) -> np.ndarray:
    """Values ``T_0(x) .. T_degree(x)`` stacked along the last axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree >= 1:
        out[..., 1] = x
    for k in range(2, degree + 1):
        out[..., k] = 2.0 * x * out[..., k - 1] - out[..., k - 2]
    return out


def evaluate(p: SparseChebPoly, x) -> float:
    """Evaluate ``p`` at a single point ``x`` of length ``D``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.dimension,):
        raise ValueError(f"point has shape {x.shape}, expected ({p.dimension},)")
    if not p.terms:
        return 0.0
    deg = p.per_var_degree
    if p.basis is Basis.CHEBYSHEV:
        table = cheb_table(x, deg)
    else:
        table = x[:, None] ** np.arange(deg + 1)
    idx = p.index_array()
    factors = table[np.arange(p.dimension), idx]
    return float(p.coef_array() @ np.prod(factors, axis=1))


def _mul_1d(m: int, n: int) -> tuple[tuple[int, float], ...]:
    # T_m T_n = (T_{m+n} + T_{|m-n|}) / 2
    if m == 0:
        return ((n, 1.0),)
    if n == 0:
        return ((m, 1.0),)
    if m == n:
        return ((2 * m, 0.5), (0, 0.5))
    return ((m + n, 0.5), (abs(m - n), 0.5))


def cheb_mul(a: SparseChebPoly, b: SparseChebPoly) -> SparseChebPoly:
    """Exact product of two Chebyshev-basis polynomials."""
    _check_compatible(a, b)
    if a.basis is not Basis.CHEBYSHEV:
        raise ValueError("cheb_mul requires the Chebyshev basis")
    out: dict[MultiIndex, float] = {}
    for ia, ca in a.terms.items():
        for ib, cb in b.terms.items():
            partial: list[tuple[MultiIndex, float]] = [((), ca * cb)]
            for m, n in zip(ia, ib):
                pieces = _mul_1d(m, n)
                partial = [(k + (j,), c * w) for k, c in partial for j, w in pieces]
            for k, c in partial:
                out[k] = out.get(k, 0.0) + c
    return SparseChebPoly(a.dimension, out, Basis.CHEBYSHEV)


def _power_in_cheb(k: int) -> dict[int, float]:
    """Chebyshev coefficients of ``x**k``: ``2^{1-k} sum_j C(k, j) T_{k-2j}``."""
    if k == 0:
        return {0: 1.0}
    out: dict[int, float] = {}
    scale = 2.0 ** (1 - k)
    for j in range(k // 2 + 1):
        deg = k - 2 * j
        w = math.comb(k, j) * scale
        if deg == 0:
            w *= 0.5
        out[deg] = out.get(deg, 0.0) + w
    return out


def monomial_to_cheb(p: SparseChebPoly) -> SparseChebPoly:
    """Change a monomial-basis polynomial to the Chebyshev basis."""
    if p.basis is not Basis.MONOMIAL:
        raise ValueError("input must be in the monomial basis")
    cache: dict[int, dict[int, float]] = {}
    out: dict[MultiIndex, float] = {}
    for idx, coef in p.terms.items():
        partial: list[tuple[MultiIndex, float]] = [((), coef)]
        for k in idx:
            if k not in cache:
                cache[k] = _power_in_cheb(k)
            partial = [(key + (j,), c * w) for key, c in partial for j, w in cache[k].items()]
        for key, c in partial:
            out[key] = out.get(key, 0.0) + c
    return SparseChebPoly(p.dimension, out, Basis.CHEBYSHEV)


def to_chebyshev(p: SparseChebPoly) -> SparseChebPoly:
    return p if p.basis is Basis.CHEBYSHEV else monomial_to_cheb(p)


def _unit(dim: int, i: int, k: int) -> MultiIndex:
    idx = [0] * dim
    idx[i] = k
    return tuple(idx)


def family1(dim: int) -> SparseChebPoly:
    """``(1/D) sum_i T_2(x_i) - prod_i T_8(x_i)``; global minimum -2 at the origin."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    terms = {_unit(dim, i, 2): 1.0 / dim for i in range(dim)}
    terms[(8,) * dim] = terms.get((8,) * dim, 0.0) - 1.0
    return SparseChebPoly(dim, terms)


def family2(dim: int) -> SparseChebPoly:
    """``(1/D) sum_i T_4(x_i) + ((1/D) sum_i T_1(x_i))**3``.

    The cube is expanded with :func:`cheb_mul`.
    """
    if dim < 1:
        raise ValueError("dimension must be positive")
    quartic = SparseChebPoly(dim, {_unit(dim, i, 4): 1.0 / dim for i in range(dim)})
    mean = SparseChebPoly(dim, {_unit(dim, i, 1): 1.0 / dim for i in range(dim)})
    return quartic + cheb_mul(cheb_mul(mean, mean), mean)


FAMILY1_VALUE = -2.0
FAMILY2_VALUE = -1.3911
FAMILY2_COORD = -0.75553


def family1_minimizer(dim: int) -> np.ndarray:
    return np.zeros(dim)


def family2_minimizer(dim: int) -> np.ndarray:
    return np.full(dim, FAMILY2_COORD)


def serialize(p: SparseChebPoly) -> str:
    lines = [f"poly {p.dimension} {p.basis.value}"]
    for idx, coef in p.terms.items():
        lines.append(" ".join([repr(coef)] + [str(k) for k in idx]))
    return "\n".join(lines) + "\n"


def parse(text: str) -> SparseChebPoly:
    """Parse the line-oriented text format produced by :func:`serialize`."""
    header: tuple[int, Basis] | None = None
    terms: dict[MultiIndex, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if header is None:
            if len(fields) != 3 or fields[0] != "poly":
                raise PolyFormatError("expected header 'poly <D> <chebyshev|monomial>'", lineno)
            try:
                dim = int(fields[1])
                basis = Basis(fields[2].lower())
            except ValueError as exc:
                raise PolyFormatError(f"bad header: {exc}", lineno) from None
            if dim < 1:
                raise PolyFormatError("dimension must be positive", lineno)
            header = (dim, basis)
            continue
        dim = header[0]
        if len(fields) != dim + 1:
            raise PolyFormatError(
                f"expected 1 coefficient and {dim} indices, got {len(fields)} fields", lineno
            )
        try:
            coef = float(fields[0])
            idx = tuple(int(f) for f in fields[1:])
        except ValueError:
            raise PolyFormatError(f"cannot parse term {line!r}", lineno) from None
        if not math.isfinite(coef):
            raise PolyFormatError("non-finite coefficient", lineno)
        if any(k < 0 for k in idx):
            raise PolyFormatError("negative index", lineno)
        if idx in terms:
            raise PolyFormatError(f"duplicate multi-index {idx}", lineno)
        terms[idx] = coef
    if header is None:
        raise PolyFormatError("missing header")
    return SparseChebPoly(header[0], terms, header[1])


def load(path: str | Path) -> SparseChebPoly:
    return parse(Path(path).read_text(encoding="utf-8"))


def save(p: SparseChebPoly, path: str | Path) -> None:
    Path(path).write_text(serialize(p), encoding="utf-8")
