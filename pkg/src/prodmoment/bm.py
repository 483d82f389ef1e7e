"""Burer-Monteiro variable layout, constraint residuals and augmented Lagrangian.

The decision variables of one problem instance are

* ``mu``     ``(L, D, 2d+1)``   Chebyshev moments of every 1D factor measure
* ``R``      ``(L, D, d+1, r)`` factors with ``M_d(mu) = R R^T``
* ``t_box``  ``(2, L, D, 2d+1)`` slacks for ``ref -/+ mu[l, i, k] = t^2``
* ``t_mass`` ``(L,)``           slacks for ``mu[l, 0, 0] = t^2 >= 0``
* ``t_prod`` ``(2, L, N)``      slacks for ``1 -/+ prod_i mu[l, i, n_i] = t^2``

Moment bounds are taken relative to the mass of the factor they belong to:
for ``k >= 1`` the reference is ``mu[l, i, 0]`` (so ``|mu_k| <= mu_0``, which
on the pinned dimensions is the plain ``|mu_k| <= 1``); mass entries are
bounded by 1.  A factor of mass ``a < 1`` bounded by 1 instead of ``a`` could
place normalized mass outside ``[-1, 1]``.  Product bounds stay absolute:
tying them to the block mass lets mass and product grow together unchecked.

and the scalar equality constraints are, in order: moment-matrix upper
triangles, upper box, lower box, mass sign, pinned masses of dimensions
``2..D``, normalization, upper product bound, lower product bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .moments import moment_matrix_map
from .poly import Basis, SparseChebPoly

VAR_BLOCKS = ("mu", "R", "t_box", "t_mass", "t_prod")
CON_BLOCKS = ("matrix", "box_upper", "box_lower", "mass", "pinned", "normalization",
              "prod_upper", "prod_lower")


@dataclass(frozen=True, eq=False)
class ProblemLayout:
    poly: SparseChebPoly
    L: int
    d: int
    rank: int
    product_constraints: bool = True
    var_shapes: dict = field(init=False)
    var_slices: dict = field(init=False)
    con_slices: dict = field(init=False)
    n_vars: int = field(init=False)
    K: int = field(init=False)

    def __post_init__(self):
        p, L, d, r = self.poly, self.L, self.d, self.rank
        if p.basis is not Basis.CHEBYSHEV:
            raise ValueError("layout requires a Chebyshev-basis polynomial")
        if L < 1:
            raise ValueError("need at least one product measure")
        if not 1 <= r <= d + 1:
            raise ValueError(f"rank {r} outside [1, {d + 1}]")
        if p.per_var_degree > d:
            raise ValueError(
                f"polynomial degree {p.per_var_degree} exceeds moment order d={d}"
            )
        D, N, m = p.dimension, p.n_terms, 2 * d + 1
        n_prod = N if self.product_constraints else 0
        shapes = {
            "mu": (L, D, m),
            "R": (L, D, d + 1, r),
            "t_box": (2, L, D, m),
            "t_mass": (L,),
            "t_prod": (2, L, n_prod),
        }
        n_upper = (d + 1) * (d + 2) // 2
        con_sizes = {
            "matrix": L * D * n_upper,
            "box_upper": L * D * m,
            "box_lower": L * D * m,
            "mass": L,
            "pinned": L * (D - 1),
            "normalization": 1,
            "prod_upper": L * n_prod,
            "prod_lower": L * n_prod,
        }
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("var_shapes", shapes)
        set_("var_slices", _slices({k: int(np.prod(s)) for k, s in shapes.items()}))
        set_("con_slices", _slices(con_sizes))
        set_("n_vars", sum(int(np.prod(s)) for s in shapes.values()))
        set_("K", sum(con_sizes.values()))

        idx = p.index_array()
        coef = p.coef_array()
        # flat position of mu[l, i, n_i] for every (l, term, i)
        base = (np.arange(L)[:, None, None] * D + np.arange(D)[None, None, :]) * m
        gather = base + idx[None, :, :]
        for arr in (idx, coef, gather):
            arr.setflags(write=False)
        set_("_idx", idx)
        set_("_coef", coef)
        set_("_gather", gather)

    @property
    def D(self) -> int:
        return self.poly.dimension

    @property
    def N(self) -> int:
        return self.poly.n_terms

    def describe(self) -> str:
        return (f"D={self.D} d={self.d} L={self.L} rank={self.rank} N={self.N} "
                f"vars={self.n_vars} K={self.K}")


def _slices(sizes: dict) -> dict:
    out, start = {}, 0
    for name, size in sizes.items():
        out[name] = slice(start, start + size)
        start += size
    return out


def layout(p: SparseChebPoly, config) -> ProblemLayout:
    return ProblemLayout(p, config.L, config.d, config.rank,
                         config.enforce_product_constraints)


@dataclass
class MomentState:
    mu: np.ndarray
    R: np.ndarray
    t_box: np.ndarray
    t_mass: np.ndarray
    t_prod: np.ndarray

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.ravel(getattr(self, k)) for k in VAR_BLOCKS])

    @classmethod
    def from_flat(cls, flat: np.ndarray, lay: ProblemLayout) -> MomentState:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (lay.n_vars,):
            raise ValueError(f"flat vector has shape {flat.shape}, expected ({lay.n_vars},)")
        return cls(**{k: flat[lay.var_slices[k]].reshape(lay.var_shapes[k]) for k in VAR_BLOCKS})

    @classmethod
    def zeros(cls, lay: ProblemLayout) -> MomentState:
        return cls.from_flat(np.zeros(lay.n_vars), lay)

    def copy(self) -> MomentState:
        return MomentState(*(getattr(self, k).copy() for k in VAR_BLOCKS))

    def check(self, lay: ProblemLayout) -> None:
        for k in VAR_BLOCKS:
            if getattr(self, k).shape != lay.var_shapes[k]:
                raise ValueError(
                    f"{k} has shape {getattr(self, k).shape}, expected {lay.var_shapes[k]}"
                )

    @property
    def masses(self) -> np.ndarray:
        return np.prod(self.mu[:, :, 0], axis=1)


@dataclass
class DualState:
    lam: np.ndarray
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


def _term_factors(mu: np.ndarray, lay: ProblemLayout) -> np.ndarray:
    """``mu[l, i, n_i]`` for every (l, term, i); shape ``(L, N, D)``."""
    return mu.reshape(-1)[lay._gather]


def _products(factors: np.ndarray) -> np.ndarray:
    return np.prod(factors, axis=-1)


def _leave_one_out(factors: np.ndarray) -> np.ndarray:
    """``prod_{j != i} factors[..., j]`` via prefix/suffix products."""
    ones = np.ones(factors.shape[:-1] + (1,))
    prefix = np.cumprod(np.concatenate([ones, factors[..., :-1]], axis=-1), axis=-1)
    suffix = np.cumprod(np.concatenate([ones, factors[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return prefix * suffix


def _box_reference(mu: np.ndarray) -> np.ndarray:
    ref = np.repeat(mu[:, :, :1], mu.shape[-1], axis=-1)
    ref[:, :, 0] = 1.0
    return ref


def objective(state: MomentState, lay: ProblemLayout) -> float:
    """``sum_n p_n sum_l prod_i mu[l, i, n_i]``."""
    state.check(lay)
    if lay.N == 0:
        return 0.0
    return float(lay._coef @ _products(_term_factors(state.mu, lay)).sum(axis=0))


def _residual_blocks(state: MomentState, lay: ProblemLayout, products=None) -> dict:
    L, D, d = lay.L, lay.D, lay.d
    rows, cols, amap = moment_matrix_map(d)
    mu = state.mu
    rrt = np.einsum("ldmr,ldnr->ldmn", state.R, state.R)
    ref = _box_reference(mu)
    out = {
        "matrix": mu @ amap.T - rrt[:, :, rows, cols],
        "box_upper": ref - mu - state.t_box[0] ** 2,
        "box_lower": ref + mu - state.t_box[1] ** 2,
        "mass": mu[:, 0, 0] - state.t_mass ** 2,
        "pinned": mu[:, 1:, 0] - 1.0,
        "normalization": np.array([mu[:, 0, 0].sum() - 1.0]),
    }
    if lay.product_constraints and lay.N:
        if products is None:
            products = _products(_term_factors(mu, lay))
        out["prod_upper"] = 1.0 - products - state.t_prod[0] ** 2
        out["prod_lower"] = 1.0 + products - state.t_prod[1] ** 2
    else:
        out["prod_upper"] = out["prod_lower"] = np.zeros(0)
    return out


def residuals(state: MomentState, lay: ProblemLayout) -> np.ndarray:
    """Vector ``c`` of all ``K`` scalar equality constraints."""
    state.check(lay)
    blocks = _residual_blocks(state, lay)
    return np.concatenate([np.ravel(blocks[k]) for k in CON_BLOCKS])


def _split(vec: np.ndarray, lay: ProblemLayout, shapes: dict) -> dict:
    return {k: vec[lay.con_slices[k]].reshape(shapes[k]) for k in CON_BLOCKS}


def evaluate_all(flat: np.ndarray, lay: ProblemLayout, lam: np.ndarray, gamma: float,
                 want_grad: bool = True):
    """Augmented Lagrangian value, gradient, objective and residuals at ``flat``.

    Returns ``(value, grad, objective, c)``; ``grad`` is None when not
    requested.
    """
    state = MomentState.from_flat(flat, lay)
    mu = state.mu
    if lay.N:
        factors = _term_factors(mu, lay)
        products = _products(factors)
        obj = float(lay._coef @ products.sum(axis=0))
    else:
        factors = products = None
        obj = 0.0
    blocks = _residual_blocks(state, lay, products)
    c = np.concatenate([np.ravel(blocks[k]) for k in CON_BLOCKS])
    w = lam + gamma * c
    value = obj + float(lam @ c) + 0.5 * gamma * float(c @ c)
    if not want_grad:
        return value, None, obj, c

    ws = _split(w, lay, {k: v.shape for k, v in blocks.items()})
    rows, cols, amap = moment_matrix_map(lay.d)
    g = MomentState.zeros(lay)

    g.mu += ws["matrix"] @ amap
    sym = np.zeros(mu.shape[:2] + (lay.d + 1, lay.d + 1))
    sym[:, :, rows, cols] = ws["matrix"]
    sym = sym + np.swapaxes(sym, -1, -2)
    g.R[...] = -sym @ state.R

    g.mu += ws["box_lower"] - ws["box_upper"]
    g.mu[:, :, 0] += (ws["box_upper"][:, :, 1:] + ws["box_lower"][:, :, 1:]).sum(axis=-1)
    g.t_box[0] = -2.0 * state.t_box[0] * ws["box_upper"]
    g.t_box[1] = -2.0 * state.t_box[1] * ws["box_lower"]

    g.mu[:, 0, 0] += ws["mass"] + ws["normalization"][0]
    g.t_mass[...] = -2.0 * state.t_mass * ws["mass"]
    g.mu[:, 1:, 0] += ws["pinned"]

    if lay.N:
        d_products = np.broadcast_to(lay._coef, products.shape).copy()
        if lay.product_constraints:
            d_products += ws["prod_lower"] - ws["prod_upper"]
            g.t_prod[0] = -2.0 * state.t_prod[0] * ws["prod_upper"]
            g.t_prod[1] = -2.0 * state.t_prod[1] * ws["prod_lower"]
        contrib = d_products[:, :, None] * _leave_one_out(factors)
        g.mu += np.bincount(lay._gather.ravel(), weights=contrib.ravel(),
                            minlength=mu.size).reshape(mu.shape)
    return value, g.flatten(), obj, c


def lagrangian(state: MomentState, dual: DualState, lay: ProblemLayout) -> float:
    """``objective + lam . c + (gamma/2) |c|^2``."""
    state.check(lay)
    _check_dual(dual, lay)
    return evaluate_all(state.flatten(), lay, dual.lam, dual.gamma, want_grad=False)[0]


def lagrangian_gradient(state: MomentState, dual: DualState, lay: ProblemLayout) -> np.ndarray:
    """Exact gradient of :func:`lagrangian` as a flat vector."""
    state.check(lay)
    _check_dual(dual, lay)
    return evaluate_all(state.flatten(), lay, dual.lam, dual.gamma)[1]


def _check_dual(dual: DualState, lay: ProblemLayout) -> None:
    if dual.lam.shape != (lay.K,):
        raise ValueError(f"multiplier vector has shape {dual.lam.shape}, expected ({lay.K},)")
