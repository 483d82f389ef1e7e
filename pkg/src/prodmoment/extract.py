"""Location extraction, local-to-global certification and the end-to-end driver."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import bm, saddle
from .bm import DualState, MomentState, ProblemLayout
from .config import SolverConfig
from .moments import assemble_moment_matrix, delta_moments, psd_factor
from .poly import SparseChebPoly, to_chebyshev

log = logging.getLogger(__name__)

MASS_EPS = 1e-8
DEGENERATE_EPS = 1e-12
# scale of the seeded perturbation that moves emptied blocks off the
# stationary point R = 0, t = 0 of the factorized constraints
REVIVE_SCALE = 1e-3


class DegenerateStateError(ValueError):
    pass


@dataclass
class Solution:
    value: float
    location: np.ndarray
    masses: np.ndarray
    certified_global: bool
    restarts_used: int = 0
    converged: bool = False
    outer_iterations: int = 0
    feasibility: float = float("nan")
    wall_seconds: float = 0.0
    point_value: float = float("nan")
    state: MomentState | None = field(default=None, repr=False)

    def to_record(self) -> str:
        """Flat ``key=value`` lines."""
        lines = [f"value={float(self.value)!r}"]
        lines += [f"location_{i}={float(v)!r}" for i, v in enumerate(self.location)]
        lines += [f"mass_{l}={float(v)!r}" for l, v in enumerate(self.masses)]
        lines += [
            f"point_value={float(self.point_value)!r}",
            f"certified={int(self.certified_global)}",
            f"converged={int(self.converged)}",
            f"restarts={self.restarts_used}",
            f"outer_iterations={self.outer_iterations}",
            f"feasibility={float(self.feasibility)!r}",
            f"wall_seconds={self.wall_seconds:.6f}",
        ]
        return "\n".join(lines) + "\n"


def relative_error(computed, exact) -> float:
    """``|computed - exact|_2 / (1e-15 + |exact|_2)``."""
    computed = np.asarray(computed, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if computed.shape != exact.shape:
        raise ValueError(f"shape mismatch: {computed.shape} vs {exact.shape}")
    return float(np.linalg.norm(computed - exact) / (1e-15 + np.linalg.norm(exact)))


def extract_location(state: MomentState) -> np.ndarray:
    """Mean of the heaviest product block, one coordinate per dimension.

    Each factor is normalized by its own mass, ``x_i = mu_{i,1} / mu_{i,0}``
    (the first Chebyshev moment is the mean since ``T_1(x) = x``).  With the
    masses of dimensions ``2..D`` pinned to 1 this only rescales dimension 1
    by the block mass.
    """
    masses = state.masses
    l_star = int(np.argmax(masses))
    if not masses[l_star] > DEGENERATE_EPS:
        raise DegenerateStateError("every product block has (numerically) zero mass")
    mu = state.mu[l_star]
    loc = np.empty(mu.shape[0])
    for i, (m0, m1) in enumerate(zip(mu[:, 0], mu[:, 1])):
        loc[i] = m1 / m0 if abs(m0) > DEGENERATE_EPS else 0.0
    return np.clip(loc, -1.0, 1.0)


def consistent_slacks(state: MomentState, lay: ProblemLayout) -> MomentState:
    """Reset every slack to the non-negative root that zeroes its residual."""
    out = state.copy()
    ref = bm._box_reference(out.mu)
    out.t_box[0] = np.sqrt(np.clip(ref - out.mu, 0.0, None))
    out.t_box[1] = np.sqrt(np.clip(ref + out.mu, 0.0, None))
    out.t_mass[...] = np.sqrt(np.clip(out.mu[:, 0, 0], 0.0, None))
    if lay.product_constraints and lay.N:
        prods = np.prod(bm._term_factors(out.mu, lay), axis=-1)
        out.t_prod[0] = np.sqrt(np.clip(1.0 - prods, 0.0, None))
        out.t_prod[1] = np.sqrt(np.clip(1.0 + prods, 0.0, None))
    return out


def delta_state(lay: ProblemLayout, points, weights) -> MomentState:
    """Exact state for a mixture of point masses, one point per block.

    Block ``l`` holds the product of deltas at ``points[l]`` with total mass
    ``weights[l]`` carried by dimension 1.  Factors and slacks are set so
    every residual except the normalization is zero.
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if points.shape != (lay.L, lay.D) or weights.shape != (lay.L,):
        raise ValueError(f"expected points ({lay.L}, {lay.D}) and weights ({lay.L},)")
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    state = MomentState.zeros(lay)
    for l in range(lay.L):
        for i in range(lay.D):
            mu = delta_moments(points[l, i], lay.d) * (weights[l] if i == 0 else 1.0)
            state.mu[l, i] = mu
            state.R[l, i] = psd_factor(assemble_moment_matrix(mu, lay.d), lay.rank)
    return consistent_slacks(state, lay)


def substitute(state: MomentState, block: int, lay: ProblemLayout, rng=None) -> MomentState:
    """Rescale ``block`` to unit mass and empty every other block.

    Only dimension 1 carries the block mass, so only its moment vector is
    divided by the mass and its factor rebuilt from the rescaled matrix.
    Emptied blocks keep their dimension ``2..D`` factors.  With ``rng``
    given, the emptied variables get a small perturbation so descent can
    move mass back into them.
    """
    alpha = state.masses[block]
    if not abs(alpha) > MASS_EPS:
        raise DegenerateStateError(f"block {block} has zero mass")
    out = state.copy()
    out.mu[block, 0] = state.mu[block, 0] / alpha
    out.R[block, 0] = psd_factor(assemble_moment_matrix(out.mu[block, 0], lay.d), lay.rank)
    others = [l for l in range(lay.L) if l != block]
    out.mu[others, 0] = 0.0
    out.R[others, 0] = 0.0
    out = consistent_slacks(out, lay)
    if rng is not None and others:
        out.R[others, 0] += REVIVE_SCALE * rng.uniform(-1, 1, out.R[others, 0].shape)
        out.t_box[:, others, 0] += REVIVE_SCALE * rng.uniform(-1, 1, out.t_box[:, others, 0].shape)
        out.t_mass[others] += REVIVE_SCALE * rng.uniform(-1, 1, len(others))
    return out


def certify_and_restart(lay: ProblemLayout, state: MomentState, dual: DualState,
                        config: SolverConfig):
    """Upgrade a converged local minimum to a certified global one.

    The heaviest block is normalized and all others emptied; the saddle
    iteration is rerun from there.  A decrease larger than
    ``tol_kkt_abs_val + sum|p_n| * tol_feasibility`` means the start was not
    global: the new point replaces it and the test repeats.  No such
    decrease certifies it.  The second term is how far apart the values of
    two states that both meet the feasibility tolerance can be; smaller
    decreases only trade feasibility for value.

    Returns ``(state, dual, certified, restarts, outer_iterations)``.
    """
    rng = np.random.default_rng([config.seed, 1])
    margin = config.tol_kkt_abs_val + float(np.abs(lay._coef).sum()) * config.tol_feasibility
    value = bm.objective(state, lay)
    restarts = outer = 0
    while True:
        masses = state.masses
        block = int(np.argmax(masses))
        if not masses[block] > MASS_EPS:
            raise DegenerateStateError("no product block with positive mass")
        trial = substitute(state, block, lay, rng)
        new_state, new_dual, stats = saddle.solve(lay, config, trial, dual)
        outer += stats.outer_iterations
        new_value = bm.objective(new_state, lay)
        log.info("certify: value=%.10g trial=%.10g margin=%.3g converged=%s",
                 value, new_value, margin, stats.converged)
        if not (stats.converged and new_value < value - margin):
            return state, dual, True, restarts, outer
        if restarts >= config.restart_cap:
            return new_state, new_dual, False, restarts, outer
        state, dual, value = new_state, new_dual, new_value
        restarts += 1


def _perturbed(p: SparseChebPoly, config: SolverConfig) -> SparseChebPoly:
    rng = np.random.default_rng([config.seed, 2])
    scale = 1e-6 * max((abs(c) for c in p.terms.values()), default=1.0)
    terms = dict(p.terms)
    for i in range(p.dimension):
        idx = tuple(1 if j == i else 0 for j in range(p.dimension))
        terms[idx] = terms.get(idx, 0.0) + scale * rng.uniform(-1.0, 1.0)
    return SparseChebPoly(p.dimension, terms)


def global_minimize(p: SparseChebPoly, config: SolverConfig) -> Solution:
    """Solve, certify and extract the minimizer of ``p`` over ``[-1, 1]^D``."""
    p = to_chebyshev(p)
    target = _perturbed(p, config) if config.noise else p
    lay = bm.layout(target, config)
    t0 = time.perf_counter()
    state, dual, stats = saddle.solve(lay, config)
    certified, restarts, outer = False, 0, stats.outer_iterations
    if stats.converged:
        state, dual, certified, restarts, extra = certify_and_restart(lay, state, dual, config)
        outer += extra
    try:
        location = extract_location(state)
    except DegenerateStateError:
        location = np.full(p.dimension, np.nan)
    wall = time.perf_counter() - t0
    final_lay = lay if target is p else bm.layout(p, config)
    c = bm.residuals(state, lay)
    return Solution(
        value=bm.objective(state, final_lay),
        location=location,
        masses=state.masses.copy(),
        certified_global=certified,
        restarts_used=restarts,
        converged=stats.converged,
        outer_iterations=outer,
        feasibility=float(np.max(np.abs(c), initial=0.0)),
        wall_seconds=wall,
        point_value=p(location) if np.all(np.isfinite(location)) else float("nan"),
        state=state,
    )
