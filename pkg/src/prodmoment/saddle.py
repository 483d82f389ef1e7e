"""Alternating primal descent / dual ascent on the augmented Lagrangian."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import bm, lbfgs
from .bm import DualState, MomentState, ProblemLayout
from .config import SolverConfig
from .lbfgs import InnerStop, LbfgsMemory, LineSearchParams, NonFiniteError, minimize

log = logging.getLogger(__name__)


@dataclass
class OuterStats:
    outer_iterations: int = 0
    total_inner_iterations: int = 0
    final_feasibility_inf_norm: float = float("nan")
    final_objective: float = float("nan")
    final_rel_grad: float = float("nan")
    wall_seconds: float = 0.0
    converged: bool = False


def pinned_mask(lay: ProblemLayout) -> np.ndarray:
    """Flat boolean mask of the masses ``mu[l, i, 0]``, ``i >= 2``, held at 1."""
    mask = MomentState.zeros(lay)
    mask.mu[:, 1:, 0] = 1.0
    return mask.flatten().astype(bool)


def initialize(lay: ProblemLayout, config: SolverConfig, rng=None):
    """Uniform ``[-1, 1]`` primal variables (pinned masses set to 1), zero multipliers."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    state = MomentState.from_flat(rng.uniform(-1.0, 1.0, lay.n_vars), lay)
    state.mu[:, 1:, 0] = 1.0
    return state, DualState(np.zeros(lay.K), config.gamma)


def dual_update(dual: DualState, c: np.ndarray) -> DualState:
    """``lam <- lam + gamma * c``."""
    c = np.asarray(c, dtype=float)
    if c.shape != dual.lam.shape:
        raise ValueError(f"residual shape {c.shape} does not match multipliers {dual.lam.shape}")
    return DualState(dual.lam + dual.gamma * c, dual.gamma)


def primal_descent(lay: ProblemLayout, x0: np.ndarray, dual: DualState, config: SolverConfig,
                   memory: LbfgsMemory | None = None):
    """Minimize the augmented Lagrangian in the primal variables, multipliers fixed."""
    lam, gamma = dual.lam, dual.gamma
    frozen = pinned_mask(lay)

    def fg(x):
        value, grad, _, _ = bm.evaluate_all(x, lay, lam, gamma)
        grad[frozen] = 0.0
        return value, grad

    def fv(x):
        return bm.evaluate_all(x, lay, lam, gamma, want_grad=False)[0]

    return minimize(
        fg, x0, order=config.lbfgs_order,
        params=LineSearchParams(config.beta, config.max_backtracks),
        stop=InnerStop(config.tol_inner_rel_grad, config.tol_inner_abs_val, config.max_inner_iters),
        f_only=fv, memory=memory, grad_scale=bm.evaluate_all(x0, lay, lam, gamma, False)[2],
    )


def _reseed_slacks(x: np.ndarray, lay: ProblemLayout, rng) -> np.ndarray:
    x = x.copy()
    for name in ("t_box", "t_mass", "t_prod"):
        sl = lay.var_slices[name]
        bad = ~np.isfinite(x[sl])
        x[sl] = np.where(bad | (np.abs(x[sl]) > 10.0), rng.uniform(-1.0, 1.0, sl.stop - sl.start), x[sl])
    return x


def solve(p_or_layout, config: SolverConfig, state: MomentState | None = None,
          dual: DualState | None = None, callback=None):
    """Run the alternating saddle-point iteration.

    Parameters
    ----------
    p_or_layout : SparseChebPoly or ProblemLayout
    config : SolverConfig
    state, dual : optional
        Starting point; by default drawn by :func:`initialize`.
    callback : callable, optional
        Called as ``callback(iteration, x, objective, c)`` after every
        primal phase, before the dual update is applied.

    Returns
    -------
    (MomentState, DualState, OuterStats)
        ``stats.converged`` is False when ``max_outer_iters`` ran out.
    """
    lay = p_or_layout if isinstance(p_or_layout, ProblemLayout) else bm.layout(p_or_layout, config)
    rng = np.random.default_rng(config.seed)
    if state is None:
        state, init_dual = initialize(lay, config, rng)
        dual = dual if dual is not None else init_dual
    elif dual is None:
        dual = DualState(np.zeros(lay.K), config.gamma)
    log.debug("layout %s", lay.describe())

    t0 = time.perf_counter()
    stats = OuterStats()
    x = state.flatten()
    frozen = pinned_mask(lay)
    x[frozen] = 1.0
    prev_obj = np.inf
    reseeded = False
    fallback = None
    memory = LbfgsMemory(config.lbfgs_order)
    for it in range(1, config.max_outer_iters + 1):
        try:
            x, _, inner = primal_descent(lay, x, dual, config, memory)
        except NonFiniteError:
            if reseeded:
                raise
            reseeded = True
            log.warning("non-finite Lagrangian; re-drawing slack variables once")
            x = _reseed_slacks(x, lay, rng)
            memory.clear()
            continue
        _, _, obj, c = bm.evaluate_all(x, lay, dual.lam, dual.gamma, want_grad=False)
        if callback is not None:
            callback(it, x, obj, c)
        dual = dual_update(dual, c)
        # stationarity is tested against the updated multipliers, where the
        # next primal phase would start
        _, grad, _, _ = bm.evaluate_all(x, lay, dual.lam, dual.gamma)
        grad[frozen] = 0.0
        feas = float(np.max(np.abs(c), initial=0.0))
        rel_grad = lbfgs.relative_gradient(grad, obj)
        stats.outer_iterations = it
        stats.total_inner_iterations += inner.iterations
        stats.final_feasibility_inf_norm = feas
        stats.final_objective = obj
        stats.final_rel_grad = rel_grad
        log.info("outer=%d objective=%.10g feas=%.3e rel_grad=%.3e inner=%d wall=%.3f",
                 it, obj, feas, rel_grad, inner.iterations, time.perf_counter() - t0)
        # fallback: latest feasible iterate, else the least infeasible one
        if fallback is None or feas < config.tol_feasibility or feas < fallback[2]:
            fallback = (x.copy(), obj, feas, dual, rel_grad)
        converged = (rel_grad < config.tol_kkt_rel_grad
                     and abs(prev_obj - obj) < config.tol_kkt_abs_val
                     and feas < config.tol_feasibility)
        prev_obj = obj
        if converged:
            stats.converged = True
            break
        if config.gamma_growth > 1.0 and feas >= config.tol_feasibility:
            dual = DualState(dual.lam, dual.gamma * config.gamma_growth)
    if not stats.converged and fallback is not None:
        (x, stats.final_objective, stats.final_feasibility_inf_norm, dual,
         stats.final_rel_grad) = fallback
    stats.wall_seconds = time.perf_counter() - t0
    return MomentState.from_flat(x, lay), dual, stats
