"""Limited-memory BFGS with halving backtracking under a sufficient-decrease test."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

CURVATURE_EPS = 1e-12


class LineSearchFailure(RuntimeError):
    pass


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class LineSearchParams:
    beta: float = 0.3
    max_backtracks: int = 40
    shrink: float = 0.5

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


@dataclass(frozen=True)
class InnerStop:
    rel_grad: float = 1e-3
    abs_val: float = 1e-4
    max_iters: int = 5000


class LbfgsMemory:
    """Ring buffer of the ``order`` most recent curvature pairs ``(s, y)``."""

    def __init__(self, order: int):
        if order < 1:
            raise ValueError("order must be positive")
        self.order = order
        self.pairs: deque[tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=order)

    def __len__(self):
        return len(self.pairs)

    def push(self, s: np.ndarray, y: np.ndarray) -> bool:
        """Store a pair unless it fails the curvature guard; returns acceptance."""
        sy = float(s @ y)
        if not sy > CURVATURE_EPS * np.linalg.norm(s) * np.linalg.norm(y):
            return False
        self.pairs.append((s, y, 1.0 / sy))
        return True

    def clear(self):
        self.pairs.clear()


def descent_direction(g: np.ndarray, mem: LbfgsMemory) -> np.ndarray:
    """Two-loop recursion; ``-g`` when the memory is empty."""
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("non-finite gradient")
    q = np.array(g, dtype=float)
    if not mem.pairs:
        return -q
    alphas = []
    for s, y, rho in reversed(mem.pairs):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    s, y, _ = mem.pairs[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(mem.pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def line_search(f: Callable[[np.ndarray], float], x: np.ndarray, d: np.ndarray,
                g: np.ndarray, params: LineSearchParams, fx: float | None = None):
    """Smallest ``k`` with ``f(x + s^k d) <= f(x) + s^k beta g.d``.

    Returns ``(step, x_next, f_next)``; raises :class:`LineSearchFailure`
    when no ``k <= max_backtracks`` qualifies.
    """
    slope = float(g @ d)
    if not slope < 0:
        raise ValueError("d is not a descent direction")
    if fx is None:
        fx = f(x)
    step = 1.0
    for _ in range(params.max_backtracks + 1):
        x_next = x + step * d
        f_next = f(x_next)
        if np.isfinite(f_next) and f_next <= fx + step * params.beta * slope:
            return step, x_next, f_next
        step *= params.shrink
    raise LineSearchFailure(f"no sufficient decrease after {params.max_backtracks} halvings")


@dataclass
class MinimizeStats:
    iterations: int = 0
    evaluations: int = 0
    fallbacks: int = 0
    converged: bool = False
    reason: str = ""
    grad_norm: float = float("nan")


def relative_gradient(g: np.ndarray, scale: float) -> float:
    """``||g||_2 / (1 + |scale|)``."""
    return float(np.linalg.norm(g)) / (1.0 + abs(scale))


def minimize(f_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]], x0: np.ndarray,
             order: int = 100, params: LineSearchParams = LineSearchParams(),
             stop: InnerStop = InnerStop(), f_only: Callable | None = None,
             memory: LbfgsMemory | None = None, grad_scale: float | None = None):
    """Minimize with L-BFGS directions and the halving line search.

    Stops once ``||g|| / (1 + |f|) < stop.rel_grad`` and the last accepted
    step changed ``f`` by less than ``stop.abs_val``, or at ``stop.max_iters``.
    Both tests must hold: on flat, badly conditioned stretches single steps
    move ``f`` very little long before the gradient is small.
    A failed line search along the quasi-Newton direction is retried once
    along ``-g`` with the memory flushed.  The lowest-value iterate is
    returned as ``(x, f, stats)``.

    Passing ``memory`` lets curvature pairs carry over between calls on
    slowly changing objectives.  A fixed ``grad_scale`` replaces ``|f|`` in
    the gradient test, for objectives whose value is dominated by a penalty.
    """
    stats = MinimizeStats()
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("non-finite starting point")

    def fg(z):
        stats.evaluations += 1
        return f_and_grad(z)

    def fv(z):
        stats.evaluations += 1
        return f_only(z) if f_only is not None else f_and_grad(z)[0]

    fx, g = fg(x)
    delta = 0.0  # no step taken yet: a stationary start returns at once
    if not (np.isfinite(fx) and np.all(np.isfinite(g))):
        raise NonFiniteError("non-finite value or gradient at the starting point")
    mem = memory if memory is not None else LbfgsMemory(order)

    while True:
        stats.grad_norm = relative_gradient(g, fx if grad_scale is None else grad_scale)
        if stats.grad_norm < stop.rel_grad and abs(delta) < stop.abs_val:
            stats.converged, stats.reason = True, "converged"
            break
        if stats.iterations >= stop.max_iters:
            stats.reason = "max_iters"
            break
        d = descent_direction(g, mem)
        if not float(g @ d) < 0:
            mem.clear()
            d = -g
            if not float(g @ d) < 0:
                stats.converged, stats.reason = True, "stationary"
                break
        try:
            _, x_new, f_new = line_search(fv, x, d, g, params, fx)
        except LineSearchFailure:
            if not mem.pairs:
                stats.reason = "line_search"
                break
            stats.fallbacks += 1
            mem.clear()
            try:
                _, x_new, f_new = line_search(fv, x, -g, g, params, fx)
            except LineSearchFailure:
                stats.reason = "line_search"
                break
        f_new, g_new = fg(x_new)
        if not (np.isfinite(f_new) and np.all(np.isfinite(g_new))):
            raise NonFiniteError("non-finite value or gradient during descent")
        stats.iterations += 1
        mem.push(x_new - x, g_new - g)
        delta = fx - f_new
        x, fx, g = x_new, f_new, g_new
    return x, fx, stats
