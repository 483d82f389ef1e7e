"""Solver configuration and the flat ``key = value`` config file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """All solver knobs.

    ``d`` is the moment-matrix order minus one, i.e. the matrices are
    ``(d+1) x (d+1)`` and moment vectors have ``2d+1`` entries.
    """

    L: int = 4
    d: int = 8
    rank: int = 9
    gamma: float = 8.0
    beta: float = 0.3
    lbfgs_order: int = 100
    tol_kkt_rel_grad: float = 1e-2
    tol_kkt_abs_val: float = 1e-4
    tol_feasibility: float = 1e-2
    tol_inner_rel_grad: float = 1e-3
    tol_inner_abs_val: float = 1e-4
    max_outer_iters: int = 500
    max_inner_iters: int = 5000
    max_backtracks: int = 40
    seed: int = 0
    enforce_product_constraints: bool = True
    restart_cap: int = 10
    gamma_growth: float = 1.0
    noise: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.L < 2:
            raise ConfigError("num_measures must be at least 2")
        if self.d < 0:
            raise ConfigError("moment matrix size must be at least 1")
        if not 1 <= self.rank <= self.d + 1:
            raise ConfigError(f"bm_rank must lie in [1, {self.d + 1}]")
        if not self.gamma > 0:
            raise ConfigError("penalty gamma must be positive")
        if not 0 < self.beta < 1:
            raise ConfigError("beta out of range (0, 1)")
        if not 0 < self.tol_feasibility < 1:
            raise ConfigError("feasibility tolerance out of range (0, 1)")
        if self.lbfgs_order < 1:
            raise ConfigError("lbfgs_order must be positive")
        for name in ("tol_kkt_rel_grad", "tol_kkt_abs_val", "tol_inner_rel_grad", "tol_inner_abs_val"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1 or self.max_backtracks < 1:
            raise ConfigError("iteration caps must be positive")
        if self.restart_cap < 0:
            raise ConfigError("restart_cap must be non-negative")
        if self.gamma_growth < 1.0:
            raise ConfigError("gamma_growth must be >= 1")

    def replace(self, **changes) -> SolverConfig:
        return dataclasses.replace(self, **changes)


# file key -> (field, converter)
_KEYS = {
    "moment_matrix_size": ("d", lambda v: int(v) - 1),
    "penalty_gamma": ("gamma", float),
    "bm_rank": ("rank", int),
    "num_measures": ("L", int),
    "kkt_rel_grad": ("tol_kkt_rel_grad", float),
    "kkt_abs_val": ("tol_kkt_abs_val", float),
    "kkt_feasibility": ("tol_feasibility", float),
    "lbfgs_order": ("lbfgs_order", int),
    "wolfe_beta": ("beta", float),
    "lbfgs_rel_grad": ("tol_inner_rel_grad", float),
    "lbfgs_abs_val": ("tol_inner_abs_val", float),
    "max_outer_iters": ("max_outer_iters", int),
    "max_inner_iters": ("max_inner_iters", int),
    "max_backtracks": ("max_backtracks", int),
    "seed": ("seed", int),
    "product_constraints": ("enforce_product_constraints", lambda v: _parse_bool(v)),
    "restart_cap": ("restart_cap", int),
    "gamma_growth": ("gamma_growth", float),
    "noise": ("noise", lambda v: _parse_bool(v)),
}


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def parse_config(text: str) -> SolverConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        field, conv = _KEYS[key]
        try:
            values[field] = conv(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    return SolverConfig(**values)


def format_config(cfg: SolverConfig) -> str:
    lines = []
    for key, (field, _) in _KEYS.items():
        value = getattr(cfg, field)
        if key == "moment_matrix_size":
            value += 1
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def load_config(path: str | Path) -> SolverConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def preset(name: str) -> SolverConfig:
    """Shipped presets: ``table2`` (family 1) and ``table3`` (family 2)."""
    fname = f"{name}.cfg"
    try:
        text = resources.files("prodmoment.presets").joinpath(fname).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"unknown preset {name!r}") from None
    return parse_config(text)
