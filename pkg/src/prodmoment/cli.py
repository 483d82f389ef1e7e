"""Command line: ``solve``, ``bench`` and ``check``.

Exit codes: 0 success (certified solve, finished bench, passing check),
1 input error, 2 solve finished without a global certificate, 3 failed check.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bm, extract
from .config import ConfigError, SolverConfig, load_config
from .moments import assemble_moment_matrix, delta_moments, min_eigenvalue
from .poly import (FAMILY1_VALUE, FAMILY2_VALUE, PolyFormatError, SparseChebPoly, evaluate,
                   family1, family1_minimizer, family2, family2_minimizer, load)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_UNCERTIFIED, EXIT_CHECK = 0, 1, 2, 3

CSV_COLUMNS = ("family", "D", "value_computed", "value_exact", "relerr_value",
               "relerr_location", "wall_seconds", "outer_iterations", "certified", "seed")

FAMILIES = {
    "f1": (family1, family1_minimizer, FAMILY1_VALUE),
    "f2": (family2, family2_minimizer, FAMILY2_VALUE),
}

GRADIENT_TOL = 1e-6
MOMENT_TOL = 1e-10
ORACLE_TOL = 1e-10


class InputError(Exception):
    pass


def _read_config(path) -> SolverConfig:
    try:
        return load_config(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except ConfigError as exc:
        raise InputError(f"{path}: {exc}") from None


def _read_poly(path) -> SparseChebPoly:
    try:
        return load(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except PolyFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_solve(poly_file, config_file, seed=None, out_path=None) -> int:
    p = _read_poly(poly_file)
    cfg = _read_config(config_file)
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    try:
        sol = extract.global_minimize(p, cfg)
    except ValueError as exc:
        # layout validation: degree too high for the configured moment order etc.
        raise InputError(str(exc)) from None
    record = sol.to_record()
    if out_path is None:
        sys.stdout.write(record)
    else:
        Path(out_path).write_text(record, encoding="utf-8")
    return EXIT_OK if sol.certified_global else EXIT_UNCERTIFIED


def parse_dims(text: str) -> list[int]:
    dims = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            D = int(part)
        except ValueError:
            raise InputError(f"bad dimension {part!r}") from None
        if D < 1:
            raise InputError(f"dimension must be positive, got {D}")
        dims.append(D)
    if not dims:
        raise InputError("no dimensions given")
    return dims


def bench_row(family: str, D: int, cfg: SolverConfig, seed: int) -> dict:
    """Solve one family instance; failures give NaN fields instead of raising."""
    make, minimizer, exact = FAMILIES[family]
    row = dict(family=family, D=D, value_computed=math.nan, value_exact=exact,
               relerr_value=math.nan, relerr_location=math.nan, wall_seconds=math.nan,
               outer_iterations=0, certified=0, seed=seed)
    p = make(D)
    try:
        sol = extract.global_minimize(p, cfg.replace(seed=seed))
    except Exception as exc:  # one bad row must not end the sweep
        log.error("family=%s D=%d failed: %s", family, D, exc)
        return row
    row.update(
        value_computed=sol.value,
        relerr_value=extract.relative_error([sol.value], [exact]),
        relerr_location=extract.relative_error(sol.location, minimizer(D)),
        wall_seconds=sol.wall_seconds,
        outer_iterations=sol.outer_iterations,
        certified=int(sol.certified_global),
    )
    return row


def _format(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def cmd_bench(family: str, dims, config_file, out_csv, seed: int = 0) -> int:
    if family not in FAMILIES:
        raise InputError(f"unknown family {family!r}")
    if isinstance(dims, str):
        dims = parse_dims(dims)
    if not dims:
        raise InputError("no dimensions given")
    cfg = _read_config(config_file)
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for D in dims:
            row = bench_row(family, D, cfg, seed + D)
            fields = [_format(row[c]) for c in CSV_COLUMNS]
            writer.writerow(fields)
            fh.flush()
            log.info("bench %s", " ".join(f"{c}={v}" for c, v in zip(CSV_COLUMNS, fields)))
            print(",".join(fields), flush=True)
    return EXIT_OK


def random_cheb_poly(rng, dim: int, degree: int, n_terms: int) -> SparseChebPoly:
    idx = rng.integers(0, degree + 1, size=(n_terms, dim))
    coef = rng.uniform(-1.0, 1.0, n_terms)
    terms = {}
    for row, c in zip(idx, coef):
        key = tuple(int(v) for v in row)
        terms[key] = terms.get(key, 0.0) + float(c)
    return SparseChebPoly(dim, terms)


def check_gradients(seed: int = 0, n_states: int = 20, h: float = 1e-6) -> float:
    """Worst per-coordinate discrepancy of the Lagrangian gradient vs central differences.

    Each coordinate's discrepancy is ``|analytic - fd| / (1 + |analytic|)``.
    """
    rng = np.random.default_rng(seed)
    cfg = SolverConfig(L=2, d=4, rank=5, gamma=8.0)
    p = random_cheb_poly(rng, 3, cfg.d, 6)
    lay = bm.layout(p, cfg)
    worst = 0.0
    for _ in range(n_states):
        x = rng.uniform(-1.0, 1.0, lay.n_vars)
        lam = rng.normal(size=lay.K)
        _, grad, _, _ = bm.evaluate_all(x, lay, lam, cfg.gamma)
        fd = np.empty_like(x)
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = h
            fp = bm.evaluate_all(x + e, lay, lam, cfg.gamma, want_grad=False)[0]
            fm = bm.evaluate_all(x - e, lay, lam, cfg.gamma, want_grad=False)[0]
            fd[j] = (fp - fm) / (2 * h)
        worst = max(worst, float(np.max(np.abs(grad - fd) / (1.0 + np.abs(grad)))))
    return worst


def check_moments(seed: int = 0, n_points: int = 50, max_d: int = 8) -> float:
    """Smallest eigenvalue over moment matrices of random point masses."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(n_points):
        d = int(rng.integers(0, max_d + 1))
        x = float(rng.uniform(-1.0, 1.0))
        worst = min(worst, min_eigenvalue(assemble_moment_matrix(delta_moments(x, d), d)))
    return worst


def check_oracle(seed: int = 0, n_polys: int = 25) -> float:
    """Worst gap between the moment objective on delta states and direct evaluation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_polys):
        dim = int(rng.integers(1, 4))
        d = int(rng.integers(1, 5))
        p = random_cheb_poly(rng, dim, d, int(rng.integers(1, 8)))
        cfg = SolverConfig(L=2, d=d, rank=d + 1)
        lay = bm.layout(p, cfg)
        x = rng.uniform(-1.0, 1.0, dim)
        state = extract.delta_state(lay, np.tile(x, (lay.L, 1)), [1.0] + [0.0] * (lay.L - 1))
        worst = max(worst, abs(bm.objective(state, lay) - evaluate(p, x)))
    return worst


def cmd_check(what: str, seed: int = 0) -> int:
    if what == "gradients":
        err = check_gradients(seed)
        print(f"gradients: max relative discrepancy {err:.3e} (tol {GRADIENT_TOL:.0e})")
        ok = err <= GRADIENT_TOL
    elif what == "moments":
        eig = check_moments(seed)
        print(f"moments: min eigenvalue {eig:.3e} (tol {-MOMENT_TOL:.0e})")
        ok = eig >= -MOMENT_TOL
    elif what == "oracle":
        err = check_oracle(seed)
        print(f"oracle: max |objective - evaluate| {err:.3e} (tol {ORACLE_TOL:.0e})")
        ok = err <= ORACLE_TOL
    else:
        raise InputError(f"unknown check {what!r}")
    return EXIT_OK if ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prodmoment",
                                     description="Global polynomial minimization over [-1, 1]^D.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for per-iteration info, -vv for debug output")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="minimize one polynomial")
    s.add_argument("--poly", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")

    b = sub.add_parser("bench", help="benchmark family sweep to CSV")
    b.add_argument("--family", required=True, choices=sorted(FAMILIES))
    b.add_argument("--dims", required=True, help="comma separated, e.g. 1,2,5")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int, default=0, help="base seed; row D uses seed + D")

    c = sub.add_parser("check", help="built-in numerical self checks")
    c.add_argument("--what", required=True, choices=("gradients", "moments", "oracle"))
    c.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which would collide with "not certified"
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(name)s %(levelname)s %(message)s")
    try:
        if args.command == "solve":
            return cmd_solve(args.poly, args.config, args.seed, args.out)
        if args.command == "bench":
            return cmd_bench(args.family, args.dims, args.config, args.out, args.seed)
        return cmd_check(args.what, args.seed)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
