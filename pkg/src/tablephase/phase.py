"""Experiment drivers: Barvinok-margin scans, the 2-way bezel scan, fiber experiments.

Outputs are plain rows (dataclasses) with CSV/JSON writers. Floats are
written with 17 significant digits and rows are sorted by (n, B), so a scan
produces the same bytes regardless of thread count.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone

import numpy as np

from .errors import BudgetExceeded, InvalidInput, NotConverged
from .fiber import (DEFAULT_FIBER_BUDGET, Target, connectivity_check, enumerate_fiber,
                    fiber_weights)
from .moves import independence_moves
from .sampler import ChainConfig, divergence_uniform_vs_hypergeometric, run_chain, tv_distance
from .tables import MarginSpec, northwest_corner
from .tilt import BC_3WAY, NEAR_CRITICAL_BAND, Regime, barvinok_solve, regime_of, solve_mle

SCAN_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TheoremLimits:
    """Limits of (Z111, Z121, Z221, Z222) as n grows, for fixed B.

    In the supercritical regime Z111 diverges and ``z111`` is the slope of
    Z111 / n^2 instead (``z111_is_slope`` is then True).
    """

    B: float
    regime: Regime
    z111: float
    z121: float
    z221: float
    z222: float
    z111_is_slope: bool


def theorem_limits_3way(B: float) -> TheoremLimits:
    if not B > 0:
        raise InvalidInput("B must be positive")
    reg = regime_of(B)
    cbrt2 = 2.0 ** (1.0 / 3.0)
    if B < BC_3WAY:
        ratio = (1.0 / B + 1.0) / (1.0 / BC_3WAY + 1.0)
        return TheoremLimits(
            B, reg,
            z111=1.0 / (ratio ** 3 - 1.0),
            z121=1.0 / (cbrt2 * ratio ** 2 - 1.0),
            z221=1.0 / (cbrt2 ** 2 * ratio - 1.0),
            z222=1.0,
            z111_is_slope=False,
        )
    if B == BC_3WAY:
        nan = float("nan")
        return TheoremLimits(B, reg, nan, nan, nan, 1.0, z111_is_slope=False)
    return TheoremLimits(
        B, reg,
        z111=B - BC_3WAY,
        z121=1.0 / (cbrt2 - 1.0),
        z221=1.0 / (cbrt2 ** 2 - 1.0),
        z222=1.0,
        z111_is_slope=True,
    )


@dataclass(frozen=True)
class ScanRow:
    n: int
    B: float
    P: float
    Q: float
    Z111: float
    Z121: float
    Z221: float
    Z222: float
    limitZ111: float
    limitZ121: float
    limitZ221: float
    limitZ222: float
    regime: str
    residual: float
    errZ111: float
    errZ121: float
    errZ221: float
    errZ222: float
    converged: bool


def scan_point(n: int, B: float, tol: float = 1e-10) -> ScanRow:
    """One (n, B) grid point. Supercritical errZ111 compares Z111 / n^2 with the slope."""
    try:
        sol = barvinok_solve(n, B, tol=tol)
        converged = True
    except NotConverged as exc:
        sol = exc.report
        converged = False
    z = sol.cells()
    lim = theorem_limits_3way(B)
    z111_cmp = z[0] / (n * n) if lim.z111_is_slope else z[0]
    return ScanRow(
        n=int(n), B=float(B), P=sol.P, Q=sol.Q,
        Z111=z[0], Z121=z[1], Z221=z[2], Z222=z[3],
        limitZ111=lim.z111, limitZ121=lim.z121, limitZ221=lim.z221, limitZ222=lim.z222,
        regime=lim.regime.value, residual=sol.residual,
        errZ111=abs(z111_cmp - lim.z111), errZ121=abs(z[1] - lim.z121),
        errZ221=abs(z[2] - lim.z221), errZ222=abs(z[3] - lim.z222),
        converged=converged,
    )


def _grid_map(fn, points, threads: int):
    if threads <= 1:
        return [fn(*p) for p in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda p: fn(*p), points))


def scan_3way(B_grid, n_grid, tol: float = 1e-10, threads: int = 1) -> list[ScanRow]:
    B_grid, n_grid = list(B_grid), list(n_grid)
    if not B_grid or not n_grid:
        raise InvalidInput("B and n grids must be nonempty")
    if any(n < 2 for n in n_grid):
        raise InvalidInput("n must be at least 2")
    points = [(int(n), float(B)) for n in n_grid for B in B_grid]
    rows = _grid_map(lambda n, B: scan_point(n, B, tol), points, threads)
    return sorted(rows, key=lambda r: (r.n, r.B))


def bc_2way(C: float) -> float:
    return 1.0 + math.sqrt(1.0 + 1.0 / C)


@dataclass(frozen=True)
class BezelMargins:
    rows: list
    cols: list
    bezel: int
    heavy: int
    light: int
    adjustment: int


def bezel_margins(n: int, B: float, C: float, delta: float, bezel_heavy: bool = True) -> BezelMargins:
    """Square two-value margins: floor(n^delta) bezel lines and n bulk lines.

    With ``bezel_heavy`` the bezel carries floor(B C n) and the bulk
    floor(C n); otherwise the two values swap. Row and column vectors are
    built alike, so the totals agree; any deficit would be absorbed by the
    last bulk entry of the column vector and reported in ``adjustment``.
    """
    if not C > 0 or not 0 < delta < 1 or not B > 0:
        raise InvalidInput("need C > 0, 0 < delta < 1, B > 0")
    bezel = int(math.floor(n ** delta))
    if bezel < 1 or n < 1:
        raise InvalidInput(f"n={n}, delta={delta} leaves an empty margin class")
    heavy, light = int(math.floor(B * C * n)), int(math.floor(C * n))
    top, bulk = (heavy, light) if bezel_heavy else (light, heavy)
    if min(top, bulk) <= 0:
        raise InvalidInput("margins round down to zero; increase n or C")
    rows = [top] * bezel + [bulk] * n
    cols = list(rows)
    deficit = sum(rows) - sum(cols)
    cols[-1] += deficit
    if cols[-1] <= 0:
        raise InvalidInput("cannot balance margin totals for these parameters")
    return BezelMargins(rows, cols, bezel, heavy, light, deficit)


@dataclass(frozen=True)
class Scan2Row:
    n: int
    B: float
    C: float
    delta: float
    bezel_heavy: bool
    bezel: int
    heavy_margin: int
    light_margin: int
    adjustment: int
    Bc: float
    regime: str
    Z_corner: float
    Z_cross: float
    Z_bulk: float
    residual: float
    converged: bool


def scan_2way_point(n, B, C, delta, bezel_heavy=True, tol=1e-10) -> Scan2Row:
    m = bezel_margins(n, B, C, delta, bezel_heavy)
    rep = solve_mle([m.rows, m.cols], tol=tol, raise_on_failure=False)
    Z = rep.expected.array
    Bc = bc_2way(C)
    reg = Regime.NEAR_CRITICAL if abs(B - Bc) < NEAR_CRITICAL_BAND else (
        Regime.SUBCRITICAL if B < Bc else Regime.SUPERCRITICAL)
    return Scan2Row(
        n=int(n), B=float(B), C=float(C), delta=float(delta), bezel_heavy=bool(bezel_heavy),
        bezel=m.bezel, heavy_margin=m.heavy, light_margin=m.light, adjustment=m.adjustment,
        Bc=Bc, regime=reg.value,
        Z_corner=float(Z[0, 0]), Z_cross=float(Z[0, -1]), Z_bulk=float(Z[-1, -1]),
        residual=rep.residual_inf, converged=rep.converged,
    )


def scan_2way(C: float, B_grid, n_grid, delta: float, bezel_heavy: bool = True,
              tol: float = 1e-10, threads: int = 1) -> list[Scan2Row]:
    points = [(int(n), float(B)) for n in n_grid for B in B_grid]
    if not points:
        raise InvalidInput("B and n grids must be nonempty")
    rows = _grid_map(lambda n, B: scan_2way_point(n, B, C, delta, bezel_heavy, tol), points, threads)
    return sorted(rows, key=lambda r: (r.n, r.B))


def fiber_experiment(spec: MarginSpec, targets=("uniform", "hypergeometric"), steps: int = 10_000,
                     seed: int = 0, burn_in: int = 0, thin: int = 1,
                     budget: int = DEFAULT_FIBER_BUDGET) -> dict:
    """Run both samplers on one fiber and compare with the exact weights when enumerable."""
    moves = independence_moves(spec.dims)
    start = northwest_corner(spec)
    report = {"spec": spec.to_json(), "steps": steps, "burn_in": burn_in, "thin": thin,
              "seed": seed, "moves": moves.size}
    try:
        fiber = enumerate_fiber(spec, budget=budget)
    except BudgetExceeded:
        fiber = None
    report["enumerable"] = fiber is not None
    if fiber is not None:
        connected, comps = connectivity_check(fiber, moves) if moves.materialized else (None, None)
        report.update(fiber_size=len(fiber), connected=connected, components=comps,
                      tv_uniform_vs_hypergeometric=divergence_uniform_vs_hypergeometric(fiber))
    chains = {}
    for i, name in enumerate(targets):
        target = Target.parse(name)
        cfg = ChainConfig(start, target, steps=steps, burn_in=burn_in, thin=thin,
                          seed=seed + i, keep_samples=fiber is not None)
        stats = run_chain(cfg, moves)
        values, counts = np.unique(stats.corner_trace, return_counts=True)
        entry = {
            "acceptance_rate": stats.acceptance_rate,
            "kept": int(stats.corner_trace.size),
            "corner_histogram": {str(int(v)): int(c) for v, c in zip(values, counts)},
        }
        if fiber is not None:
            entry["tv_to_exact"] = tv_distance(stats.frequencies(fiber), fiber_weights(fiber, target))
        chains[target.value] = entry
    report["chains"] = chains
    return report


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(rows[0])]
    writer.writerow(names)
    for r in rows:
        writer.writerow([_fmt(getattr(r, k)) for k in names])
    return buf.getvalue()


def rows_to_json(rows) -> str:
    def clean(v):
        return None if isinstance(v, float) and not math.isfinite(v) else v

    return json.dumps([{k: clean(v) for k, v in asdict(r).items()} for r in rows], indent=2) + "\n"


def read_scan_csv(text: str) -> list[dict]:
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {}
        for k, v in rec.items():
            if k in ("n",):
                row[k] = int(v)
            elif k in ("regime",):
                row[k] = v
            elif k in ("converged",):
                row[k] = v == "true"
            else:
                row[k] = float(v)
        out.append(row)
    return out


@dataclass
class RunManifest:
    command: list
    config: dict
    seeds: list
    version: str
    timestamp: str
    python: str = ""
    schema_version: int = SCAN_SCHEMA_VERSION

    @classmethod
    def create(cls, argv, config, seeds=()) -> "RunManifest":
        from . import __version__

        return cls(
            command=list(argv),
            config=config,
            seeds=list(seeds),
            version=__version__,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            python=f"{platform.python_implementation()} {sys.version.split()[0]}",
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))
