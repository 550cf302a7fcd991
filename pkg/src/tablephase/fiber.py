"""Exact fibers of the independence model and their conditional distributions.

This is the ground truth the samplers are checked against, so everything
here favours exactness over speed: fibers are enumerated completely and
weights are normalized over the whole enumeration.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse, stats
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln, logsumexp

from . import _kernels
from .errors import BudgetExceeded, EmptyFiber, InvalidInput
from .moves import MoveSet
from .tables import MarginSpec, Table, validate_margin_spec

DEFAULT_FIBER_BUDGET = 5_000_000


class Target(str, Enum):
    UNIFORM = "uniform"
    HYPERGEOMETRIC = "hypergeometric"

    @classmethod
    def parse(cls, value) -> "Target":
        if isinstance(value, Target):
            return value
        v = str(value).strip().lower()
        if v in ("hypergeom", "hyper", "hypergeometric"):
            return cls.HYPERGEOMETRIC
        if v == "uniform":
            return cls.UNIFORM
        raise InvalidInput(f"unknown target distribution {value!r}")


@dataclass(frozen=True, eq=False)
class Fiber:
    """All tables with the spec's margins, in lexicographic order of flat data."""

    spec: MarginSpec
    array: np.ndarray  # (count, n_cells) int64

    def __len__(self):
        return self.array.shape[0]

    @property
    def tables(self) -> list[Table]:
        return [Table(row, dims=self.spec.dims) for row in self.array]

    def index(self) -> dict[bytes, int]:
        return {row.tobytes(): i for i, row in enumerate(self.array)}


@dataclass(frozen=True, eq=False)
class FiberDistribution:
    kind: Target
    weights: np.ndarray


def _slice_structure(dims):
    """Per-cell margin positions and, per axis, the later cells in the same slice."""
    k = len(dims)
    n_cells = int(np.prod(dims))
    idx = np.array(np.unravel_index(np.arange(n_cells), dims)).T  # (C, k)
    offsets = np.concatenate([[0], np.cumsum(dims)[:-1]])
    cell_pos = (idx + offsets).astype(np.int64)
    ptr = np.zeros((k, n_cells + 1), dtype=np.int64)
    later = []
    total = 0
    for d in range(k):
        for c in range(n_cells):
            ptr[d, c] = total
            same = np.nonzero(idx[c + 1:, d] == idx[c, d])[0] + c + 1
            later.append(same)
            total += same.size
        ptr[d, n_cells] = total
    later_idx = np.concatenate(later).astype(np.int64) if total else np.zeros(0, dtype=np.int64)
    return cell_pos, ptr, later_idx


def count_fiber(spec: MarginSpec, limit: int = DEFAULT_FIBER_BUDGET, use_numba=None) -> int:
    """Size of the fiber, or limit + 1 if it is larger than ``limit``."""
    validate_margin_spec(spec)
    enum_kernel, _ = _kernels.kernels(use_numba)
    cell_pos, ptr, later = _slice_structure(spec.dims)
    budgets = np.concatenate(spec.axis_sums).astype(np.int64)
    return int(enum_kernel(cell_pos, budgets, ptr, later, np.zeros((0, len(cell_pos)), np.int64), limit))


def enumerate_fiber(spec: MarginSpec, budget: int = DEFAULT_FIBER_BUDGET, use_numba=None) -> Fiber:
    """Every nonnegative integer table with the given plane sums.

    Raises BudgetExceeded when there are more than ``budget`` tables; switch
    to sampling in that case.
    """
    validate_margin_spec(spec)
    enum_kernel, _ = _kernels.kernels(use_numba)
    cell_pos, ptr, later = _slice_structure(spec.dims)
    budgets = np.concatenate(spec.axis_sums).astype(np.int64)
    n_cells = cell_pos.shape[0]
    count = int(enum_kernel(cell_pos, budgets, ptr, later, np.zeros((0, n_cells), np.int64), budget))
    if count > budget:
        raise BudgetExceeded(f"fiber has more than {budget} tables")
    out = np.zeros((count, n_cells), dtype=np.int64)
    enum_kernel(cell_pos, budgets, ptr, later, out, budget)
    out.setflags(write=False)
    return Fiber(spec, out)


def fiber_weights(fiber: Fiber, kind) -> FiberDistribution:
    """Uniform weights, or hypergeometric weights proportional to 1 / prod(cell!)."""
    kind = Target.parse(kind)
    if len(fiber) == 0:
        raise EmptyFiber("fiber is empty")
    if kind is Target.UNIFORM:
        w = np.full(len(fiber), 1.0 / len(fiber))
    else:
        logw = -gammaln(fiber.array + 1.0).sum(axis=1)
        w = np.exp(logw - logsumexp(logw))
    return FiberDistribution(kind, w)


def conditional_poisson_oracle(spec: MarginSpec, rate=1.0, fiber: Fiber | None = None) -> FiberDistribution:
    """Law of independent Poisson cells conditioned on the margins.

    ``rate`` is a scalar or a per-cell array. With a common rate (or any
    rank-1 product of per-axis rates) the rate cancels and the result is the
    hypergeometric distribution on the fiber.
    """
    if fiber is None:
        fiber = enumerate_fiber(spec)
    if len(fiber) == 0:
        raise EmptyFiber("fiber is empty")
    n_cells = fiber.array.shape[1]
    rate = np.asarray(rate, dtype=float)
    rate = np.full(n_cells, float(rate)) if rate.ndim == 0 else rate.reshape(-1)
    if rate.size != n_cells or np.any(rate <= 0):
        raise InvalidInput("rates must be positive, one scalar or one per cell")
    logp = stats.poisson.logpmf(fiber.array, rate[None, :]).sum(axis=1)
    return FiberDistribution(Target.HYPERGEOMETRIC, np.exp(logp - logsumexp(logp)))


def geometric_conditional(fiber: Fiber, theta: np.ndarray) -> np.ndarray:
    """Normalize independent geometric cell probabilities over the fiber.

    ``theta`` holds the per-cell tilts (cell mean 1/(e^theta - 1)). For
    rank-1 tilts the result is uniform on the fiber.
    """
    if len(fiber) == 0:
        raise EmptyFiber("fiber is empty")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    # scipy's geom lives on {1, 2, ...}; shift by one
    logp = stats.geom.logpmf(fiber.array + 1, -np.expm1(-theta)[None, :]).sum(axis=1)
    return np.exp(logp - logsumexp(logp))


def neighbour_pairs(fiber: Fiber, moves: MoveSet):
    """All (source, target, move index, sign) with target = source + sign * move inside the fiber."""
    if not moves.materialized:
        raise InvalidInput("connectivity needs a materialized move set")
    if tuple(moves.dims) != tuple(fiber.spec.dims):
        raise InvalidInput("move set and fiber have different dims")
    lookup = fiber.index()
    F = fiber.array
    out = []
    for mi in range(moves.size):
        delta = np.zeros(F.shape[1], dtype=np.int64)
        delta[moves.cells[mi]] = moves.coeffs[mi]
        for sign in (1, -1):
            moved = F + sign * delta
            ok = np.nonzero((moved >= 0).all(axis=1))[0]
            for src in ok:
                dst = lookup[moved[src].tobytes()]
                out.append((int(src), dst, mi, sign))
    return out


def connectivity_check(fiber: Fiber, moves: MoveSet) -> tuple[bool, int]:
    """Whether feasible move applications connect the whole fiber, and the component count."""
    n = len(fiber)
    if n == 0:
        return True, 0
    pairs = neighbour_pairs(fiber, moves)
    if pairs:
        src, dst = np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])
    else:
        src = dst = np.zeros(0, dtype=np.int64)
    graph = sparse.coo_matrix((np.ones(src.size), (src, dst)), shape=(n, n))
    n_comp, _ = connected_components(graph, directed=False)
    return n_comp == 1, int(n_comp)
