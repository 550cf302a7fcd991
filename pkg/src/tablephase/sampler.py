"""Metropolis-Hastings walks on a fiber driven by Markov moves.

Randomness comes from numpy's Philox generator (a counter-based bit
generator), drawn in batches outside the compiled loop. The loop itself is
deterministic, so the numba and pure-Python paths give identical traces for
the same seed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .errors import InvalidInput
from .fiber import Fiber, FiberDistribution, Target, fiber_weights, neighbour_pairs
from .moves import MoveSet, draw_proposals, independence_moves
from .tables import MarginSpec, Table, all_margins, northwest_corner

logger = logging.getLogger(__name__)

BATCH = 1 << 16
CHECK_EVERY = 1000


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass
class ChainConfig:
    start: Table
    target: Target = Target.UNIFORM
    steps: int = 10_000
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    keep_samples: bool = True

    def __post_init__(self):
        self.target = Target.parse(self.target)
        if not self.steps > self.burn_in >= 0:
            raise InvalidInput("need steps > burn_in >= 0")
        if self.thin < 1:
            raise InvalidInput("thin must be at least 1")

    @property
    def n_kept(self) -> int:
        return -(-(self.steps - self.burn_in) // self.thin)


@dataclass
class ChainStats:
    samples: np.ndarray | None  # (kept, n_cells) or None in summary mode
    acceptance_rate: float
    corner_trace: np.ndarray
    final: Table
    accepted: int = 0
    steps: int = 0
    dims: tuple = field(default=())

    def frequencies(self, fiber: Fiber) -> np.ndarray:
        """Empirical distribution of kept samples over the fiber's ordering."""
        if self.samples is None:
            raise InvalidInput("chain ran in summary mode; no samples kept")
        lookup = fiber.index()
        counts = np.zeros(len(fiber))
        rows, mult = np.unique(self.samples, axis=0, return_counts=True)
        for row, m in zip(rows, mult):
            key = np.ascontiguousarray(row, dtype=np.int64).tobytes()
            if key not in lookup:
                raise InvalidInput("a sample lies outside the fiber")
            counts[lookup[key]] = m
        return counts / counts.sum()

    def to_json(self) -> dict:
        return {
            "dims": list(self.dims),
            "steps": self.steps,
            "accepted": self.accepted,
            "acceptance_rate": self.acceptance_rate,
            "kept": int(self.corner_trace.size),
            "corner_trace": [int(v) for v in self.corner_trace],
            "final": self.final.to_json(),
            "samples": None if self.samples is None else [[int(v) for v in row] for row in self.samples],
        }


def _log_factorials(total: int) -> np.ndarray:
    return gammaln(np.arange(total + 2, dtype=np.float64) + 1.0)


def mh_step(state: Table, moves: MoveSet, target, rng: np.random.Generator):
    """One proposal-and-accept step; returns (next table, accepted)."""
    target = Target.parse(target)
    _, walk = _kernels.kernels()
    cells, deltas = draw_proposals(moves, 1, rng)
    u = rng.random(1)
    buf = state.data.copy()
    lf = _log_factorials(int(buf.sum()))
    acc, _ = walk(buf, cells, deltas, u, lf, target is Target.HYPERGEOMETRIC,
                  0, 1, 1, np.zeros((0, buf.size), np.int64), np.zeros(1, np.int64), 0)
    return Table(buf, dims=state.dims), bool(acc)


def acceptance_probability(state: Table, proposal: Table, target) -> float:
    """min(1, pi(proposal) / pi(state)) for the given fiber target."""
    target = Target.parse(target)
    if target is Target.UNIFORM:
        return 1.0
    logr = gammaln(state.data + 1.0).sum() - gammaln(proposal.data + 1.0).sum()
    return float(min(1.0, np.exp(logr)))


def run_chain(config: ChainConfig, moves: MoveSet | None = None, use_numba=None) -> ChainStats:
    """Run a chain from ``config.start``; deterministic for a fixed seed."""
    start = config.start
    if moves is None:
        moves = independence_moves(start.dims)
    if tuple(moves.dims) != tuple(start.dims):
        raise InvalidInput("move set dims do not match the start table")
    _, walk = _kernels.kernels(use_numba)
    rng = make_rng(config.seed)
    state = start.data.copy()
    margins0 = all_margins(start)
    lf = _log_factorials(int(state.sum()))
    hyper = config.target is Target.HYPERGEOMETRIC
    n_kept = config.n_kept
    samples = np.zeros((n_kept if config.keep_samples else 0, state.size), dtype=np.int64)
    corner = np.zeros(n_kept, dtype=np.int64)
    accepted = kept = 0
    done = 0
    while done < config.steps:
        batch = min(BATCH, config.steps - done)
        cells, deltas = draw_proposals(moves, batch, rng)
        uniforms = rng.random(batch)
        for lo in range(0, batch, CHECK_EVERY):
            hi = min(lo + CHECK_EVERY, batch)
            a, kept = walk(state, cells[lo:hi], deltas[lo:hi], uniforms[lo:hi], lf, hyper,
                           done + lo, config.burn_in, config.thin, samples, corner, kept)
            accepted += a
            current = state.reshape(start.dims)
            if not all(np.array_equal(m, m0) for m, m0 in zip(all_margins(current), margins0)):
                raise AssertionError("walk left the fiber")  # pragma: no cover
        done += batch
    assert kept == n_kept
    return ChainStats(
        samples=samples if config.keep_samples else None,
        acceptance_rate=accepted / config.steps,
        corner_trace=corner,
        final=Table(state, dims=start.dims),
        accepted=accepted,
        steps=config.steps,
        dims=tuple(start.dims),
    )


def tv_distance(empirical, exact) -> float:
    p = np.asarray(empirical, dtype=float)
    q = np.asarray(exact.weights if isinstance(exact, FiberDistribution) else exact, dtype=float)
    if p.shape != q.shape:
        raise InvalidInput(f"length mismatch: {p.shape} vs {q.shape}")
    return float(0.5 * np.abs(p - q).sum())


def divergence_uniform_vs_hypergeometric(fiber: Fiber) -> float:
    return tv_distance(fiber_weights(fiber, Target.UNIFORM).weights,
                       fiber_weights(fiber, Target.HYPERGEOMETRIC).weights)


def transition_matrix(fiber: Fiber, moves: MoveSet, target) -> np.ndarray:
    """Exact one-step kernel on an enumerated fiber.

    Each (move, sign) pair is proposed with probability 1 / (2 |moves|);
    infeasible or rejected proposals leave the chain in place.
    """
    target = Target.parse(target)
    n = len(fiber)
    logpi = np.zeros(n)
    if target is Target.HYPERGEOMETRIC:
        logpi = -gammaln(fiber.array + 1.0).sum(axis=1)
    q = 1.0 / (2 * moves.size)
    P = np.zeros((n, n))
    for src, dst, _, _ in neighbour_pairs(fiber, moves):
        P[src, dst] += q * min(1.0, np.exp(logpi[dst] - logpi[src]))
    P[np.diag_indices(n)] += 1.0 - P.sum(axis=1)
    return P


def detailed_balance_gap(fiber: Fiber, moves: MoveSet, target) -> float:
    """max |pi(y) P(y, y') - pi(y') P(y', y)| over all ordered pairs."""
    pi = fiber_weights(fiber, target).weights
    P = transition_matrix(fiber, moves, target)
    flow = pi[:, None] * P
    return float(np.abs(flow - flow.T).max())


def start_table(spec: MarginSpec) -> Table:
    return northwest_corner(spec)
