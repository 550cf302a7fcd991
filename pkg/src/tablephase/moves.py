"""Quadratic Markov moves for the independence model on 2-way and 3-way tables.

A move has +1 on two cells that differ in every coordinate and -1 on the two
cells obtained by exchanging a proper, nonempty subset of coordinates between
them. For 2-way tables that is the familiar 2x2 minor; for 3-way tables there
are three ways to split the coordinates, giving three sign patterns.

That 3-way family alone does not connect plane-sum fibers (the 2x2x2 fiber
with every margin (2, 2) falls into three pieces). The complete degree-2
basis adds the 2x2 minors taken inside a single slice, whose +1 cells share
one coordinate; ``markov_basis_3way`` returns both families together.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, prod

import numpy as np

from .errors import Infeasible, InvalidInput
from .tables import Table

DEFAULT_ENTRY_BUDGET = 10**7


@dataclass(frozen=True)
class Move:
    dims: tuple[int, ...]
    cells: tuple[int, int, int, int]  # flat row-major indices
    coeffs: tuple[int, int, int, int]

    @property
    def entries(self) -> list[tuple[tuple[int, ...], int]]:
        return [
            (tuple(int(x) for x in np.unravel_index(c, self.dims)), s)
            for c, s in zip(self.cells, self.coeffs)
        ]

    def to_array(self) -> np.ndarray:
        out = np.zeros(prod(self.dims), dtype=np.int64)
        np.add.at(out, list(self.cells), list(self.coeffs))
        return out.reshape(self.dims)

    def canonical(self) -> tuple:
        return tuple(sorted(zip(self.cells, self.coeffs)))

    def __neg__(self) -> "Move":
        return Move(self.dims, self.cells, tuple(-s for s in self.coeffs))

    def format(self) -> str:
        parts = []
        for idx, s in sorted(self.entries, key=lambda e: (-e[1], e[0])):
            parts.append(f"({','.join(str(i) for i in idx)}):{s:+d}")
        return ";".join(parts)


@dataclass(frozen=True, eq=False)
class MoveSet:
    """Moves for one table shape.

    ``cells`` and ``coeffs`` are (M, 4) arrays when the set is materialized.
    Above the entry budget they are None and proposals are drawn on demand;
    ``size`` still reports the exact count.
    """

    dims: tuple[int, ...]
    size: int
    cells: np.ndarray | None
    coeffs: np.ndarray | None
    includes_negatives: bool
    family: str = "2way"  # "2way", "plane" or "basis3"

    @property
    def materialized(self) -> bool:
        return self.cells is not None

    def __len__(self):
        return self.size

    def __iter__(self):
        if not self.materialized:
            raise InvalidInput("move set was not materialized; raise the entry budget to iterate")
        for c, s in zip(self.cells, self.coeffs):
            yield Move(self.dims, tuple(int(x) for x in c), tuple(int(x) for x in s))

    def __getitem__(self, i) -> Move:
        c, s = self.cells[i], self.coeffs[i]
        return Move(self.dims, tuple(int(x) for x in c), tuple(int(x) for x in s))


def _check_move_dims(dims) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if len(dims) not in (2, 3):
        raise InvalidInput(f"moves are defined for 2-way and 3-way tables, got {dims}")
    if any(d < 2 for d in dims):
        raise InvalidInput(f"every axis needs at least 2 levels for a move, got {dims}")
    return dims


def _frozen(*arrays):
    for a in arrays:
        a.setflags(write=False)
    return arrays


def count_moves_2way(m: int, n: int) -> int:
    return comb(m, 2) * comb(n, 2)


def count_moves_3way(n1: int, n2: int, n3: int) -> int:
    # (3/2) n1 n2 n3 (n1-1)(n2-1)(n3-1), kept in integers
    return 3 * n1 * n2 * n3 * (n1 - 1) * (n2 - 1) * (n3 - 1) // 2


def basic_moves_2way(m: int, n: int, entry_budget: int = DEFAULT_ENTRY_BUDGET) -> MoveSet:
    """One 2x2-minor move per unordered pair of rows and pair of columns."""
    m, n = _check_move_dims((m, n))
    size = count_moves_2way(m, n)
    if 4 * size > entry_budget:
        return MoveSet((m, n), size, None, None, includes_negatives=False, family="2way")
    i1, i2 = np.triu_indices(m, k=1)
    j1, j2 = np.triu_indices(n, k=1)
    I1 = np.repeat(i1, j1.size)
    I2 = np.repeat(i2, j1.size)
    J1 = np.tile(j1, i1.size)
    J2 = np.tile(j2, i1.size)
    cells = np.stack([I1 * n + J1, I2 * n + J2, I1 * n + J2, I2 * n + J1], axis=1).astype(np.int64)
    coeffs = np.tile(np.array([1, 1, -1, -1], dtype=np.int64), (size, 1))
    return MoveSet((m, n), size, *_frozen(cells, coeffs), includes_negatives=False, family="2way")


def count_slice_moves_3way(n1: int, n2: int, n3: int) -> int:
    dims = (n1, n2, n3)
    total = 0
    for d in range(3):
        a, b = (dims[e] for e in range(3) if e != d)
        total += dims[d] * a * (a - 1) * b * (b - 1) // 2
    return total


def _stack_moves(plus1, plus2, minus):
    cells = np.concatenate(
        [np.stack([plus1, plus2, m1, m2], axis=1) for m1, m2 in minus], axis=0
    ).astype(np.int64)
    coeffs = np.tile(np.array([1, 1, -1, -1], dtype=np.int64), (cells.shape[0], 1))
    return cells, coeffs


def _ordered_distinct(n):
    return np.array([(a, b) for a in range(n) for b in range(n) if a != b], dtype=np.int64).reshape(-1, 2)


def _plane_arrays(dims):
    n1, n2, n3 = dims
    # canonical representative of the unordered +1 pair: i1 < i2
    i1, i2 = np.triu_indices(n1, k=1)
    jj, kk = _ordered_distinct(n2), _ordered_distinct(n3)
    I, J, K = (g.ravel() for g in np.meshgrid(np.arange(i1.size), np.arange(len(jj)),
                                              np.arange(len(kk)), indexing="ij"))
    a1, a2 = i1[I], i2[I]
    b1, b2 = jj[J, 0], jj[J, 1]
    c1, c2 = kk[K, 0], kk[K, 1]

    def flat(i, j, k):
        return (i * n2 + j) * n3 + k

    return _stack_moves(flat(a1, b1, c1), flat(a2, b2, c2), [
        (flat(a2, b1, c1), flat(a1, b2, c2)),  # exchange the first coordinate
        (flat(a1, b2, c1), flat(a2, b1, c2)),  # exchange the second
        (flat(a1, b1, c2), flat(a2, b2, c1)),  # exchange the third
    ])


def _slice_arrays(dims):
    strides = np.array([dims[1] * dims[2], dims[2], 1])
    blocks = []
    for d in range(3):
        e, f = (x for x in range(3) if x != d)
        # signed minors in each slice: canonical row pair u1 < u2, any ordered column pair
        u1, u2 = np.triu_indices(dims[e], k=1)
        vv = _ordered_distinct(dims[f])
        S, U, V = (g.ravel() for g in np.meshgrid(np.arange(dims[d]), np.arange(u1.size),
                                                  np.arange(len(vv)), indexing="ij"))

        def flat(ue, vf):
            return S * strides[d] + ue * strides[e] + vf * strides[f]

        a1, a2, b1, b2 = u1[U], u2[U], vv[V, 0], vv[V, 1]
        blocks.append(_stack_moves(flat(a1, b1), flat(a2, b2), [(flat(a1, b2), flat(a2, b1))]))
    return (np.concatenate([b[0] for b in blocks]), np.concatenate([b[1] for b in blocks]))


def plane_moves_3way(n1: int, n2: int, n3: int, entry_budget: int = DEFAULT_ENTRY_BUDGET) -> MoveSet:
    """Degree-2 moves whose two +1 cells differ in all three coordinates.

    Each move is listed once as a signed tensor; the negative of a move is
    again in the set. There are (3/2) n1 n2 n3 (n1-1)(n2-1)(n3-1) of them.
    """
    dims = _check_move_dims((n1, n2, n3))
    size = count_moves_3way(*dims)
    if 4 * size > entry_budget:
        return MoveSet(dims, size, None, None, includes_negatives=True, family="plane")
    cells, coeffs = _plane_arrays(dims)
    assert cells.shape[0] == size
    return MoveSet(dims, size, *_frozen(cells, coeffs), includes_negatives=True, family="plane")


def markov_basis_3way(n1: int, n2: int, n3: int, entry_budget: int = DEFAULT_ENTRY_BUDGET) -> MoveSet:
    """All degree-2 moves for plane sums: the plane family plus in-slice minors."""
    dims = _check_move_dims((n1, n2, n3))
    size = count_moves_3way(*dims) + count_slice_moves_3way(*dims)
    if 4 * size > entry_budget:
        return MoveSet(dims, size, None, None, includes_negatives=True, family="basis3")
    pc, pk = _plane_arrays(dims)
    sc, sk = _slice_arrays(dims)
    cells, coeffs = np.concatenate([pc, sc]), np.concatenate([pk, sk])
    assert cells.shape[0] == size
    return MoveSet(dims, size, *_frozen(cells, coeffs), includes_negatives=True, family="basis3")


def independence_moves(dims, entry_budget: int = DEFAULT_ENTRY_BUDGET) -> MoveSet:
    """A Markov basis for the table shape: 2x2 minors, or the full 3-way degree-2 basis."""
    dims = _check_move_dims(dims)
    if len(dims) == 2:
        return basic_moves_2way(*dims, entry_budget=entry_budget)
    return markov_basis_3way(*dims, entry_budget=entry_budget)


def count_applicable_at_corner(n1: int, n2: int, n3: int) -> int:
    """Number of plane-family moves carrying +1 on the corner cell (0, 0, 0).

    Counted by scanning the generated move set, so it checks the generator
    rather than restating a formula. The corner is the first +1 cell of the
    move, matching the convention where (i1, j1, k1) is pinned to the corner.
    """
    ms = plane_moves_3way(n1, n2, n3, entry_budget=np.iinfo(np.int64).max)
    return int(np.count_nonzero(((ms.cells == 0) & (ms.coeffs == 1)).any(axis=1)))


def apply_move(table: Table, move: Move, sign: int = 1) -> Table:
    if tuple(table.dims) != tuple(move.dims):
        raise InvalidInput(f"move dims {move.dims} do not match table dims {table.dims}")
    if sign not in (1, -1):
        raise InvalidInput("sign must be +1 or -1")
    data = table.data.copy()
    for c, s in zip(move.cells, move.coeffs):
        data[c] += sign * s
    if np.any(data < 0):
        raise Infeasible("move would make a cell negative")
    return Table(data, dims=table.dims)


def draw_proposals(moves: MoveSet, count: int, rng: np.random.Generator):
    """Draw ``count`` signed moves uniformly; returns (cells, deltas) arrays of shape (count, 4).

    Materialized sets are indexed directly with a random sign. Otherwise
    ordered index tuples are drawn; every signed move arises from exactly two
    tuples, so the draw is again uniform.
    """
    if moves.materialized:
        idx = rng.integers(0, moves.size, size=count)
        sign = rng.integers(0, 2, size=count) * 2 - 1
        return moves.cells[idx], moves.coeffs[idx] * sign[:, None]

    dims = moves.dims
    k = len(dims)

    def distinct_pair(n):
        a = rng.integers(0, n, size=count)
        b = rng.integers(0, n - 1, size=count)
        return a, b + (b >= a)

    coords = [distinct_pair(n) for n in dims]
    if k == 2:
        swap_axis = np.zeros(count, dtype=np.int64)
    elif moves.family == "plane":
        swap_axis = rng.integers(0, 3, size=count)
    else:
        # family 0 = plane moves, family 1 + d = minors inside an axis-d slice
        sizes = [count_moves_3way(*dims)]
        for d in range(3):
            a, b = (dims[e] for e in range(3) if e != d)
            sizes.append(dims[d] * a * (a - 1) * b * (b - 1) // 2)
        fam = rng.choice(4, size=count, p=np.array(sizes) / sum(sizes))
        swap_axis = np.where(fam == 0, rng.integers(0, 3, size=count), fam % 3)
        for d in range(3):
            shared = fam == 1 + d
            coords[d] = (coords[d][0], np.where(shared, coords[d][0], coords[d][1]))
    strides = np.cumprod((1,) + dims[:0:-1])[::-1]

    def flat(sel):
        # sel[d] picks the second member of the axis-d pair where True
        return sum(np.where(sel[d], coords[d][1], coords[d][0]) * strides[d] for d in range(k))

    zeros = np.zeros(count, dtype=bool)
    swap = [swap_axis == d for d in range(k)]
    cells = np.stack([
        flat([zeros] * k), flat([~zeros] * k), flat(swap), flat([~s for s in swap]),
    ], axis=1).astype(np.int64)
    deltas = np.tile(np.array([1, 1, -1, -1], dtype=np.int64), (count, 1))
    return cells, deltas


def literal_pattern_moves(dims) -> list[Move]:
    """Reference enumeration over ordered index pairs with explicit dedup.

    Slow; used to cross-check the vectorized generators and the count
    formulas on small shapes.
    """
    dims = _check_move_dims(dims)
    k = len(dims)
    strides = np.cumprod((1,) + dims[:0:-1])[::-1]
    pairs = [[(a, b) for a in range(n) for b in range(n) if a != b] for n in dims]
    # one proper coordinate subset per complementary pair: those containing axis 0
    subsets = [s for r in range(1, k) for s in itertools.combinations(range(k), r) if 0 in s]
    seen = {}
    for choice in itertools.product(*pairs):
        p1 = tuple(c[0] for c in choice)
        p2 = tuple(c[1] for c in choice)
        for sub in subsets:
            m1 = tuple(choice[d][1] if d in sub else choice[d][0] for d in range(k))
            m2 = tuple(choice[d][0] if d in sub else choice[d][1] for d in range(k))
            f = [int(np.dot(p, strides)) for p in (p1, p2, m1, m2)]
            mv = Move(dims, tuple(f), (1, 1, -1, -1))
            if k == 2:
                # 2-way moves are listed up to sign
                key = min(mv.canonical(), (-mv).canonical())
            else:
                key = mv.canonical()
            seen.setdefault(key, mv)
    return list(seen.values())
