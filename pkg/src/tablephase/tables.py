"""Dense 2-way and 3-way tables, plane-sum margins and margin specs.

Tables are immutable: the backing array is flagged read-only after
construction, so instances can be shared between threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput, MismatchedTotals, NegativeEntry

SUPPORTED_ORDERS = (2, 3)


def _check_dims(dims) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if len(dims) not in SUPPORTED_ORDERS:
        raise InvalidInput(f"only 2-way and 3-way tables are supported, got dims {dims}")
    if any(d < 1 for d in dims):
        raise InvalidInput(f"dimensions must be positive, got {dims}")
    return dims


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Table:
    """Nonnegative integer table stored as an int64 array of shape ``dims``."""

    array: np.ndarray

    def __init__(self, data, dims=None):
        arr = np.array(data, dtype=np.int64)
        if dims is not None:
            dims = _check_dims(dims)
            if arr.size != int(np.prod(dims)):
                raise InvalidInput(f"data has {arr.size} entries, dims {dims} need {int(np.prod(dims))}")
            arr = arr.reshape(dims)
        else:
            _check_dims(arr.shape)
        if np.any(arr < 0):
            raise NegativeEntry("table entries must be nonnegative")
        object.__setattr__(self, "array", _frozen(arr))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def data(self) -> np.ndarray:
        return self.array.reshape(-1)

    def key(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.data)

    def __eq__(self, other):
        if not isinstance(other, Table):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.array, other.array)

    def __hash__(self):
        return hash((self.dims, self.key()))

    def __repr__(self):
        return f"Table(dims={self.dims}, data={list(self.key())})"

    def to_json(self) -> dict:
        return {"dims": list(self.dims), "data": list(self.key())}

    @classmethod
    def from_json(cls, obj) -> "Table":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            return cls(obj["data"], dims=obj["dims"])
        except KeyError as exc:
            raise InvalidInput(f"table JSON missing field {exc}") from None


@dataclass(frozen=True, eq=False)
class RealTable:
    """Nonnegative finite real table (typical tables, expected tables)."""

    array: np.ndarray

    def __init__(self, data, dims=None):
        arr = np.array(data, dtype=np.float64)
        if dims is not None:
            arr = arr.reshape(_check_dims(dims))
        else:
            _check_dims(arr.shape)
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("real table entries must be finite")
        if np.any(arr < 0):
            raise NegativeEntry("real table entries must be nonnegative")
        object.__setattr__(self, "array", _frozen(arr))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def data(self) -> np.ndarray:
        return self.array.reshape(-1)

    def to_json(self) -> dict:
        return {"dims": list(self.dims), "data": [float(v) for v in self.data]}


def _as_array(table) -> np.ndarray:
    if isinstance(table, (Table, RealTable)):
        return table.array
    return np.asarray(table)


def plane_margins(table, axis: int) -> np.ndarray:
    """Sums of all cells sharing each index along ``axis``."""
    arr = _as_array(table)
    if not 0 <= axis < arr.ndim:
        raise InvalidInput(f"axis {axis} out of range for a {arr.ndim}-way table")
    other = tuple(a for a in range(arr.ndim) if a != axis)
    return arr.sum(axis=other)


def all_margins(table) -> list[np.ndarray]:
    arr = _as_array(table)
    return [plane_margins(arr, d) for d in range(arr.ndim)]


def grand_total(table):
    total = _as_array(table).sum()
    return total.item()


@dataclass(frozen=True, eq=False)
class MarginSpec:
    """Plane-sum vectors defining a fiber: (r, c) or (a, b, c)."""

    axis_sums: tuple

    def __init__(self, axis_sums: Sequence[Sequence[int]]):
        sums = []
        for vec in axis_sums:
            arr = np.array(vec, dtype=np.int64).reshape(-1)
            if arr.size == 0:
                raise InvalidInput("margin vectors must be nonempty")
            sums.append(_frozen(arr))
        _check_dims([v.size for v in sums])
        object.__setattr__(self, "axis_sums", tuple(sums))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(v.size for v in self.axis_sums)

    @property
    def order(self) -> int:
        return len(self.axis_sums)

    @property
    def total(self) -> int:
        return validate_margin_spec(self)

    def __eq__(self, other):
        if not isinstance(other, MarginSpec):
            return NotImplemented
        return len(self.axis_sums) == len(other.axis_sums) and all(
            np.array_equal(u, v) for u, v in zip(self.axis_sums, other.axis_sums)
        )

    def __hash__(self):
        return hash(tuple(tuple(int(x) for x in v) for v in self.axis_sums))

    def __repr__(self):
        return f"MarginSpec({[list(map(int, v)) for v in self.axis_sums]})"

    def matches(self, table) -> bool:
        arr = _as_array(table)
        if arr.shape != self.dims:
            return False
        return all(np.array_equal(m, v) for m, v in zip(all_margins(arr), self.axis_sums))

    def to_json(self) -> dict:
        return {"axis_sums": [[int(x) for x in v] for v in self.axis_sums]}

    @classmethod
    def from_json(cls, obj) -> "MarginSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if "axis_sums" not in obj:
            raise InvalidInput("margin spec JSON needs an 'axis_sums' field")
        return cls(obj["axis_sums"])

    @classmethod
    def of(cls, table) -> "MarginSpec":
        return cls(all_margins(table))


def validate_margin_spec(spec: MarginSpec) -> int:
    """Return the common grand total N, or raise if the axis sums disagree."""
    for vec in spec.axis_sums:
        if np.any(vec < 0):
            raise NegativeEntry("margin entries must be nonnegative")
    totals = [int(v.sum()) for v in spec.axis_sums]
    if len(set(totals)) != 1:
        raise MismatchedTotals(f"axis sums disagree: {totals}")
    return totals[0]


def northwest_corner(spec: MarginSpec) -> Table:
    """A member of the fiber built greedily from the first cell onward.

    At each step the current cell takes the smallest remaining budget and
    every axis whose budget hits zero advances. Works for any number of axes
    because only 1-margins are constrained.
    """
    validate_margin_spec(spec)
    remaining = [v.astype(np.int64).copy() for v in spec.axis_sums]
    out = np.zeros(spec.dims, dtype=np.int64)
    idx = [0] * spec.order
    while all(i < n for i, n in zip(idx, spec.dims)):
        v = min(r[i] for r, i in zip(remaining, idx))
        out[tuple(idx)] = v
        for d in range(spec.order):
            remaining[d][idx[d]] -= v
        for d in range(spec.order):
            if remaining[d][idx[d]] == 0:
                idx[d] += 1
    return Table(out)
