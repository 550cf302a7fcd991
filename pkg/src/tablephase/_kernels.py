"""Scalar inner loops: fiber backtracking and the Metropolis-Hastings walk.

Both are written once in plain Python over numpy arrays and compiled with
numba's ``njit`` unless ``TABLEPHASE_DISABLE_NUMBA`` is set (or numba is
missing). The two paths consume identical inputs, including the random
draws, so they produce identical outputs.
"""
import functools
import os

import numpy as np

_FLAG = os.environ.get("TABLEPHASE_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def _enumerate_py(cell_pos, budgets, later_ptr, later_idx, out, limit):
    """Depth-first fill of cells in row-major order, smallest value first.

    cell_pos[c, d] is the position in ``budgets`` of the axis-d margin entry
    that cell c contributes to. later_idx[later_ptr[d, c]:later_ptr[d, c + 1]]
    lists the cells after c sharing its axis-d slice; their combined
    capacity bounds how much of that margin can be deferred past c.

    Writes up to out.shape[0] solutions and returns the total count, stopping
    early once it exceeds ``limit``.
    """
    C, k = cell_pos.shape
    r = budgets.copy()
    vals = np.zeros(C, dtype=np.int64)
    hi = np.zeros(C, dtype=np.int64)
    count = 0
    p = 0
    descend = True
    while True:
        if descend:
            if p == C:
                if count < out.shape[0]:
                    for c in range(C):
                        out[count, c] = vals[c]
                count += 1
                if count > limit:
                    return count
                p -= 1
                descend = False
                continue
            h = r[cell_pos[p, 0]]
            for d in range(1, k):
                if r[cell_pos[p, d]] < h:
                    h = r[cell_pos[p, d]]
            lo = 0
            for d in range(k):
                cap = 0
                for t in range(later_ptr[d, p], later_ptr[d, p + 1]):
                    q = later_idx[t]
                    m = -1
                    for e in range(k):
                        if e != d:
                            v = r[cell_pos[q, e]]
                            if m < 0 or v < m:
                                m = v
                    cap += m
                need = r[cell_pos[p, d]] - cap
                if need > lo:
                    lo = need
            if lo > h:
                p -= 1
                descend = False
                continue
            vals[p] = lo
            hi[p] = h
            for d in range(k):
                r[cell_pos[p, d]] -= lo
            p += 1
        else:
            if p < 0:
                break
            if vals[p] < hi[p]:
                vals[p] += 1
                for d in range(k):
                    r[cell_pos[p, d]] -= 1
                p += 1
                descend = True
            else:
                for d in range(k):
                    r[cell_pos[p, d]] += vals[p]
                vals[p] = 0
                p -= 1
    return count


def _walk_py(state, cells, deltas, uniforms, logfact, hypergeometric,
             step0, burn_in, thin, samples, corner, kept0):
    """Advance ``state`` in place through len(uniforms) proposals.

    Proposal s is global step step0 + s. A step is kept when its index is at
    least ``burn_in`` and a multiple of ``thin`` past it; kept states go to
    samples[kept] (if samples has rows) and corner[kept].

    Returns (accepted, kept) where kept is the updated write position.
    """
    accepted = 0
    kept = kept0
    n_cells = state.shape[0]
    store = samples.shape[0] > 0
    for s in range(uniforms.shape[0]):
        feasible = True
        for q in range(4):
            if state[cells[s, q]] + deltas[s, q] < 0:
                feasible = False
                break
        if feasible:
            accept = True
            if hypergeometric:
                logr = 0.0
                for q in range(4):
                    y = state[cells[s, q]]
                    logr += logfact[y] - logfact[y + deltas[s, q]]
                if logr < 0.0 and uniforms[s] >= np.exp(logr):
                    accept = False
            if accept:
                for q in range(4):
                    state[cells[s, q]] += deltas[s, q]
                accepted += 1
        t = step0 + s
        if t >= burn_in and (t - burn_in) % thin == 0:
            if store:
                for c in range(n_cells):
                    samples[kept, c] = state[c]
            corner[kept] = state[0]
            kept += 1
    return accepted, kept


if USE_NUMBA:
    enumerate_kernel = numba.njit(cache=True)(_enumerate_py)
    walk_kernel = numba.njit(cache=True)(_walk_py)
else:
    enumerate_kernel = _enumerate_py
    walk_kernel = _walk_py


@functools.lru_cache(maxsize=None)
def _jitted():
    if numba is None:  # pragma: no cover
        raise RuntimeError("numba is not installed")
    if USE_NUMBA:
        return enumerate_kernel, walk_kernel
    return numba.njit(cache=True)(_enumerate_py), numba.njit(cache=True)(_walk_py)


def kernels(use_numba=None):
    """Return (enumerate_kernel, walk_kernel) for the requested path."""
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        return _jitted()
    return _enumerate_py, _walk_py
