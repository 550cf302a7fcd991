"""Time the numba kernels against their pure-Python fallbacks.

    python3 benchmarks/bench_kernels.py [--steps 200000] [--repeat 3]

Both paths get identical inputs; the script checks their outputs agree
before reporting timings.
"""
import argparse
import time

import numpy as np

from tablephase import _kernels
from tablephase.fiber import _slice_structure
from tablephase.moves import draw_proposals, independence_moves
from tablephase.sampler import _log_factorials, make_rng
from tablephase.tables import MarginSpec, northwest_corner


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_walk(use_numba, spec, steps, repeat, seed=0):
    _, walk = _kernels.kernels(use_numba)
    start = northwest_corner(spec)
    moves = independence_moves(spec.dims)
    rng = make_rng(seed)
    cells, deltas = draw_proposals(moves, steps, rng)
    u = rng.random(steps)
    lf = _log_factorials(spec.total)
    corner = np.zeros(steps, np.int64)
    samples = np.zeros((0, start.data.size), np.int64)

    def run():
        state = start.data.copy()
        acc, _ = walk(state, cells, deltas, u, lf, True, 0, 0, 1, samples, corner, 0)
        return acc, state.copy(), corner.copy()

    run()  # compile outside the timed region
    return best_of(run, repeat)


def bench_enumerate(use_numba, spec, repeat):
    enum, _ = _kernels.kernels(use_numba)
    cell_pos, ptr, later = _slice_structure(spec.dims)
    budgets = np.concatenate(spec.axis_sums).astype(np.int64)
    n = cell_pos.shape[0]
    count = enum(cell_pos, budgets, ptr, later, np.zeros((0, n), np.int64), 10**7)

    def run():
        out = np.zeros((count, n), np.int64)
        enum(cell_pos, budgets, ptr, later, out, 10**7)
        return out

    return best_of(run, repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")

    walk_spec = MarginSpec([[6, 6, 6], [6, 6, 6], [6, 6, 6]])
    enum_spec = MarginSpec([[3, 3, 3], [3, 3, 3], [3, 3, 3]])
    print(f"{'kernel':<28}{'python (s)':>12}{'numba (s)':>12}{'speedup':>10}")

    t_py, out_py = bench_walk(False, walk_spec, args.steps, args.repeat)
    t_nb, out_nb = bench_walk(True, walk_spec, args.steps, args.repeat)
    assert out_py[0] == out_nb[0] and np.array_equal(out_py[1], out_nb[1]) and np.array_equal(out_py[2], out_nb[2])
    print(f"{'MH walk, 3x3x3, %d steps' % args.steps:<28}{t_py:>12.3f}{t_nb:>12.4f}{t_py / t_nb:>9.0f}x")

    t_py, out_py = bench_enumerate(False, enum_spec, args.repeat)
    t_nb, out_nb = bench_enumerate(True, enum_spec, args.repeat)
    assert np.array_equal(out_py, out_nb)
    print(f"{'enumerate (3,3,3)^3, %d' % len(out_py):<28}{t_py:>12.3f}{t_nb:>12.4f}{t_py / t_nb:>9.0f}x")


if __name__ == "__main__":
    main()
