"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even when
output is captured) or directly with ``python3 tests/test_acceptance.py``.
"""
import itertools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from oracles import SPEC_SUITE, count_reverse  # noqa: E402

from tablephase.fiber import (Target, conditional_poisson_oracle, connectivity_check,  # noqa: E402
                              enumerate_fiber, fiber_weights, geometric_conditional)
from tablephase.moves import count_applicable_at_corner, independence_moves, plane_moves_3way  # noqa: E402
from tablephase.phase import scan_3way  # noqa: E402
from tablephase.sampler import ChainConfig, detailed_balance_gap, run_chain, tv_distance  # noqa: E402
from tablephase.tables import MarginSpec, northwest_corner  # noqa: E402
from tablephase.tilt import (BC_3WAY, Tilting, barvinok_margins, barvinok_solve,  # noqa: E402
                             log_likelihood, solve_mle)

N_GRID = [50, 100, 200, 400, 800]


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    tr = getattr(report, "terminal", None)
    if tr is not None:
        tr.write_line(line)
    else:
        print(line)
    return ok


@pytest.fixture(autouse=True)
def _terminal(request):
    report.terminal = request.config.pluginmanager.get_plugin("terminalreporter")
    yield
    report.terminal = None


def _band_ratio(values):
    return max(values) / min(values)


def test_criterion_1_subcritical():
    t0 = time.perf_counter()
    row = {r.n: r for r in scan_3way([1.2], N_GRID)}
    at400 = row[400]
    close = all(abs(z - want) <= 5e-2 for z, want in
                zip((at400.Z111, at400.Z121, at400.Z221, at400.Z222), (1.850, 1.469, 1.200, 1.0)))
    bands = {}
    for B in (1.1, 1.2, 1.4):
        rows = scan_3way([B], N_GRID)
        for col in ("errZ111", "errZ121", "errZ221", "errZ222"):
            bands[(B, col)] = _band_ratio([getattr(r, col) * r.n for r in rows])
    worst = max(bands.values())
    elapsed = time.perf_counter() - t0
    ok = close and worst <= 3.0 and elapsed < 10
    detail = (f"n=400 Z=({at400.Z111:.4f}, {at400.Z121:.4f}, {at400.Z221:.4f}, {at400.Z222:.4f}); "
              f"max err*n band ratio {worst:.3f} (<= 3); {elapsed:.2f}s")
    assert report(1, ok, detail)


def test_criterion_2_supercritical():
    t0 = time.perf_counter()
    sol = barvinok_solve(400, 2.5)
    z111, z121, z221, _ = sol.cells()
    slope = z111 / 400 ** 2
    rel = abs(slope - (2.5 - BC_3WAY)) / (2.5 - BC_3WAY)
    elapsed = time.perf_counter() - t0
    ok = rel <= 0.02 and abs(z121 - 3.84732) <= 5e-2 and abs(z221 - 1.70241) <= 5e-2 and elapsed < 10
    detail = (f"Z111/n^2={slope:.5f} (rel err {rel:.4f} vs 0.79759), Z121={z121:.4f}, "
              f"Z221={z221:.4f}; {elapsed:.2f}s")
    assert report(2, ok, detail)


def test_criterion_3_q_asymptotics():
    rows = scan_3way([1.0, 1.2, 2.5], N_GRID)
    worst = max(abs(r.Q ** 3 - 2) * r.n for r in rows)
    ok = worst <= 10 and all(r.converged for r in rows)
    assert report(3, ok, f"max |Q^3-2|*n = {worst:.4f} (<= 10) over {len(rows)} rows")


def test_criterion_4_cross_solver():
    worst_pq, worst_res = 0.0, 0.0
    for n, B in itertools.product([4, 8, 12], [1.2, 2.5]):
        sol = barvinok_solve(n, B)
        rep = solve_mle(barvinok_margins(n, B))
        t = rep.tilting.gauge_normalized()
        # symmetric margins: under the equal-mean gauge all three axis vectors agree
        P, Q = math.exp(t.alpha[0]), math.exp(t.alpha[1])
        worst_pq = max(worst_pq, abs(P - sol.P), abs(Q - sol.Q))
        worst_res = max(worst_res, rep.residual_inf)
    ok = worst_pq <= 1e-8 and worst_res <= 1e-10
    assert report(4, ok, f"max |dP|,|dQ| = {worst_pq:.2e} (<= 1e-8), max residual {worst_res:.2e}")


def test_criterion_5_fiber_likelihoods():
    rng = np.random.default_rng(5)
    worst_uniform, worst_poisson = 0.0, 0.0
    for _, sums in SPEC_SUITE:
        spec = MarginSpec(sums)
        fiber = enumerate_fiber(spec)
        flat = 1.0 / len(fiber)
        tilts = [solve_mle(spec).tilting.theta().ravel()]
        dims = spec.dims
        params = [rng.uniform(0.05, 1.5, n) for n in dims]
        tilts.append(Tilting(params).theta().ravel())
        for theta in tilts:
            worst_uniform = max(worst_uniform, float(np.abs(geometric_conditional(fiber, theta) - flat).max()))
        hyper = fiber_weights(fiber, Target.HYPERGEOMETRIC).weights
        for rate in (0.5, 3.0):
            got = conditional_poisson_oracle(spec, rate, fiber=fiber).weights
            worst_poisson = max(worst_poisson, float(np.abs(got - hyper).max()))
    ok = len(SPEC_SUITE) >= 10 and worst_uniform <= 1e-10 and worst_poisson <= 1e-10
    detail = (f"{len(SPEC_SUITE)} specs; geometric vs uniform {worst_uniform:.1e}, "
              f"hypergeometric vs Poisson (rates 0.5, 3) {worst_poisson:.1e}")
    assert report(5, ok, detail)


def test_criterion_6_move_counts():
    bad = []
    for dims in itertools.product([2, 3, 4], repeat=3):
        n1, n2, n3 = dims
        want = 3 * n1 * n2 * n3 * (n1 - 1) * (n2 - 1) * (n3 - 1) // 2
        corner = 3 * (n1 - 1) * (n2 - 1) * (n3 - 1)
        if plane_moves_3way(*dims).size != want or count_applicable_at_corner(*dims) != corner:
            bad.append(dims)
    assert report(6, not bad, f"27 shapes checked, mismatches: {bad or 'none'}")


def test_criterion_7_fiber_oracle():
    two = len(enumerate_fiber(MarginSpec([[1, 1], [1, 1]])))
    twentyone = len(enumerate_fiber(MarginSpec([[2, 2, 2], [2, 2, 2]])))
    oracle_ok = (two, twentyone) == (count_reverse([[1, 1], [1, 1]]), count_reverse([[2, 2, 2], [2, 2, 2]]))
    disconnected = []
    for name, sums in SPEC_SUITE:
        spec = MarginSpec(sums)
        if not connectivity_check(enumerate_fiber(spec), independence_moves(spec.dims))[0]:
            disconnected.append(name)
    ok = two == 2 and twentyone == 21 and oracle_ok and not disconnected
    detail = f"sizes {two} and {twentyone} (oracle agrees: {oracle_ok}); disconnected: {disconnected or 'none'}"
    assert report(7, ok, detail)


def test_criterion_8_sampler():
    t0 = time.perf_counter()
    kept, thin = 100_000, 5
    worst = {Target.UNIFORM: 0.0, Target.HYPERGEOMETRIC: 0.0}
    worst_balance = 0.0
    for i, (_, sums) in enumerate(SPEC_SUITE):
        spec = MarginSpec(sums)
        fiber = enumerate_fiber(spec)
        if len(fiber) > 200:
            continue
        for target in worst:
            cfg = ChainConfig(northwest_corner(spec), target, steps=kept * thin, thin=thin, seed=100 + i)
            stats = run_chain(cfg)
            tv = tv_distance(stats.frequencies(fiber), fiber_weights(fiber, target))
            worst[target] = max(worst[target], tv)
            if len(fiber) <= 50:
                gap = detailed_balance_gap(fiber, independence_moves(spec.dims), target)
                worst_balance = max(worst_balance, gap)
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 0.05 and worst_balance <= 1e-12 and elapsed < 60
    detail = (f"max TV uniform {worst[Target.UNIFORM]:.4f}, hypergeometric "
              f"{worst[Target.HYPERGEOMETRIC]:.4f} (< 0.05); detailed balance {worst_balance:.1e}; "
              f"{elapsed:.1f}s")
    assert report(8, ok, detail)


def test_criterion_9_numerical_hygiene():
    rng = np.random.default_rng(9)
    worst_fd = 0.0
    for _ in range(50):
        dims = tuple(rng.integers(2, 5, size=rng.choice([2, 3])))
        total = int(rng.integers(20, 200))
        sums = [(rng.multinomial(total - n, np.ones(n) / n) + 1).tolist() for n in dims]
        spec = MarginSpec(sums)
        params = [rng.uniform(0.05, 1.5, n) for n in dims]
        x = np.concatenate(params)
        offs = np.cumsum([0] + list(dims))

        def ell(v):
            return log_likelihood(spec, Tilting([v[offs[d]:offs[d + 1]] for d in range(len(dims))]))[0]

        grad = np.concatenate(log_likelihood(spec, Tilting(params))[1])
        h = 1e-6
        fd = np.array([(ell(x + h * e) - ell(x - h * e)) / (2 * h) for e in np.eye(x.size)])
        worst_fd = max(worst_fd, float(np.linalg.norm(fd - grad) / np.linalg.norm(grad)))

    worst_gap = -np.inf
    for _ in range(100):
        dims = tuple(rng.integers(2, 5, size=rng.choice([2, 3])))
        sums = [(rng.multinomial(60 - n, np.ones(n) / n) + 1).tolist() for n in dims]
        spec = MarginSpec(sums)
        left = Tilting([rng.uniform(0.02, 2.0, n) for n in dims])
        right = Tilting([rng.uniform(0.02, 2.0, n) for n in dims])
        mid = Tilting([(a + b) / 2 for a, b in zip(left.params, right.params)])
        lv, rv, mv = (log_likelihood(spec, t)[0] for t in (left, right, mid))
        worst_gap = max(worst_gap, 0.5 * (lv + rv) - mv)
    ok = worst_fd <= 1e-5 and worst_gap <= 1e-12
    detail = f"max relative FD gradient error {worst_fd:.1e} (<= 1e-5); worst midpoint deficit {worst_gap:.1e}"
    assert report(9, ok, detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
