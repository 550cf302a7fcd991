import math

import pytest
from numpy.testing import assert_allclose

from tablephase.errors import InvalidInput
from tablephase.phase import (RunManifest, bc_2way, bezel_margins, fiber_experiment,
                              read_scan_csv, rows_to_csv, rows_to_json, scan_2way, scan_3way,
                              scan_point, theorem_limits_3way)
from tablephase.tables import MarginSpec
from tablephase.tilt import BC_3WAY, Regime


def test_limits_at_symmetric_point():
    lim = theorem_limits_3way(1.0)
    # ratio = 2^(1/3), cubed = 2
    assert lim.z111 == pytest.approx(1.0, rel=1e-14)
    assert lim.regime is Regime.SUBCRITICAL and not lim.z111_is_slope


def test_subcritical_limits():
    lim = theorem_limits_3way(1.2)
    assert_allclose([lim.z111, lim.z121, lim.z221, lim.z222], [1.850, 1.469, 1.200, 1.0], atol=5e-4)
    # closed forms simplify: (1/1.2 + 1)/(1/Bc + 1) = (11/6) / 2^(2/3)
    ratio = (11 / 6) / 2 ** (2 / 3)
    assert lim.z111 == pytest.approx(1 / (ratio ** 3 - 1), rel=1e-14)
    assert lim.z221 == pytest.approx(1.2, rel=1e-12)


def test_supercritical_limits():
    lim = theorem_limits_3way(2.5)
    assert lim.z111_is_slope
    assert lim.z111 == pytest.approx(0.79759, abs=5e-6)
    assert lim.z121 == pytest.approx(3.84732, abs=5e-6)
    assert lim.z221 == pytest.approx(1.70241, abs=5e-6)


def test_limits_near_critical_and_domain():
    assert theorem_limits_3way(BC_3WAY + 0.02).regime is Regime.NEAR_CRITICAL
    assert math.isnan(theorem_limits_3way(BC_3WAY).z111)
    with pytest.raises(InvalidInput):
        theorem_limits_3way(0.0)


def test_limit_columns_do_not_depend_on_n():
    rows = scan_3way([0.8, 1.2, 2.5], [20, 40, 80])
    for B in (0.8, 1.2, 2.5):
        lims = {(r.limitZ111, r.limitZ121, r.limitZ221, r.limitZ222) for r in rows if r.B == B}
        assert len(lims) == 1


def test_scan_rows_sorted_and_thread_independent():
    a = scan_3way([2.5, 1.2, 1.0], [60, 30], threads=1)
    b = scan_3way([1.0, 2.5, 1.2], [30, 60], threads=4)
    assert [(r.n, r.B) for r in a] == sorted((r.n, r.B) for r in a)
    assert rows_to_csv(a) == rows_to_csv(b)


def test_csv_round_trip_is_exact():
    rows = scan_3way([1.2, 2.5], [50])
    parsed = read_scan_csv(rows_to_csv(rows))
    for row, rec in zip(rows, parsed):
        assert rec["P"] == row.P and rec["Z111"] == row.Z111 and rec["regime"] == row.regime
    header = rows_to_csv(rows).splitlines()[0].split(",")
    assert header[:14] == ["n", "B", "P", "Q", "Z111", "Z121", "Z221", "Z222", "limitZ111",
                           "limitZ121", "limitZ221", "limitZ222", "regime", "residual"]
    assert '"n": 50' in rows_to_json(rows)


def test_supercritical_error_uses_scaled_corner():
    row = scan_point(400, 2.5)
    assert row.errZ111 == pytest.approx(abs(row.Z111 / 400 ** 2 - (2.5 - BC_3WAY)), rel=1e-12)


def test_scan_rejects_bad_grid():
    with pytest.raises(InvalidInput):
        scan_3way([], [10])
    with pytest.raises(InvalidInput):
        scan_3way([1.0], [1])


def test_bezel_margins_balance():
    m = bezel_margins(64, 3.0, 1.0, 0.6)
    assert m.bezel == 12 and m.heavy == 192 and m.light == 64
    assert m.rows[:12] == [192] * 12 and m.rows[12:] == [64] * 64
    assert sum(m.rows) == sum(m.cols) and m.adjustment == 0
    light = bezel_margins(64, 3.0, 1.0, 0.6, bezel_heavy=False)
    assert light.rows[0] == 64 and light.rows[-1] == 192
    with pytest.raises(InvalidInput):
        bezel_margins(64, 3.0, 1.0, 1.2)
    with pytest.raises(InvalidInput):
        bezel_margins(4, 3.0, 0.1, 0.5)


def test_2way_threshold():
    assert bc_2way(1.0) == pytest.approx(1 + math.sqrt(2), rel=1e-15)
    assert bc_2way(1.0) == pytest.approx(2.41421, abs=5e-6)


def test_scan_2way_rows():
    rows = scan_2way(1.0, [1.2, 8.0], [32, 64], 0.6)
    assert [(r.n, r.B) for r in rows] == [(32, 1.2), (32, 8.0), (64, 1.2), (64, 8.0)]
    assert all(r.converged and r.residual <= 1e-10 for r in rows)
    assert {r.regime for r in rows} == {"subcritical", "supercritical"}


def test_fiber_experiment_small():
    rep = fiber_experiment(MarginSpec([[2, 1], [2, 1]]), steps=20_000, seed=1)
    assert rep["fiber_size"] == 2 and rep["connected"]
    assert rep["tv_uniform_vs_hypergeometric"] == pytest.approx(1 / 6, abs=1e-12)
    for chain in rep["chains"].values():
        assert chain["tv_to_exact"] < 0.05
        assert sum(chain["corner_histogram"].values()) == 20_000


def test_fiber_experiment_ones():
    rep = fiber_experiment(MarginSpec([[1, 1], [1, 1]]), steps=10_000, seed=2)
    assert rep["tv_uniform_vs_hypergeometric"] == 0
    assert all(c["tv_to_exact"] < 0.05 for c in rep["chains"].values())


def test_fiber_experiment_3way_fours():
    rep = fiber_experiment(MarginSpec([[4, 4]] * 3), steps=500_000, thin=5, seed=3)
    assert rep["connected"] is True and rep["fiber_size"] == 57
    assert all(c["tv_to_exact"] < 0.05 for c in rep["chains"].values())


def test_fiber_experiment_sampling_only():
    rep = fiber_experiment(MarginSpec([[3, 3, 3]] * 3), steps=2_000, budget=100)
    assert rep["enumerable"] is False and "fiber_size" not in rep
    assert all("tv_to_exact" not in c for c in rep["chains"].values())


def test_manifest_round_trip():
    m = RunManifest.create(["barvinok-scan", "--n", "10"], {"n": [10]}, seeds=[0])
    back = RunManifest.from_json(m.to_json())
    assert back == m and back.version


def test_2way_corner_bounded_below_threshold_and_growing_above():
    # heavy bezel of floor(n^0.6) lines; growth exponents fitted over n = 32..128
    rows = scan_2way(1.0, [1.2, 8.0], [32, 64, 128], 0.6)
    sub = [r.Z_corner for r in rows if r.B == 1.2]
    sup = [r.Z_corner for r in rows if r.B == 8.0]

    def slope(z):
        return math.log(z[-1] / z[0]) / math.log(128 / 32)

    assert max(sub) < 1.5 and slope(sub) < 0.1
    assert all(a < b for a, b in zip(sup, sup[1:]))
    assert slope(sup) > 0.25 and slope(sup) > 3 * slope(sub)
    # the corner can never exceed the heavy margin, so growth is at most linear
    assert all(r.Z_corner < r.heavy_margin for r in rows)
