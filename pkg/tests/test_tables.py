import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from tablephase.errors import InvalidInput, MismatchedTotals, NegativeEntry
from tablephase.tables import (MarginSpec, RealTable, Table, all_margins, grand_total,
                               northwest_corner, plane_margins, validate_margin_spec)


def test_table_is_immutable_and_hashable():
    t = Table([[1, 2], [3, 4]])
    assert t.dims == (2, 2)
    with pytest.raises(ValueError):
        t.data[0] = 9
    assert t == Table([1, 2, 3, 4], dims=(2, 2))
    assert len({t, Table([[1, 2], [3, 4]])}) == 1


def test_table_rejects_negative_and_bad_shapes():
    with pytest.raises(NegativeEntry):
        Table([[1, -1], [0, 0]])
    with pytest.raises(InvalidInput):
        Table([1, 2, 3], dims=(2, 2))
    with pytest.raises(InvalidInput):
        Table([1, 2, 3, 4])  # 1-way tables are not supported


def test_table_json_round_trip():
    t = Table(np.arange(8).reshape(2, 2, 2))
    obj = json.loads(json.dumps(t.to_json()))
    assert obj == {"dims": [2, 2, 2], "data": list(range(8))}
    assert Table.from_json(obj) == t


def test_plane_margins_3way():
    t = Table(np.arange(8).reshape(2, 2, 2))
    assert_array_equal(plane_margins(t, 0), [6, 22])
    assert_array_equal(plane_margins(t, 1), [10, 18])
    assert_array_equal(plane_margins(t, 2), [12, 16])
    assert grand_total(t) == 28
    with pytest.raises(InvalidInput):
        plane_margins(t, 3)


def test_margin_spec_validation():
    assert validate_margin_spec(MarginSpec([[2, 1], [1, 2]])) == 3
    with pytest.raises(MismatchedTotals):
        validate_margin_spec(MarginSpec([[2, 1], [2, 2]]))
    with pytest.raises(NegativeEntry):
        validate_margin_spec(MarginSpec([[3, -1], [1, 1]]))


def test_margin_spec_json_and_matches():
    spec = MarginSpec.from_json({"axis_sums": [[2, 1], [2, 1]]})
    assert spec.dims == (2, 2) and spec.total == 3 and spec.order == 2
    assert spec.matches(Table([[1, 1], [1, 0]]))
    assert not spec.matches(Table([[0, 2], [2, 0]]))
    assert MarginSpec.from_json(spec.to_json()) == spec


def test_real_table_rejects_nonfinite():
    with pytest.raises(InvalidInput):
        RealTable([[1.0, np.inf], [0.0, 1.0]])
    assert RealTable([[0.5, 1.5], [1.0, 0.0]]).dims == (2, 2)


@st.composite
def margin_specs(draw):
    k = draw(st.sampled_from([2, 3]))
    dims = draw(st.lists(st.integers(1, 4), min_size=k, max_size=k))
    total = draw(st.integers(0, 12))
    sums = []
    for n in dims:
        cuts = sorted(draw(st.lists(st.integers(0, total), min_size=n - 1, max_size=n - 1)))
        edges = [0] + cuts + [total]
        sums.append([edges[i + 1] - edges[i] for i in range(n)])
    return MarginSpec(sums)


@given(margin_specs())
@settings(max_examples=200, deadline=None)
def test_northwest_corner_hits_every_margin(spec):
    t = northwest_corner(spec)
    for got, want in zip(all_margins(t), spec.axis_sums):
        assert_array_equal(got, want)
