import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sccp.metrics import bin_by_quintile, conditional_coverage_by_prediction, score


def test_full_coverage():
    rep = score([(0, 2), (1, 3)], [1, 2], [1, 2])
    assert rep.coverage == 1.0
    assert rep.avg_width == 2.0
    assert rep.cal_error == 0.0


def test_three_of_four():
    rep = score([(0, 1)] * 4, [0.5] * 4, [0.0, 1.0, 0.5, 1.5])
    assert rep.coverage == 0.75


def test_boundary_counts_as_covered():
    assert score([(0, 1)], [0], [1.0]).coverage == 1.0


def test_infinite_widths_excluded_and_counted():
    rep = score([(-math.inf, math.inf), (0, 2)], [0, 1], [5, 1])
    assert rep.coverage == 1.0
    assert rep.avg_width == 2.0
    assert rep.n_infinite == 1
    assert score([(-math.inf, math.inf)], [0], [1]).avg_width == math.inf


def test_empty_interval_never_covers():
    rep = score([(math.nan, math.nan), (0, 2)], [0, 1], [0, 1])
    assert rep.coverage == 0.5 and rep.n_empty == 1 and rep.avg_width == 1.0


def test_cal_error_sign():
    assert score([(0, 10)] * 2, [3, 5], [1, 3]).cal_error == 2.0


def test_groups():
    rep = score([(0, 1)] * 4, [0] * 4, [0.5, 2, 0.5, 0.5], group=["a", "a", "b", "b"])
    assert set(rep.by_group) == {"a", "b"}
    assert rep.by_group["a"].coverage == 0.5
    assert rep.by_group["b"].count == 2


@pytest.mark.parametrize("bad", [dict(intervals=[(0, 1)], points=[0, 1], outcomes=[0, 1]),
                                 dict(intervals=[], points=[], outcomes=[])])
def test_input_errors(bad):
    with pytest.raises(ValueError):
        score(**bad)


rows = st.integers(1, 60).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-5, 5), min_size=n, max_size=n),
    st.lists(st.floats(0, 5), min_size=n, max_size=n),
    st.lists(st.floats(-6, 6), min_size=n, max_size=n),
    st.lists(st.sampled_from("xyz"), min_size=n, max_size=n),
    st.randoms(use_true_random=False),
))


@settings(max_examples=150)
@given(rows)
def test_aggregation_properties(data):
    lo, w, y, g, rnd = data
    iv = np.column_stack([lo, np.add(lo, w)])
    rep = score(iv, y, y, group=g)
    assert rep.avg_width >= 0
    assert sum(s.count for s in rep.by_group.values()) == rep.count
    weighted = sum(s.coverage * s.count for s in rep.by_group.values()) / rep.count
    assert weighted == pytest.approx(rep.coverage, abs=1e-12)

    perm = list(range(len(y)))
    rnd.shuffle(perm)
    rep2 = score(iv[perm], np.asarray(y)[perm], np.asarray(y)[perm], group=np.asarray(g)[perm])
    assert rep2.to_json() == rep.to_json()


class TestQuintiles:
    def test_ten_values(self):
        assert bin_by_quintile(range(1, 11)).tolist() == [1, 1, 2, 2, 3, 3, 4, 4, 5, 5]

    def test_five_values(self):
        assert bin_by_quintile([5, 4, 3, 2, 1]).tolist() == [5, 4, 3, 2, 1]

    def test_constant_values_split_by_order(self):
        assert bin_by_quintile([7.0] * 10).tolist() == [1, 1, 2, 2, 3, 3, 4, 4, 5, 5]

    def test_too_few(self):
        with pytest.raises(ValueError):
            bin_by_quintile([1, 2, 3, 4])


def test_conditional_coverage_single_segment_is_marginal():
    iv = [(0, 1)] * 4
    y = [0.0, 1.0, 0.5, 1.5]
    bins = conditional_coverage_by_prediction([3] * 4, iv, y)
    assert len(bins) == 1 and bins[0].coverage == score(iv, y, y).coverage


def test_conditional_coverage_omits_unused_segments():
    bins = conditional_coverage_by_prediction([0, 2, 2], [(0, 1)] * 3, [0.5, 0.5, 3])
    assert [b.label for b in bins] == ["0", "2"]
    assert [b.coverage for b in bins] == [1.0, 0.5]


def test_serialisation(tmp_path):
    rep = score([(0, 1), (-math.inf, math.inf)], [0, 0], [0.5, 2], group=["a", "b"])
    d = json.loads(rep.to_json())
    assert d["coverage"] == 1.0 and set(d["by_group"]) == {"a", "b"}
    lines = rep.to_csv().splitlines()
    assert lines[0].startswith("scope,label,coverage")
    assert len(lines) == 4
