import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tulip.reduction import (distance_matrix, fast_forward_select, random_select,
                             reduction_fraction_to_target, transport_cost)

P = (0.5, 0.3, 0.2)
D = np.array([[0, 1, 4], [1, 0, 2], [4, 2, 0]], float)


def test_hand_example_single_scenario():
    red = fast_forward_select(D, P, 1)
    assert red.selected == (1,)
    assert red.new_probabilities == (1.0,)
    assert red.assignment == {0: 1, 2: 1}


def test_hand_example_two_scenarios():
    red = fast_forward_select(D, P, 2)
    assert red.selected == (1, 0)
    assert red.new_probabilities == pytest.approx((0.5, 0.5), abs=1e-15)
    assert red.assignment == {2: 1}


def test_identity_reduction():
    red = fast_forward_select(D, P, 3)
    assert sorted(red.selected) == [0, 1, 2]
    assert dict(zip(red.selected, red.new_probabilities)) == dict(enumerate(P))
    assert red.assignment == {}


def test_target_out_of_range():
    for target in (0, 4):
        with pytest.raises(ValueError):
            fast_forward_select(D, P, target)


def test_ties_go_to_lowest_index():
    d = np.ones((4, 4)) - np.eye(4)
    red = fast_forward_select(d, (0.25,) * 4, 2)
    assert red.selected == (0, 1)
    assert red.assignment == {2: 0, 3: 0}


def _instance(data):
    S = data.draw(st.integers(1, 7))
    pts = np.array(data.draw(st.lists(st.floats(0, 10), min_size=S, max_size=S)))
    w = np.array(data.draw(st.lists(st.floats(0.01, 1), min_size=S, max_size=S)))
    return np.abs(pts[:, None] - pts[None, :]), w / w.sum()


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_probabilities_sum_to_one_and_assignment_is_nearest(data):
    d, p = _instance(data)
    target = data.draw(st.integers(1, len(p)))
    red = fast_forward_select(d, p, target)
    assert len(red.selected) == len(set(red.selected)) == target
    assert abs(math.fsum(red.new_probabilities) - 1.0) <= 1e-12
    for j, i in red.assignment.items():
        best = min(d[j, k] for k in red.selected)
        assert d[j, i] == best
        assert i == min(k for k in red.selected if d[j, k] == best)
    assert fast_forward_select(d, p, target) == red


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_transport_cost_non_increasing(data):
    d, p = _instance(data)
    costs = [transport_cost(d, p, fast_forward_select(d, p, k).selected)
             for k in range(1, len(p) + 1)]
    assert all(b <= a + 1e-12 for a, b in zip(costs, costs[1:]))
    assert costs[-1] == 0.0


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_last_exclusion_follows_greedy_order(data):
    d, p = _instance(data)
    S = len(p)
    if S < 2:
        return
    red = fast_forward_select(d, p, S - 1)
    first = fast_forward_select(d, p, S - 2).selected if S > 2 else ()
    # the excluded scenario is the cheapest single exclusion among those left
    # after the first S-2 greedy picks
    left = [u for u in range(S) if u not in first]
    cost = {u: transport_cost(d, p, [*first, *[v for v in left if v != u]]) for u in left}
    excluded = next(iter(red.assignment))
    assert cost[excluded] == pytest.approx(min(cost.values()), abs=1e-12)


def test_fraction_to_target():
    assert reduction_fraction_to_target(250, 0.1) == 25
    assert reduction_fraction_to_target(5, 0.1) == 1
    assert reduction_fraction_to_target(50, 1.0) == 50
    for bad in (0.0, 1.5, -0.1):
        with pytest.raises(ValueError):
            reduction_fraction_to_target(10, bad)


def test_distance_matrix_and_random_select():
    d = distance_matrix(4, lambda i, j: abs(i - j))
    assert d[0, 3] == 3 and d[2, 2] == 0
    with pytest.raises(ValueError):
        distance_matrix(2, lambda i, j: -1.0)
    rng = np.random.default_rng(0)
    red = random_select((0.25,) * 4, 2, rng, d)
    assert len(red.selected) == 2
    assert abs(math.fsum(red.new_probabilities) - 1.0) <= 1e-12
