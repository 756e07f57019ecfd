import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_layers, peel_layers
from stablab.errors import DuplicateError, ParameterError
from stablab.maximal_layers import (
    distance_to_upper_plane,
    layer_distance_sum,
    layer_distance_sum_marks,
    maximal_layers,
    maxlayer_radius,
)
from stablab.point_process import Window, sample_poisson, sample_slab


def test_small_examples():
    antichain = np.array([[0.0, 3.0], [1.0, 2.0], [2.0, 1.0], [0.5, 0.5]])
    assert list(maximal_layers(antichain).layer) == [1, 1, 1, 2]
    chain = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    assert list(maximal_layers(chain).layer) == [3, 2, 1]
    three = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 0.0, 0.0]])
    assert list(maximal_layers(three).layer) == [2, 1, 1]


def test_ties_count_as_domination():
    pts = np.array([[1.0, 0.0], [1.0, 1.0]])
    assert list(maximal_layers(pts).layer) == [2, 1]


def test_kmax_truncation_and_empty():
    chain = np.array([[float(i), float(i)] for i in range(5)])
    lay = maximal_layers(chain, kmax=2)
    assert list(lay.leftover) == [0, 1, 2]
    assert len(maximal_layers(np.zeros((0, 2))).layer) == 0
    with pytest.raises(ParameterError):
        maximal_layers(chain, kmax=0)


def test_duplicates_rejected():
    with pytest.raises(DuplicateError):
        maximal_layers(np.array([[1.0, 1.0], [1.0, 1.0]]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 80), st.sampled_from([2, 3]))
def test_layers_match_oracles(seed, n, d):
    pts = np.random.default_rng(seed).random((n, d))
    lay = maximal_layers(pts).layer
    assert np.array_equal(lay, brute_layers(pts))
    assert np.array_equal(lay, peel_layers(pts))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_layer_is_antichain(seed):
    pts = np.random.default_rng(seed).random((50, 2))
    lay = maximal_layers(pts)
    for j in range(1, lay.n_layers + 1):
        m = pts[lay.members(j)]
        dom = np.all(m[:, None, :] >= m[None, :, :], axis=2)
        np.fill_diagonal(dom, False)
        assert not dom.any()


def test_distance_to_plane():
    w = Window.slab(10, 2.0, math.pi / 4)
    # a point on the lower face, straight below the plane's normal foot
    d = distance_to_upper_plane(np.array([[0.0, 0.0]]), w)
    assert d[0] == pytest.approx(2.0 / math.sqrt(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.floats(0.2, 1.3))
def test_mark_identity(seed, k, theta):
    c = sample_slab(60, 1.5, theta, 1.0, seed=seed)
    assert layer_distance_sum(c, k) == pytest.approx(layer_distance_sum_marks(c, k), abs=1e-9)


def test_layer_functionals_need_slab():
    c = sample_poisson(Window.cube(16), 1.0, seed=0)
    with pytest.raises(ParameterError):
        layer_distance_sum(c, 1)
    with pytest.raises(ParameterError):
        layer_distance_sum(sample_slab(10, 1.0, 0.7, 1.0, seed=0), 0)


def test_radius_formula():
    assert maxlayer_radius(Window.slab(10, 2.0, math.pi / 4)) == pytest.approx(3.0)
