import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from stablab.errors import DomainError, DuplicateError, ParameterError
from stablab.point_process import (
    MarkedConfiguration,
    MarkedPoint,
    MarkSampler,
    Window,
    empty_configuration,
    insert_point,
    inverse_shear,
    remove_point,
    sample_poisson,
    sample_slab,
    shear_transform,
)
from stablab.rng import check_seed, split, stream


def test_streams_are_keyed_not_sequenced():
    a = stream(7, 3, 1).random(5)
    stream(7, 0, 0).random(100)  # unrelated draws in between
    b = stream(7, 3, 1).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, stream(7, 1, 3).random(5))


def test_split_composes():
    child = split(split(11, 2), 5)
    assert np.array_equal(stream(child).random(3), stream(11, 2, 5).random(3))


@pytest.mark.parametrize("bad", [-1, 2**64])
def test_seed_range(bad):
    with pytest.raises(ParameterError):
        check_seed(bad)


def test_window_geometry():
    w = Window.cube(64)
    assert w.side == pytest.approx(8.0)
    assert w.volume == 64
    assert w.diameter == pytest.approx(8 * math.sqrt(2))
    assert w.contains([4.0, -4.0]) and not w.contains([4.1, 0.0])
    w3 = Window.cube(27, d=3)
    assert w3.side == pytest.approx(3.0)
    assert len(w3.vertices()) == 8


@pytest.mark.parametrize("alpha", [0, -1, math.inf])
def test_window_rejects_bad_alpha(alpha):
    with pytest.raises(ParameterError):
        Window.cube(alpha)


@pytest.mark.parametrize("theta", [0.0, math.pi / 2, 2.0])
def test_slab_rejects_bad_angle(theta):
    with pytest.raises(ParameterError):
        Window.slab(10, 1.0, theta)


def test_empty_window_sample_and_tiny_window():
    assert len(empty_configuration(Window.cube(1))) == 0
    c = sample_poisson(Window.cube(1e-9), 1.0, seed=1)
    assert len(c) == 0


def test_sample_is_deterministic_and_sorted():
    w = Window.cube(100)
    a, b = sample_poisson(w, 2.0, seed=5), sample_poisson(w, 2.0, seed=5)
    assert np.array_equal(a.positions, b.positions)
    order = np.lexsort(a.positions.T[::-1])
    assert np.array_equal(order, np.arange(len(a)))
    assert np.all(w.contains(a.positions))


def test_positions_are_read_only():
    c = sample_poisson(Window.cube(16), 1.0, seed=2)
    with pytest.raises(ValueError):
        c.positions[0, 0] = 1.0


def test_poisson_counts_and_uniformity():
    w = Window.cube(50)
    counts = np.array([len(sample_poisson(w, 1.0, seed=s)) for s in range(400)])
    # mean and variance of a Poisson(50) count
    assert abs(counts.mean() - 50) < 3 * math.sqrt(50 / 400)
    assert abs(counts.var(ddof=1) - 50) < 3 * 50 * math.sqrt(2 / 399) + 5
    xs = np.concatenate([sample_poisson(w, 1.0, seed=s).positions[:, 0] for s in range(40)])
    h = w.side / 2
    assert stats.kstest((xs + h) / (2 * h), "uniform").pvalue > 1e-3


def test_poisson_count_chi_square():
    w = Window.cube(64)
    counts = np.array([len(sample_poisson(w, 2.0, seed=s)) for s in range(10_000)])
    assert abs(counts.mean() - 128) < 3 * math.sqrt(128 / 10_000)
    # pool the tails so every cell expects at least 5 counts
    edges = np.arange(97, 161)
    obs = np.r_[(counts < 97).sum(), np.bincount(counts, minlength=161)[97:161], (counts >= 161).sum()]
    pmf = stats.poisson.pmf(edges, 128)
    exp = 10_000 * np.r_[stats.poisson.cdf(96, 128), pmf, stats.poisson.sf(160, 128)]
    assert exp.min() >= 5
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_marks_independent_streams():
    w = Window.cube(200)
    plain = sample_poisson(w, 1.0, seed=9)
    marked = sample_poisson(w, 1.0, MarkSampler("pair", (0.3, 0.7)), seed=9)
    # marks come from their own stream, so positions are unchanged
    assert np.array_equal(plain.positions, marked.positions)
    assert marked.mark_kind == "pair"
    assert set(np.unique(marked.species)) <= {0, 1}


def test_mark_sampler_validation():
    with pytest.raises(ParameterError):
        MarkSampler("categorical", (0.5, 0.6))
    with pytest.raises(ParameterError):
        MarkSampler("real", noise=("cauchy", (0, 1)))
    with pytest.raises(ParameterError):
        MarkSampler("colour")


def test_slab_sample_inside_and_volume():
    theta = math.pi / 3
    c = sample_slab(40, 2.0, theta, 1.5, seed=4)
    assert c.window.volume == pytest.approx(80)
    assert np.all(c.window.contains(c.positions))
    m = shear_transform(c.positions, (theta,))[:, -1]
    assert m.min() >= 0 and m.max() <= 2.0


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=6), st.floats(0.05, 1.5))
def test_shear_round_trip(coords, theta):
    d = len(coords)
    x = np.array(coords).reshape(1, d)
    angles = [theta] * (d - 1)
    back = inverse_shear(shear_transform(x, angles), angles)
    assert np.allclose(back, x, atol=1e-9)


def test_insert_and_remove():
    w = Window.cube(16)
    c = sample_poisson(w, 1.0, seed=3)
    c2 = insert_point(c, MarkedPoint((0.123, -0.456)))
    assert len(c2) == len(c) + 1 and c2.index_of((0.123, -0.456)) is not None
    assert len(c) == len(sample_poisson(w, 1.0, seed=3))  # original untouched
    with pytest.raises(DuplicateError):
        insert_point(c2, MarkedPoint((0.123, -0.456)))
    with pytest.raises(DomainError):
        insert_point(c, MarkedPoint((10.0, 0.0)))
    c3 = remove_point(c2, (0.123, -0.456))
    assert c3.same_points(c)


def test_configuration_validation():
    w = Window.cube(4)
    with pytest.raises(DomainError):
        MarkedConfiguration(np.array([[5.0, 0.0]]), w, 1.0).validate()
