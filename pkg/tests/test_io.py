import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from stablab.io import fmt, read_configuration, read_rows, write_configuration, write_layers, write_rows
from stablab.maximal_layers import maximal_layers
from stablab.point_process import MarkSampler, Window, sample_poisson


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


def test_fmt_special_values():
    assert fmt(float("nan")) == "nan"
    assert fmt(math.inf) == "inf" and fmt(-math.inf) == "-inf"
    assert fmt(np.int64(7)) == "7" and fmt(True) == "1"
    assert fmt(0.1) == "0.10000000000000001"


def test_rows_round_trip(tmp_path):
    p = tmp_path / "t.csv"
    write_rows(p, ["a", "b"], [[1, 0.5], ["x", 2.25]])
    header, rows = read_rows(p)
    assert header == ["a", "b"] and rows == [["1", "0.5"], ["x", "2.25"]]


def test_configuration_round_trip(tmp_path):
    marks = MarkSampler("pair", (0.3, 0.7), ("normal", (0.0, 0.25)))
    c = sample_poisson(Window.cube(50), 1.0, marks, seed=11)
    p = tmp_path / "c.csv"
    write_configuration(p, c)
    pos, species, noise = read_configuration(p)
    assert np.array_equal(pos, c.positions)
    assert np.array_equal(species, c.species)
    assert np.array_equal(noise, c.noise)


def test_unmarked_configuration_round_trip(tmp_path):
    c = sample_poisson(Window.cube(30), 1.0, seed=12)
    p = tmp_path / "c.csv"
    write_configuration(p, c)
    pos, species, noise = read_configuration(p)
    assert np.array_equal(pos, c.positions) and species is None and noise is None


def test_layers_file(tmp_path):
    pts = np.random.default_rng(0).random((20, 2))
    p = tmp_path / "l.csv"
    write_layers(p, pts, maximal_layers(pts))
    header, rows = read_rows(p)
    assert header == ["x1", "x2", "layer"]
    assert [int(r[2]) for r in rows] == list(maximal_layers(pts).layer)
