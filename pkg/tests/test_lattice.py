import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holdercover.lattice import (
    LatticeCube,
    PointSample,
    PrecisionError,
    ScaleCover,
    box_dimension_estimate,
    build_scale_cover,
    cantor1d,
    corner_dust,
    cover_at_scale,
    dense_direction_countable,
    generate_standard_set,
    grid,
)

from oracles import box_counts


def test_cube_geometry():
    q = LatticeCube(2, 3, (5, 2))
    assert q.side == 0.125
    np.testing.assert_allclose(q.center, [0.6875, 0.3125])
    assert q.circumradius == pytest.approx(math.sqrt(2) / 16)
    assert q.parent() == LatticeCube(2, 2, (2, 1))
    assert q.ancestor(0) == LatticeCube(2, 0, (0, 0))
    assert LatticeCube(2, 1, (1, 0)).contains(q)
    assert not LatticeCube(2, 1, (0, 0)).contains(q)


def test_cube_rejects_bad_input():
    with pytest.raises(ValueError):
        LatticeCube(2, 2, (4, 0))
    with pytest.raises(PrecisionError):
        LatticeCube(2, 62, (0,))
    with pytest.raises(PrecisionError):
        LatticeCube(3, 40, (0,))


def test_right_edge_goes_to_last_cube():
    s = PointSample.from_points([[1, 1], [0, Fraction(1, 2)]])
    cubes = cover_at_scale(s, 2, 3)
    assert LatticeCube(2, 3, (7, 7)) in cubes
    assert LatticeCube(2, 3, (0, 4)) in cubes


def test_outside_unit_cube_rejected():
    s = PointSample.from_points([[Fraction(-1, 4), 0]])
    with pytest.raises(ValueError):
        cover_at_scale(s, 2, 1)


def test_sample_round_trip():
    pts = [[Fraction(1, 3), Fraction(2, 7)], [0, 1]]
    s = PointSample.from_points(pts)
    assert s.as_fractions() == [tuple(map(Fraction, p)) for p in pts]
    assert s.denominator == 21


@settings(max_examples=30, deadline=None)
@given(depth=st.integers(1, 5), n=st.integers(0, 9), base=st.sampled_from([2, 3]))
def test_cover_matches_fraction_oracle(depth, n, base):
    s = corner_dust(2, Fraction(1, 4), depth)
    assert len(cover_at_scale(s, base, n)) == box_counts(s.as_fractions(), base, n)


@settings(max_examples=25, deadline=None)
@given(depth=st.integers(1, 6), ratio=st.sampled_from([Fraction(1, 3), Fraction(1, 4), Fraction(2, 5)]))
def test_counts_monotone_and_nested(depth, ratio):
    s = cantor1d(ratio, depth)
    cover = build_scale_cover(s, 2, range(0, 10))
    counts = [cover.counts[n] for n in cover.levels]
    assert counts == sorted(counts)
    assert all(c <= min(len(s), 2**n) for n, c in zip(cover.levels, counts))
    assert cover.is_nested()


def test_cantor_slope():
    cover = build_scale_cover(cantor1d(Fraction(1, 3), 12), 3, range(4, 13))
    fit = box_dimension_estimate(cover, (4, 12))
    assert fit.slope == pytest.approx(math.log(2) / math.log(3), abs=1e-9)
    assert fit.constant == pytest.approx(1.0)


def test_grid_slope_is_dimension():
    cover = build_scale_cover(grid(2, 6), 2, range(1, 7))
    assert box_dimension_estimate(cover, (1, 6)).slope == pytest.approx(2.0)


def test_degenerate_and_short_windows():
    s = PointSample.from_points([[Fraction(1, 5)]])
    cover = build_scale_cover(s, 2, range(0, 6))
    fit = box_dimension_estimate(cover, (0, 5))
    assert fit.degenerate and fit.slope == 0.0
    with pytest.raises(ValueError):
        box_dimension_estimate(cover, (0, 1))


def test_scale_cover_serialization():
    cover = build_scale_cover(corner_dust(2, Fraction(1, 4), 3), 2, range(0, 5))
    back = ScaleCover.from_json(cover.to_json())
    assert back.counts == cover.counts
    assert cover.to_csv().splitlines()[0] == "level,count"


def test_standard_sets():
    assert len(corner_dust(2, Fraction(1, 32), 2)) == 16
    assert len(cantor1d(Fraction(1, 3), 5)) == 32
    dd = dense_direction_countable(2, 3).as_fractions()
    assert dd == [
        (0, 0),
        (Fraction(1, 2), 0),
        (Fraction(3, 20), Fraction(-1, 5)),
        (Fraction(3, 40), Fraction(1, 10)),
    ]
    for p in dense_direction_countable(3, 6).as_fractions()[1:]:
        norm2 = sum(c * c for c in p)
        assert norm2 in {Fraction(1, 4**j) for j in range(1, 7)}
    assert len(generate_standard_set("grid", 3, d=2)) == 64
    with pytest.raises(ValueError):
        generate_standard_set("sponge", 2)
