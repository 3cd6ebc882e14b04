import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holdercover.cover import CoverParams
from holdercover.directions import MeshError
from holdercover.lattice import PointSample, box_dimension_estimate, build_scale_cover, corner_dust
from holdercover.visibility import (
    BlockingPair,
    PolarGraph,
    TubeSet,
    polar_graph_cover,
    spherical_project,
    tube_constant,
    tube_exceptional_points,
)

import oracles

TWO = PointSample.from_points([[Fraction(1, 10), Fraction(1, 10)], [Fraction(9, 10), Fraction(4, 5)]])
# alpha = 7/9 keeps the two points separated at every level
TWO_PARAMS = CoverParams(2, 1, 0.1, 0.9, 4, 8)


def test_spherical_project_examples():
    np.testing.assert_allclose(spherical_project([0, 0], [0, 2]), [0, -1])
    np.testing.assert_allclose(spherical_project([1, 0], [0, 0]), [1, 0])
    np.testing.assert_allclose(spherical_project([1, 0], [0, 0], sign="x-h"), [-1, 0])
    with pytest.raises(ValueError):
        spherical_project([1, 1], [1, 1])
    rng = np.random.default_rng(0)
    h, x = rng.standard_normal((100, 3)), rng.standard_normal((100, 3))
    np.testing.assert_allclose(np.linalg.norm(spherical_project(h, x), axis=1), 1.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), delta=st.floats(0.0, 1.0))
def test_tube_membership_matches_line_distance(seed, delta):
    rng = np.random.default_rng(seed)
    p, v = rng.uniform(-1, 1, 2), rng.standard_normal(2)
    tube = TubeSet(p, v, delta, S=3.0)
    x = rng.uniform(-3, 3, (50, 2))
    u = v / np.linalg.norm(v)
    dist = np.abs((x[:, 0] - p[0]) * u[1] - (x[:, 1] - p[1]) * u[0])
    expect = (dist <= delta) & (np.linalg.norm(x, axis=1) <= 3.0)
    np.testing.assert_array_equal(tube.contains(x), expect)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), S=st.sampled_from([1.0, 2.0, 4.0]), level=st.integers(2, 8))
def test_tube_constant_contains_viewpoints(seed, S, level):
    rng = np.random.default_rng(seed)
    r = 2.0 * 2.0**-level
    c, c2 = rng.random(2), rng.random(2)
    R = np.linalg.norm(c2 - c) - 2 * r
    if R < r:
        return
    tube = TubeSet(c, c2 - c, tube_constant(S, 2, r) * r / R, S)
    for _ in range(30):
        a = rng.standard_normal(2)
        b = rng.standard_normal(2)
        p = c + r * a / np.linalg.norm(a) * math.sqrt(rng.random())
        q = c2 + r * b / np.linalg.norm(b) * math.sqrt(rng.random())
        h = p + rng.uniform(-10, 10) * (q - p)
        if np.linalg.norm(h) <= S:
            assert tube.contains(h)[0]


def test_two_point_set_gives_one_tube():
    rep = tube_exceptional_points(build_scale_cover(TWO, 2, TWO_PARAMS.levels), TWO_PARAMS)
    assert all(len(rep.tubes[n]) == 1 for n in rep.levels)
    assert all(rep.flags[n].any() for n in rep.levels)
    x = TWO.as_float()
    for s in np.linspace(-2, 3, 41):
        h = x[0] + s * (x[1] - x[0])
        if np.linalg.norm(h) < rep.S:
            assert rep.is_flagged(h)
    assert rep.decay_exponent() < 0
    assert len(rep.flag_csv().splitlines()) == rep.side


def test_blocked_viewpoints_are_flagged():
    rep = tube_exceptional_points(build_scale_cover(TWO, 2, TWO_PARAMS.levels), TWO_PARAMS)
    x = TWO.as_float()
    for s in (-1.0, -0.5, 1.5, 2.0):
        h = x[0] + s * (x[1] - x[0])
        if np.linalg.norm(h) >= rep.S:
            continue
        res = polar_graph_cover(TWO, h, 0.1, 0.9)
        assert not res.ok
        assert rep.is_flagged(h)


def test_empty_families_and_coarse_mesh():
    dust = corner_dust(2, Fraction(1, 32), 3)
    p = CoverParams(2, 1, 0.45, 0.95, 4, 8)
    cover = build_scale_cover(dust, 2, p.levels)
    rep = tube_exceptional_points(cover, p)
    assert not rep.flagged().any()
    assert all(rep.content[n] == 0 for n in rep.levels)
    s = box_dimension_estimate(cover, (4, 8)).slope
    assert rep.decay_exponent() <= 2 * (s - p.t) + 0.2
    with pytest.raises(MeshError):
        tube_exceptional_points(build_scale_cover(TWO, 2, TWO_PARAMS.levels), TWO_PARAMS, mesh=1.0)
    with pytest.raises(ValueError):
        tube_exceptional_points(cover, CoverParams(3, 2, 0.1, 1.5, 4, 8))


def test_tube_content_scales_with_delta():
    w = 0.95
    vals = [TubeSet([0.0, 0.0], [1.0, 1.0], 2.0**-j, 2.0).content(w) for j in range(4, 9)]
    for a, b in zip(vals, vals[1:]):
        assert a / b == pytest.approx(2**w, rel=0.2)


def test_polar_examples():
    res = polar_graph_cover([[1, 0], [0, 1]], [0, 0], 0.45, 0.95)
    assert isinstance(res, PolarGraph) and res.ok
    np.testing.assert_allclose(res.radii, [1, 1])
    np.testing.assert_allclose(res.directions, [[-1, 0], [0, -1]])
    res = polar_graph_cover([[1, 0], [2, 0]], [0, 0], 0.45, 0.95)
    assert isinstance(res, BlockingPair) and not res.ok
    assert res.pair == (0, 1)
    np.testing.assert_allclose(res.direction, [-1, 0])
    with pytest.raises(ValueError):
        polar_graph_cover([[1, 0], [2, 0]], [1, 0], 0.45, 0.95)


def _viewpoints(points, rng, count):
    out, seen = [], set(points)
    while len(out) < count:
        if len(out) % 2:
            out.append((Fraction(int(rng.integers(-16, 17)), 8), Fraction(int(rng.integers(-16, 17)), 8)))
        else:
            a, b = rng.choice(len(points), 2, replace=False)
            s = Fraction(int(rng.choice([-3, -2, -1, 2, 3])), int(rng.integers(1, 3)))
            out.append(tuple(points[a][k] + s * (points[b][k] - points[a][k]) for k in range(2)))
        if out[-1] in seen:
            out.pop()
    return out


def test_polar_cover_matches_collinearity_oracle():
    dust = corner_dust(2, Fraction(1, 32), 3)
    pts = dust.as_fractions()
    rng = np.random.default_rng(2024)
    hs = _viewpoints(pts, rng, 50)
    assert len(hs) == 50
    for h in hs:
        res = polar_graph_cover(dust, [float(c) for c in h], 0.45, 0.95)
        blocked = any(oracles.same_ray(h, pts[i], pts[j])
                      for i in range(len(pts)) for j in range(i + 1, len(pts)))
        assert res.ok == (not blocked)
        if res.ok:
            assert res.constant >= 0
        else:
            assert oracles.same_ray(h, *(pts[k] for k in res.pair))
