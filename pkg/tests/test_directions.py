import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holdercover.directions import (
    BoundNotApplicable,
    GrassmannNet,
    KPlane,
    ProjectivePoint,
    angle_neighborhood,
    build_net,
    content_estimate,
    direction_of_pair,
    grassmann_metric,
    line_plane_angle,
    pair_angle_bound,
    plane_distances,
    random_planes,
)


@pytest.fixture(scope="module")
def net3():
    return build_net(3, 1, 0.1, seed=3)


@pytest.fixture(scope="module")
def net2():
    return build_net(2, 1, 0.05, seed=0)


def test_projective_point_is_canonical():
    a = ProjectivePoint([-1.0, 2.0])
    b = ProjectivePoint([3.0, -6.0])
    assert a == b
    assert a.vector[0] > 0
    assert direction_of_pair([0, 0], [0, 2]) == ProjectivePoint([0, 1])
    with pytest.raises(ValueError):
        direction_of_pair([1, 1], [1, 1])


def test_kplane_validation_and_complement():
    with pytest.raises(ValueError):
        KPlane(np.array([[1.0, 1.0]]))
    V = KPlane.span([0.0, 1.0])
    np.testing.assert_allclose(V.complement_frame(), [[1.0, 0.0]])
    with pytest.raises(ValueError):
        KPlane.span([1.0, 0.0, 0.0], [2.0, 0.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), d=st.integers(2, 5), data=st.data())
def test_complement_is_orthonormal(seed, d, data):
    k = data.draw(st.integers(1, d - 1))
    V = KPlane(random_planes(d, k, 1, np.random.default_rng(seed))[0])
    C = V.complement_frame()
    np.testing.assert_allclose(C @ C.T, np.eye(d - k), atol=1e-10)
    np.testing.assert_allclose(C @ V.frame.T, 0.0, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), d=st.integers(2, 5), data=st.data())
def test_metric_axioms(seed, d, data):
    k = data.draw(st.integers(1, d - 1))
    rng = np.random.default_rng(seed)
    U, V, W = (KPlane(f) for f in random_planes(d, k, 3, rng))
    assert grassmann_metric(V, V) == pytest.approx(0.0, abs=1e-12)
    assert grassmann_metric(V, W) == pytest.approx(grassmann_metric(W, V))
    assert 0.0 <= grassmann_metric(V, W) <= 1.0 + 1e-12
    assert grassmann_metric(U, W) <= grassmann_metric(U, V) + grassmann_metric(V, W) + 1e-12
    # the batched form agrees with the operator norm
    assert plane_distances(V.frame, W.frame[None])[0] == pytest.approx(grassmann_metric(V, W), abs=1e-9)


def test_metric_of_lines_is_sine():
    for theta in np.linspace(0, math.pi / 2, 7):
        V = KPlane.span([1.0, 0.0])
        W = KPlane.span([math.cos(theta), math.sin(theta)])
        assert grassmann_metric(V, W) == pytest.approx(math.sin(theta), abs=1e-12)


def test_line_plane_angle():
    V = KPlane.span([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    assert line_plane_angle(ProjectivePoint([1.0, 1.0, 0.0]), V) == pytest.approx(0.0)
    assert line_plane_angle(ProjectivePoint([0.0, 0.0, 1.0]), V) == pytest.approx(math.pi / 2)


def test_pair_angle_bound_domain():
    assert pair_angle_bound(0.1, 0.8) == pytest.approx(0.5)
    with pytest.raises(BoundNotApplicable):
        pair_angle_bound(0.1, 0.3)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), ratio=st.floats(4.0, 100.0))
def test_pair_angle_bound_sound(seed, ratio):
    rng = np.random.default_rng(seed)
    r = 0.01
    R = ratio * r
    c = np.zeros(3)
    u = rng.standard_normal(3)
    c2 = c + R * u / np.linalg.norm(u)
    for _ in range(20):
        p = c + r * rng.uniform(-1, 1, 3) / math.sqrt(3)
        q = c2 + r * rng.uniform(-1, 1, 3) / math.sqrt(3)
        cosang = abs(np.dot(q - p, c2 - c)) / (np.linalg.norm(q - p) * R)
        assert math.acos(min(1.0, cosang)) <= pair_angle_bound(r, R) + 1e-12


def test_net_audit_on_fresh_planes(net3):
    rng = np.random.default_rng(12345)
    fresh = random_planes(3, 1, 5000, rng)
    worst = max(net3.nearest(KPlane(f))[1] for f in fresh[:500])
    assert worst <= net3.epsilon
    assert net3.audit["passed"]
    assert net3.audit["covering_radius"] <= net3.epsilon


def test_net_is_deterministic_and_serializes(net2):
    again = build_net(2, 1, 0.05, seed=0)
    np.testing.assert_array_equal(again.centers, net2.centers)
    back = GrassmannNet.from_json(net2.to_json())
    np.testing.assert_array_equal(back.centers, net2.centers)
    assert len(build_net(3, 1, 1.5)) == 1


def test_mark_is_idempotent(net2):
    net = GrassmannNet.from_json(net2.to_json())
    net.mark([1, 2])
    net.mark([2])
    assert net.hits.sum() == 2


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), delta=st.floats(0.0, 0.5))
def test_angle_neighborhood_contains_nearby_planes(net3, seed, delta):
    rng = np.random.default_rng(seed)
    ell = ProjectivePoint(rng.standard_normal(3))
    cells = angle_neighborhood(net3, ell, delta)
    # rotate ell by an angle <= delta; for k = 1 the plane is that line
    v = ell.vector
    w = rng.standard_normal(3)
    w -= (w @ v) * v
    w /= np.linalg.norm(w)
    ang = rng.uniform(0, delta)
    W = KPlane((math.cos(ang) * v + math.sin(ang) * w)[None, :])
    assert net3.nearest(W)[0] in cells


def test_content_estimate_basics(net2):
    assert content_estimate(net2, [], 0.5) == 0.0
    assert content_estimate(net2, range(len(net2)), 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        content_estimate(net2, [0], 1.5)
    one = content_estimate(net2, [0], 0.5)
    assert 0 < one <= (2 * net2.epsilon) ** 0.5 + 1e-12


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_content_estimate_monotone(net2, data):
    a = data.draw(st.sets(st.integers(0, len(net2) - 1)))
    b = a | data.draw(st.sets(st.integers(0, len(net2) - 1)))
    w = data.draw(st.floats(0.1, 1.0))
    assert content_estimate(net2, sorted(a), w) <= content_estimate(net2, sorted(b), w) + 1e-12
