import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eigenlocus.geometry import (LinearLocus, gram_matrix, inner_product_stats,
                                 locus_membership, scalar_projection)

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def test_gram_two_points():
    X = np.array([[1.0, 0.0], [-1.0, 0.0]])
    y = np.array([1.0, -1.0])
    np.testing.assert_array_equal(gram_matrix(X, y), [[1, 1], [1, 1]])
    np.testing.assert_array_equal(gram_matrix(X, y, 0.5), [[1.5, 1], [1, 1.5]])


def test_gram_zero_matrix():
    assert not gram_matrix(np.zeros((2, 2)), [1, -1]).any()


def test_gram_rejects_mismatch():
    with pytest.raises(ValueError):
        gram_matrix(np.ones((3, 2)), [1, -1])
    with pytest.raises(ValueError):
        gram_matrix(np.ones((2, 2)), [1, 0])


def test_gram_matches_elementwise_definition():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(7, 3))
    y = np.where(rng.random(7) < 0.5, 1.0, -1.0)
    Q = gram_matrix(X, y, 0.25)
    for i in range(7):
        for j in range(7):
            ref = y[i] * y[j] * sum(X[i, k] * X[j, k] for k in range(3)) + (0.25 if i == j else 0.0)
            assert Q[i, j] == pytest.approx(ref, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (6, 3), elements=finite), st.floats(1e-3, 10))
def test_gram_symmetric_and_pd(X, eps):
    y = np.array([1.0, -1, 1, -1, 1, -1])
    Q = gram_matrix(X, y, eps)
    assert np.max(np.abs(Q - Q.T)) <= 1e-12
    lam_min = np.linalg.eigvalsh(Q)[0]
    # rounding in eigvalsh scales with the largest eigenvalue
    assert lam_min >= eps - 1e-9 - 1e-13 * np.abs(Q).max() * 6


@pytest.mark.parametrize("u,v,dot,cos,dist", [
    ((3, 0), (0, 4), 0.0, 0.0, 5.0),
    ((1, 1), (1, 1), 2.0, 1.0, 0.0),
    ((1, 0), (-1, 0), -1.0, -1.0, 2.0),
])
def test_inner_product_stats_examples(u, v, dot, cos, dist):
    s = inner_product_stats(u, v)
    assert s.dot == pytest.approx(dot)
    assert s.cos_angle == pytest.approx(cos)
    assert s.distance == pytest.approx(dist)


def test_inner_product_zero_norm_is_flagged():
    s = inner_product_stats([0, 0], [1, 2])
    assert s.cos_angle is None and not s.cos_defined
    with pytest.raises(ValueError):
        inner_product_stats([1, 2], [1, 2, 3])


@settings(max_examples=100, deadline=None)
@given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite))
def test_law_of_cosines(u, v):
    assert inner_product_stats(u, v).law_of_cosines_residual() <= 1e-9


@pytest.mark.parametrize("x,axis,expected", [
    ((2, 2), (1, 0), 2.0),
    ((-1, 0), (1, 0), -1.0),
    ((1, 1), (1, 1), math.sqrt(2)),
])
def test_scalar_projection_examples(x, axis, expected):
    assert scalar_projection(x, axis) == pytest.approx(expected, abs=1e-15)


def test_scalar_projection_zero_axis():
    with pytest.raises(ValueError):
        scalar_projection([1, 2], [0, 0])


@settings(max_examples=100, deadline=None)
@given(arrays(float, 3, elements=finite), arrays(float, 3, elements=st.floats(0.1, 50)))
def test_scalar_projection_scaling(x, axis):
    lhs = scalar_projection(x, axis) * np.linalg.norm(axis)
    assert abs(lhs - x @ axis) <= 1e-12 * max(1.0, np.abs(x) @ np.abs(axis))


def test_locus_membership_examples():
    horizontal = LinearLocus(np.array([0.0, 1.0]), 0.0)
    assert locus_membership(horizontal, [5.0, 0.0], 1e-9)
    assert not locus_membership(horizontal, [0.0, 1.0], 1e-9)
    unit = LinearLocus.from_axis([1.0, 0.0])
    assert locus_membership(unit, [1.0, 7.0], 1e-9)


def test_from_axis_points_satisfy_eigenaxis_equation():
    v = np.array([3.0, 4.0])
    loc = LinearLocus.from_axis(v)
    # v itself and any point v + t*perp satisfy x'v = |v|^2
    for t in (-2.0, 0.0, 5.0):
        x = v + t * np.array([-4.0, 3.0])
        assert x @ v == pytest.approx(v @ v)
        assert loc.contains(x)


def test_locus_rejects_zero_axis_and_compares_loci():
    with pytest.raises(ValueError):
        LinearLocus(np.zeros(2), 1.0)
    a = LinearLocus(np.array([0.0, 1.0]), 2.0)
    assert a.same_locus(LinearLocus(np.array([0.0, 5.0]), 2.0))
    assert a.same_locus(LinearLocus(np.array([0.0, -1.0]), -2.0))
    assert not a.same_locus(LinearLocus(np.array([1.0, 0.0]), 2.0))
    assert a.signed_distance([3.0, 5.0]) == pytest.approx(3.0)
