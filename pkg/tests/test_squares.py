import math

import numpy as np
import numpy.testing as npt
import pytest

from pegtable import (
    DegenerateConfigurationError,
    RadialFunction,
    classify_graceful,
    quad_vertices,
    random_radial,
    residual_jacobian,
    square_residual,
    z4_canonical,
)
from pegtable.squares import QuadParam, orbit_distance, residual_batch, z4_generator

CIRCLE = RadialFunction((1.0,))
SYMMETRIC = (0.5, 0.5, 0.5, 0.5)


def random_param(rng) -> QuadParam:
    t = rng.dirichlet([3.0, 3.0, 3.0, 3.0]) * 2.0
    return QuadParam(rng.uniform(0.0, 2.0 * math.pi), tuple(t))


def test_quad_param_invariants():
    with pytest.raises(ValueError):
        QuadParam(0.0, (0.5, 0.5, 0.5, 0.6))
    with pytest.raises(ValueError):
        QuadParam(0.0, (1.0, 1.0, -0.5, 0.5))


def test_quad_vertices_quarter_turns():
    V = quad_vertices(CIRCLE, QuadParam(0.0, SYMMETRIC))
    npt.assert_allclose(V, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)


def test_quad_vertices_direct_angle_sums():
    V = quad_vertices(CIRCLE, QuadParam(0.0, (0.25, 0.75, 0.25, 0.75)))
    s2 = math.sqrt(2.0) / 2.0
    npt.assert_allclose(V, [[1, 0], [s2, s2], [-1, 0], [-s2, -s2]], atol=1e-15)


def test_quad_vertices_ellipse_square(ellipse):
    V = quad_vertices(ellipse, QuadParam(math.pi / 4, SYMMETRIC))
    s = 1.0 / math.sqrt(3.0)
    npt.assert_allclose(V, [[s, s], [-s, s], [-s, -s], [s, -s]], atol=1e-9)


def test_residual_zero_on_circle_squares(rng):
    for _ in range(5):
        p = QuadParam(rng.uniform(0.0, 2 * math.pi), SYMMETRIC)
        assert np.abs(square_residual(CIRCLE, p)).max() < 1e-14


def test_residual_zero_at_ellipse_square(ellipse):
    r = square_residual(ellipse, QuadParam(math.pi / 4, SYMMETRIC))
    assert np.abs(r).max() < 1e-9


def test_residual_regression_fixture():
    # frozen from direct distance computation: unit circle, angles
    # 0, pi/4, pi, 3*pi/2
    r = square_residual(CIRCLE, QuadParam(0.0, (0.25, 0.75, 0.5, 0.5)))
    expected = [-2.0 * math.sqrt(2.0), math.sqrt(2.0), 0.0, 2.0 - math.sqrt(2.0)]
    npt.assert_allclose(r, expected, atol=1e-12)


def test_jacobian_matches_finite_differences(rng):
    eps = 1e-6
    for _ in range(50):
        h = random_radial(rng)
        u0 = random_param(rng).free_vector()
        J = residual_jacobian(h, QuadParam(u0[0], (*u0[1:], 2.0 - u0[1:].sum())))
        for k in range(4):
            d = np.zeros(4)
            d[k] = eps
            col = (residual_batch(h, (u0 + d)[None, :])[0] - residual_batch(h, (u0 - d)[None, :])[0]) / (2 * eps)
            assert np.abs(J[:, k] - col).max() < 1e-5


def test_jacobian_x_column_vanishes_on_circle():
    J = residual_jacobian(CIRCLE, QuadParam(0.3, SYMMETRIC))
    assert np.abs(J[:, 0]).max() < 1e-12


def test_jacobian_nondegenerate_at_ellipse_root(ellipse):
    J = residual_jacobian(ellipse, QuadParam(math.pi / 4, SYMMETRIC))
    assert np.linalg.svd(J, compute_uv=False)[-1] > 0.1


def test_z4_canonical_symmetric_tuple():
    p = z4_canonical(QuadParam(5.0, SYMMETRIC))
    assert p.t == SYMMETRIC
    # canonical base angle is the smallest of the four rotated angles
    assert 0.0 <= p.x < math.pi / 2.0 + 1e-12


def test_z4_canonical_lexicographic_minimum():
    p = z4_canonical(QuadParam(0.0, (0.7, 0.3, 0.6, 0.4)))
    assert p.t == (0.3, 0.6, 0.4, 0.7)
    assert abs(p.x - 0.7 * math.pi) < 1e-15


def test_z4_canonical_orbit_invariance(rng):
    for _ in range(20):
        p = random_param(rng)
        q = z4_generator(p)
        a, b = z4_canonical(p), z4_canonical(q)
        # exact equality up to float roundoff in the rotated base angles
        assert a.t == b.t or max(abs(u - v) for u, v in zip(a.t, b.t)) < 1e-12
        assert orbit_distance(a, b) < 1e-12


def test_z4_canonical_idempotent(rng):
    for _ in range(20):
        p = z4_canonical(random_param(rng))
        q = z4_canonical(p)
        assert orbit_distance(p, q) < 1e-12


def test_residual_equivariance_under_relabeling(rng):
    # relabeling shifts the side differences by one and flips the diagonal gap
    for _ in range(100):
        h = random_radial(rng)
        p = random_param(rng)
        r = square_residual(h, p)
        re = square_residual(h, z4_generator(p))
        V = quad_vertices(h, p)
        s = [float(np.sum((V[i] - V[(i + 1) % 4]) ** 2)) for i in range(4)]
        expected = [s[1] - s[2], s[2] - s[3], s[3] - s[0], -(r[3])]
        npt.assert_allclose(re, expected, rtol=1e-9, atol=1e-9)


def test_vertex_angles_strictly_increasing(rng):
    for _ in range(50):
        ang = random_param(rng).vertex_angles()
        assert (np.diff(ang) > 0.0).all()


def test_classify_graceful_concentric():
    assert classify_graceful([(1, 0), (0, 1), (-1, 0), (0, -1)])


def test_classify_graceful_far_square_is_not():
    assert not classify_graceful([(5, 5), (6, 5), (6, 6), (5, 6)])


def test_classify_graceful_ellipse_square(ellipse):
    V = quad_vertices(ellipse, QuadParam(math.pi / 4, SYMMETRIC))
    assert classify_graceful(V)


def test_classify_graceful_origin_in_edge_strip():
    # origin outside the square but not in a corner region: still graceful
    assert classify_graceful([(-0.5, 3), (0.5, 3), (0.5, 4), (-0.5, 4)])


def test_classify_graceful_rejects_collinear():
    with pytest.raises(DegenerateConfigurationError):
        classify_graceful([(0, 1), (0, 2), (0, 3), (0, 4)])
