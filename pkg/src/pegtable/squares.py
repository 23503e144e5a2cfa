"""Inscribed quadrilaterals of a star-shaped curve and the square residual.

A quadrilateral inscribed in the curve of a radial function h is charted by a
base angle x and four positive angular increments t (in units of pi) summing
to 2, so the vertices wind once around the curve in increasing angular order.
The residual measures equality of the four squared sides and of the two
squared diagonals; its zero set is exactly the graceful inscribed squares.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .radial import RadialFunction, reduce_angle

PI = math.pi

# Chain-rule matrix from vertex angles to the free unknowns (x, t0, t1, t2):
# row j holds d(theta_j)/d(x, t0, t1, t2) with t3 eliminated by sum(t) = 2.
_CHAIN = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [1.0, PI, 0.0, 0.0],
        [1.0, PI, PI, 0.0],
        [1.0, PI, PI, PI],
    ]
)


class DegenerateConfigurationError(ValueError):
    """Four points too close to collinear for a circumcenter estimate."""


@dataclass(frozen=True, eq=False)
class QuadParam:
    """Chart point (x, t) of an inscribed quadrilateral.

    Vertex i sits at angle x + pi*(t_0 + ... + t_{i-1}).  All increments are
    positive and sum to 2, hence the increments close up the full circle.
    """

    x: float
    t: tuple

    def __post_init__(self):
        t = tuple(float(v) for v in self.t)
        if len(t) != 4:
            raise ValueError("t must have four components")
        if min(t) <= 0.0:
            raise ValueError(f"increments must be positive, got {t}")
        if abs(sum(t) - 2.0) > 1e-9:
            raise ValueError(f"increments must sum to 2, got {sum(t)!r}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "t", t)

    def vertex_angles(self) -> np.ndarray:
        return self.x + PI * np.concatenate(([0.0], np.cumsum(self.t[:3])))

    def free_vector(self) -> np.ndarray:
        """The unknowns (x, t0, t1, t2) as fed to Newton; t3 is implicit."""
        return np.array([self.x, *self.t[:3]])


def param_from_free(u) -> QuadParam:
    """Rebuild a QuadParam from free unknowns, restoring t3 = 2 - t0 - t1 - t2."""
    x, t0, t1, t2 = (float(v) for v in u)
    return QuadParam(reduce_angle(x), (t0, t1, t2, 2.0 - t0 - t1 - t2))


@dataclass(frozen=True, eq=False)
class SquareSolution:
    """A graceful square: four planar vertices plus genericity data.

    ``jacobian_sigma_min`` is the smallest singular value of the residual
    Jacobian at the root; a healthy value witnesses an isolated square.
    """

    vertices: np.ndarray
    param: QuadParam
    side: float
    jacobian_sigma_min: float


# ---------------------------------------------------------------------------
# batched residual machinery (rows of U are free vectors (x, t0, t1, t2))


def angles_from_free(U: np.ndarray) -> np.ndarray:
    """Vertex angles (S, 4) for a batch of free vectors (S, 4)."""
    x = U[:, :1]
    return np.concatenate([x, x + PI * np.cumsum(U[:, 1:], axis=1)], axis=1)


def vertices_batch(h: RadialFunction, U: np.ndarray) -> np.ndarray:
    """Vertex coordinates (S, 4, 2) for a batch of free vectors."""
    ang = angles_from_free(U)
    r = h.value(ang)
    red = reduce_angle(ang)
    return np.stack([r * np.cos(red), r * np.sin(red)], axis=-1)


def residual_batch(h: RadialFunction, U: np.ndarray) -> np.ndarray:
    """Square residual (S, 4): side-difference triples plus diagonal gap.

    Components are (s0-s1, s1-s2, s2-s3, d0-d1) in squared lengths; squared
    lengths share the zero set of true lengths and stay smooth everywhere.
    """
    V = vertices_batch(h, U)
    D = V - np.roll(V, -1, axis=1)
    s = np.einsum("sjc,sjc->sj", D, D)
    G0 = V[:, 0] - V[:, 2]
    G1 = V[:, 1] - V[:, 3]
    d0 = np.einsum("sc,sc->s", G0, G0)
    d1 = np.einsum("sc,sc->s", G1, G1)
    return np.stack([s[:, 0] - s[:, 1], s[:, 1] - s[:, 2], s[:, 2] - s[:, 3], d0 - d1], axis=-1)


def jacobian_batch(h: RadialFunction, U: np.ndarray) -> np.ndarray:
    """Analytic Jacobian (S, 4, 4) of residual_batch w.r.t. (x, t0, t1, t2)."""
    ang = angles_from_free(U)
    red = reduce_angle(ang)
    r = h.value(ang)
    rp = h.derivative(ang)
    c, s = np.cos(red), np.sin(red)
    V = np.stack([r * c, r * s], axis=-1)
    Vp = np.stack([rp * c - r * s, rp * s + r * c], axis=-1)

    D = V - np.roll(V, -1, axis=1)
    own = 2.0 * np.einsum("sjc,sjc->sj", D, Vp)
    nxt = -2.0 * np.einsum("sjc,sjc->sj", D, np.roll(Vp, -1, axis=1))
    n = len(U)
    dside = np.zeros((n, 4, 4))
    for j in range(4):
        dside[:, j, j] = own[:, j]
        dside[:, j, (j + 1) % 4] = nxt[:, j]

    G0 = V[:, 0] - V[:, 2]
    G1 = V[:, 1] - V[:, 3]
    ddiag = np.zeros((n, 2, 4))
    ddiag[:, 0, 0] = 2.0 * np.einsum("sc,sc->s", G0, Vp[:, 0])
    ddiag[:, 0, 2] = -2.0 * np.einsum("sc,sc->s", G0, Vp[:, 2])
    ddiag[:, 1, 1] = 2.0 * np.einsum("sc,sc->s", G1, Vp[:, 1])
    ddiag[:, 1, 3] = -2.0 * np.einsum("sc,sc->s", G1, Vp[:, 3])

    dr = np.empty((n, 4, 4))
    dr[:, 0] = dside[:, 0] - dside[:, 1]
    dr[:, 1] = dside[:, 1] - dside[:, 2]
    dr[:, 2] = dside[:, 2] - dside[:, 3]
    dr[:, 3] = ddiag[:, 0] - ddiag[:, 1]
    return dr @ _CHAIN


# ---------------------------------------------------------------------------
# single-point operations


def quad_vertices(h: RadialFunction, p: QuadParam) -> np.ndarray:
    """The four curve points of the quadrilateral, in parameter order."""
    return vertices_batch(h, p.free_vector()[None, :])[0]


def square_residual(h: RadialFunction, p: QuadParam) -> np.ndarray:
    return residual_batch(h, p.free_vector()[None, :])[0]


def residual_jacobian(h: RadialFunction, p: QuadParam) -> np.ndarray:
    return jacobian_batch(h, p.free_vector()[None, :])[0]


def z4_generator(p: QuadParam) -> QuadParam:
    """The cyclic relabeling [x, (t0,t1,t2,t3)] -> [x + pi*t0, (t1,t2,t3,t0)]."""
    return QuadParam(reduce_angle(p.x + PI * p.t[0]), p.t[1:] + p.t[:1])


def z4_canonical(p: QuadParam) -> QuadParam:
    """Orbit representative with lexicographically smallest (t, reduced x)."""
    best = None
    x, t = float(p.x), p.t
    for _ in range(4):
        key = (t, float(reduce_angle(x)))
        if best is None or key < best:
            best = key
        x = x + PI * t[0]
        t = t[1:] + t[:1]
    return QuadParam(best[1], best[0])


def orbit_distance(p: QuadParam, q: QuadParam) -> float:
    """Distance between cyclic orbits: min over relabelings of q.

    More robust than comparing canonical forms, which can disagree between
    two copies of the same root when near-tied increments flip the
    lexicographic minimum.
    """
    best = math.inf
    x, t = float(q.x), q.t
    for _ in range(4):
        dx = abs(reduce_angle(p.x) - reduce_angle(x))
        dx = min(dx, 2.0 * PI - dx)
        dt = max(abs(a - b) for a, b in zip(p.t, t))
        best = min(best, max(dx, dt))
        x = x + PI * t[0]
        t = t[1:] + t[:1]
    return best


def classify_graceful(vertices) -> bool:
    """True iff the angular order about the origin matches the square's own.

    The cyclic order of the four points by angle about the origin is compared
    with their cyclic order about the circumscribed circle's center (taken
    from the best-conditioned triple).  Provided for validating squares
    produced outside the (x, t) chart, where gracefulness is automatic.
    """
    P = np.asarray(vertices, dtype=float).reshape(4, 2)
    scale = max(np.linalg.norm(P[i] - P[j]) for i in range(4) for j in range(i + 1, 4))
    if scale <= 0.0:
        raise DegenerateConfigurationError("coincident vertices")

    best_cross, best_triple = 0.0, None
    for triple in itertools.combinations(range(4), 3):
        A, B, C = P[list(triple)]
        cross = abs((B[0] - A[0]) * (C[1] - A[1]) - (B[1] - A[1]) * (C[0] - A[0]))
        if cross > best_cross:
            best_cross, best_triple = cross, (A, B, C)
    if best_cross < 1e-12 * scale**2:
        raise DegenerateConfigurationError("all vertex triples are nearly collinear")

    A, B, C = best_triple
    M = 2.0 * np.array([B - A, C - A])
    rhs = np.array([B @ B - A @ A, C @ C - A @ A])
    center = np.linalg.solve(M, rhs)

    order_origin = np.argsort(np.arctan2(P[:, 1], P[:, 0]), kind="stable")
    rel = P - center
    order_center = np.argsort(np.arctan2(rel[:, 1], rel[:, 0]), kind="stable")
    return any(np.array_equal(np.roll(order_origin, r), order_center) for r in range(4))
