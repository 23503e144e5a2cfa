"""Round-sphere geometry: points, tangent frames, the exponential map, and
scalar fields built from real spherical harmonics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import lpmv

PI = math.pi

# Default degree cap for spherical-harmonic fields.
FIELD_DEGREE_CAP = 8


class InjectivityRadiusExceeded(ValueError):
    """exp is only taken on tangent vectors shorter than pi."""


class EvennessRequired(ValueError):
    """The operation needs a field invariant under the antipodal map."""


@dataclass(frozen=True, eq=False)
class SpherePoint:
    """Unit vector in R^3; renormalized on construction."""

    xyz: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.xyz, dtype=float).reshape(3).copy()
        n = float(np.linalg.norm(v))
        if not math.isfinite(n) or n == 0.0:
            raise ValueError("point must be a nonzero finite 3-vector")
        v /= n
        v.flags.writeable = False
        object.__setattr__(self, "xyz", v)

    def antipode(self) -> "SpherePoint":
        return SpherePoint(-self.xyz)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Vector attached to a base point, orthogonal to it.

    Construction projects out any radial drift; inputs more than 1e-6 of
    their norm off the tangent plane are rejected as errors.
    """

    base: SpherePoint
    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=float).reshape(3).copy()
        x = self.base.xyz
        drift = float(v @ x)
        if abs(drift) > 1e-6 * (np.linalg.norm(v) + 1.0):
            raise ValueError(f"vector is not tangent: radial component {drift:.3e}")
        v -= drift * x
        v.flags.writeable = False
        object.__setattr__(self, "vec", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))


def exp_batch(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Closed-form exponential map on batches: cos|v| x + sin|v| v/|v|."""
    n = np.linalg.norm(V, axis=-1, keepdims=True)
    unit = np.divide(V, n, out=np.zeros_like(V), where=n > 0.0)
    return np.cos(n) * X + np.sin(n) * unit


def exp_map(x: SpherePoint, v: TangentVector) -> SpherePoint:
    """Geodesic endpoint exp(x, v); requires |v| < pi and v based at x."""
    if float(np.linalg.norm(v.base.xyz - x.xyz)) > 1e-12:
        raise ValueError("tangent vector is based at a different point")
    n = v.norm
    if n >= PI:
        raise InjectivityRadiusExceeded(f"|v| = {n:.6f} >= pi")
    if n == 0.0:
        return x
    return SpherePoint(math.cos(n) * x.xyz + math.sin(n) * (v.vec / n))


def frame_batch(X: np.ndarray):
    """Deterministic orthonormal tangent frames for unit rows of X.

    The first leg is the Gram-Schmidt projection of the coordinate axis least
    aligned with x (smallest index on ties); the second is x cross e1.  No
    global continuity is promised (none exists); only determinism.
    """
    X = np.asarray(X, dtype=float)
    one = X.ndim == 1
    X = np.atleast_2d(X)
    k = np.argmin(np.abs(X), axis=1)
    A = np.eye(3)[k]
    E1 = A - (np.einsum("sc,sc->s", A, X))[:, None] * X
    E1 /= np.linalg.norm(E1, axis=1, keepdims=True)
    E2 = np.cross(X, E1)
    if one:
        return E1[0], E2[0]
    return E1, E2


def frame_at(x: SpherePoint):
    """Orthonormal tangent pair (e1, e2) at x, as TangentVectors."""
    e1, e2 = frame_batch(x.xyz)
    return TangentVector(x, e1), TangentVector(x, e2)


def transport_frame(E1: np.ndarray, Xn: np.ndarray):
    """Re-orthonormalize a nearby frame leg against new base points.

    Used while a solver walks its base point: projecting the previous e1 and
    completing with the cross product keeps the frame (and any angle measured
    in it) varying smoothly, unlike re-deriving frames from scratch.
    """
    E1n = E1 - (np.einsum("sc,sc->s", E1, Xn))[:, None] * Xn
    E1n /= np.linalg.norm(E1n, axis=1, keepdims=True)
    return E1n, np.cross(Xn, E1n)


# ---------------------------------------------------------------------------
# scalar fields


def _real_harmonic_norm(l: int, m: int) -> float:
    """L2 normalization for the real harmonic of degree l, order |m|."""
    m = abs(m)
    return math.sqrt((2 * l + 1) / (4.0 * PI) * math.factorial(l - m) / math.factorial(l + m))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real spherical-harmonic combination sum c * Y_{l m}.

    Terms are (degree l, order m, coefficient) with -l <= m <= l; orders m > 0
    carry cos(m phi), m < 0 carry sin(|m| phi), in the orthonormal real
    convention (so Y_{1,0}, Y_{1,1}, Y_{1,-1} are 0.4886 * z, x, y).  With
    ``even_only`` every degree must be even, which is equivalent to
    f(-p) = f(p) everywhere.
    """

    terms: tuple
    even_only: bool = False
    degree_cap: int = FIELD_DEGREE_CAP

    def __post_init__(self):
        norm_terms = []
        for term in self.terms:
            l, m, c = term
            l, m, c = int(l), int(m), float(c)
            if l < 0 or l > self.degree_cap:
                raise ValueError(f"degree {l} outside [0, {self.degree_cap}]")
            if abs(m) > l:
                raise ValueError(f"order {m} invalid for degree {l}")
            if not math.isfinite(c):
                raise ValueError("coefficients must be finite")
            if self.even_only and l % 2 == 1:
                raise ValueError(f"even_only field contains odd degree {l}")
            norm_terms.append((l, m, c))
        object.__setattr__(self, "terms", tuple(norm_terms))
        ls = np.array([t[0] for t in norm_terms], dtype=int)
        ms = np.array([abs(t[1]) for t in norm_terms], dtype=int)
        sin_flags = np.array([t[1] < 0 for t in norm_terms])
        factors = np.array(
            [
                c * _real_harmonic_norm(l, m) * ((-1.0) ** abs(m) * math.sqrt(2.0) if m != 0 else 1.0)
                for l, m, c in norm_terms
            ]
        )
        object.__setattr__(self, "_l", ls)
        object.__setattr__(self, "_m", ms)
        object.__setattr__(self, "_sin", sin_flags)
        object.__setattr__(self, "_factor", factors)

    @property
    def max_degree(self) -> int:
        return int(self._l.max()) if len(self._l) else 0

    def value_many(self, P) -> np.ndarray:
        """Field values for an (..., 3) array of points (normalized first)."""
        P = np.asarray(P, dtype=float)
        shape = P.shape[:-1]
        Q = P.reshape(-1, 3)
        Q = Q / np.linalg.norm(Q, axis=1, keepdims=True)
        z = np.clip(Q[:, 2], -1.0, 1.0)
        phi = np.arctan2(Q[:, 1], Q[:, 0])
        out = np.zeros(len(Q))
        for l, m, use_sin, fac in zip(self._l, self._m, self._sin, self._factor):
            azim = np.sin(m * phi) if use_sin else np.cos(m * phi)
            out += fac * lpmv(m, l, z) * azim
        return out.reshape(shape)

    def value(self, p: SpherePoint) -> float:
        return float(self.value_many(p.xyz[None, :])[0])


def field_eval(f: ScalarField, p: SpherePoint) -> float:
    return f.value(p)


def shift_field(f: ScalarField, c: float) -> ScalarField:
    """f + c, exactly, by adjusting the constant-harmonic coefficient."""
    delta = c * 2.0 * math.sqrt(PI)
    terms = list(f.terms)
    for i, (l, m, coef) in enumerate(terms):
        if l == 0 and m == 0:
            terms[i] = (0, 0, coef + delta)
            break
    else:
        terms.insert(0, (0, 0, delta))
    return ScalarField(tuple(terms), even_only=f.even_only, degree_cap=f.degree_cap)


# ---------------------------------------------------------------------------
# tangent squares and tables


def square_points_batch(X, E1, E2, a: float, PHI) -> np.ndarray:
    """Surface points (S, 4, 3) of the tangent square at frame angle phi.

    With v = a (cos phi e1 + sin phi e2) and w its quarter-turn, the returned
    order is exp(v), exp(w), exp(-v), exp(-w): cyclic around the square.
    """
    PHI = np.asarray(PHI, dtype=float)[:, None]
    uv = np.cos(PHI) * E1 + np.sin(PHI) * E2
    uw = -np.sin(PHI) * E1 + np.cos(PHI) * E2
    ca, sa = math.cos(a), math.sin(a)
    return np.stack(
        [ca * X + sa * uv, ca * X + sa * uw, ca * X - sa * uv, ca * X - sa * uw],
        axis=1,
    )


def check_radius(a: float) -> float:
    """Validate a table radius: 0 < a <= pi/2 (the great-circle case included)."""
    a = float(a)
    if not (0.0 < a <= PI / 2.0 + 1e-15):
        raise ValueError(f"radius must lie in (0, pi/2], got {a!r}")
    return min(a, PI / 2.0)


def table_points(x: SpherePoint, a: float, phi: float):
    """The four surface points exp(x, +-v), exp(x, +-w) in cyclic order."""
    a = check_radius(a)
    e1, e2 = frame_at(x)
    pts = square_points_batch(
        x.xyz[None, :], e1.vec[None, :], e2.vec[None, :], a, np.array([phi])
    )[0]
    return tuple(SpherePoint(p) for p in pts)


@dataclass(frozen=True, eq=False)
class TableSolution:
    """A table: base point, radius, frame angle, the four surface points.

    ``value_spread`` is max |f(p_i) - f(p_j)| over the four points;
    ``center_norm`` is the residual of the fiber center map when the solution
    came from the fiber route (None for direct solves).
    """

    x: SpherePoint
    a: float
    phi: float
    points: tuple
    value_spread: float
    center_norm: float | None = None

    def point_array(self) -> np.ndarray:
        return np.stack([p.xyz for p in self.points])


def value_spread(f: ScalarField, points) -> float:
    vals = f.value_many(np.stack([p.xyz for p in points]))
    return float(vals.max() - vals.min())


def antipodal_transport(f: ScalarField, sol: TableSolution) -> TableSolution:
    """The companion table at the antipodal base point, for even fields.

    The antipodal map is an isometry, so the companion's points are exactly
    the antipodes of the original's and the value spread is preserved.
    """
    if not f.even_only:
        raise EvennessRequired("antipodal transport needs an even field")
    e1, e2 = frame_at(sol.x)
    u = math.cos(sol.phi) * e1.vec + math.sin(sol.phi) * e2.vec
    x2 = sol.x.antipode()
    f1, f2 = frame_at(x2)
    phi2 = math.atan2(float(-u @ f2.vec), float(-u @ f1.vec)) % (PI / 2.0)
    pts = table_points(x2, sol.a, phi2)
    return TableSolution(
        x=x2,
        a=sol.a,
        phi=phi2,
        points=pts,
        value_spread=value_spread(f, pts),
        center_norm=sol.center_norm,
    )
