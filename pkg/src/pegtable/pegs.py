"""Multi-start Newton search for graceful squares, parity, and path tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import squares
from .radial import RadialFunction, ellipse_radial, reduce_angle, require_valid, validate_positive
from .squares import QuadParam, SquareSolution, orbit_distance, param_from_free, z4_canonical

TWO_PI = 2.0 * math.pi
_STEP_CAP = 0.5
_DIVERGED = 1e3


class SolverCoverageFailure(RuntimeError):
    """No root found where at least one must exist; the seed grid is too coarse."""


class DegenerateFamily(RuntimeError):
    """A continuum of roots was detected (e.g. the circle's square family)."""

    def __init__(self, message: str, representative: SquareSolution, count: int):
        super().__init__(message)
        self.representative = representative
        self.count = count


class GenericityFailure(RuntimeError):
    """Some root has a near-singular Jacobian; perturb the curve and retry."""


class PositivityLost(RuntimeError):
    """A homotopy path left the cone of positive radial functions."""


class TrackingLoss(RuntimeError):
    """The continuation corrector diverged even at the minimum step size."""


@dataclass(frozen=True)
class SolveConfig:
    """Knobs for the multi-start Newton searches.

    ``grid_density`` is the per-coordinate density of the simplex seed grid;
    the base-angle grid gets twice this many seeds.
    """

    grid_density: int = 8
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    dedupe_tol: float = 1e-5
    genericity_floor: float = 1e-8

    def __post_init__(self):
        if self.grid_density < 1 or self.newton_max_iter < 1:
            raise ValueError("grid_density and newton_max_iter must be positive")
        if min(self.newton_tol, self.dedupe_tol, self.genericity_floor) <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class ParityResult:
    count: int
    parity: int


def seed_grid(cfg: SolveConfig) -> np.ndarray:
    """Deterministic product grid of free vectors (x, t0, t1, t2).

    Increment seeds are the interior lattice points of the scaled simplex
    {t_i > 0, sum t = 2} at granularity grid_density + 3, plus the symmetric
    center (1/2, 1/2, 1/2, 1/2) for every base angle.
    """
    m = cfg.grid_density + 3
    ts = [
        (i, j, k)
        for i in range(1, m)
        for j in range(1, m - i)
        for k in range(1, m - i - j)
    ]
    t = np.array(ts, dtype=float) * (2.0 / m)
    t = np.vstack([t, [0.5, 0.5, 0.5]])
    # odd count: incommensurate with the quarter-turn symmetry, so seed rays
    # of a rotation-degenerate family never collapse onto each other
    xs = np.linspace(0.0, TWO_PI, 2 * cfg.grid_density + 1, endpoint=False)
    X = np.repeat(xs, len(t))
    T = np.tile(t, (len(xs), 1))
    return np.column_stack([X, T])


def _newton_batch(h: RadialFunction, U0: np.ndarray, cfg: SolveConfig):
    """Plain Newton on all seeds at once; pseudo-inverse steps survive folds."""
    U = U0.copy()
    converged = np.zeros(len(U), dtype=bool)
    alive = np.ones(len(U), dtype=bool)
    for _ in range(cfg.newton_max_iter):
        active = alive & ~converged
        if not active.any():
            break
        idx = np.flatnonzero(active)
        R = squares.residual_batch(h, U[idx])
        rn = np.abs(R).max(axis=1)
        done = rn <= cfg.newton_tol
        converged[idx[done]] = True
        idx = idx[~done]
        if not len(idx):
            continue
        J = squares.jacobian_batch(h, U[idx])
        step = np.einsum("sij,sj->si", np.linalg.pinv(J, rcond=1e-13), R[~done])
        norms = np.linalg.norm(step, axis=1)
        scale = np.minimum(1.0, _STEP_CAP / np.maximum(norms, 1e-300))
        U[idx] -= step * scale[:, None]
        bad = ~np.isfinite(U[idx]).all(axis=1) | (np.abs(U[idx]).max(axis=1) > _DIVERGED)
        alive[idx[bad]] = False
    return U, converged & alive


def polish_square(h: RadialFunction, u0: np.ndarray, tol: float, max_iter: int = 40):
    """Newton-polish a single free vector; returns (u, converged)."""
    U, conv = _newton_batch(
        h,
        np.asarray(u0, dtype=float)[None, :],
        SolveConfig(newton_tol=tol, newton_max_iter=max_iter),
    )
    return U[0], bool(conv[0])


def _collect_roots(h: RadialFunction, U: np.ndarray, conv: np.ndarray, cfg: SolveConfig):
    """Filter converged seeds to chart-interior roots and dedupe cyclic copies."""
    roots = U[conv]
    if not len(roots):
        return []
    t3 = 2.0 - roots[:, 1:].sum(axis=1)
    keep = (roots[:, 1:] > 1e-9).all(axis=1) & (t3 > 1e-9)
    roots = roots[keep]
    if not len(roots):
        return []
    V = squares.vertices_batch(h, roots)
    min_side = np.full(len(roots), np.inf)
    for i in range(4):
        for j in range(i + 1, 4):
            min_side = np.minimum(min_side, np.linalg.norm(V[:, i] - V[:, j], axis=1))
    roots = roots[min_side > cfg.dedupe_tol]

    params = [z4_canonical(param_from_free(u)) for u in roots]
    params.sort(key=lambda p: (p.t, p.x))
    reps: list[QuadParam] = []
    for p in params:
        if all(orbit_distance(p, q) > cfg.dedupe_tol for q in reps):
            reps.append(p)
    return reps


def _solution_from_param(h: RadialFunction, p: QuadParam) -> SquareSolution:
    verts = squares.quad_vertices(h, p)
    J = squares.residual_jacobian(h, p)
    sigma_min = float(np.linalg.svd(J, compute_uv=False)[-1])
    side = float(np.mean(np.linalg.norm(verts - np.roll(verts, -1, axis=0), axis=1)))
    return SquareSolution(vertices=verts, param=p, side=side, jacobian_sigma_min=sigma_min)


def find_graceful_squares(h: RadialFunction, cfg: SolveConfig | None = None) -> list[SquareSolution]:
    """All graceful squares found from the deterministic seed grid.

    Roots are deduplicated across the cyclic relabeling action and sorted by
    canonical form, so identical inputs give identical output lists.  An
    empty result contradicts the existence guarantee for validated curves and
    is reported as a coverage failure rather than returned.
    """
    cfg = cfg or SolveConfig()
    require_valid(h)
    U, conv = _newton_batch(h, seed_grid(cfg), cfg)
    reps = _collect_roots(h, U, conv, cfg)
    sols = [_solution_from_param(h, p) for p in reps]

    degenerate = [s for s in sols if s.jacobian_sigma_min < cfg.genericity_floor]
    if len(degenerate) >= 8:
        raise DegenerateFamily(
            f"{len(degenerate)} mutually distant near-singular roots: "
            "the curve carries a continuum of inscribed squares",
            representative=degenerate[0],
            count=len(sols),
        )
    if not sols:
        raise SolverCoverageFailure(
            "no graceful square found for a validated curve; raise grid_density"
        )
    return sols


def parity(h: RadialFunction, cfg: SolveConfig | None = None) -> ParityResult:
    """Count of graceful squares mod 2; equals 1 for generic curves."""
    cfg = cfg or SolveConfig()
    try:
        sols = find_graceful_squares(h, cfg)
    except DegenerateFamily as exc:
        raise GenericityFailure(
            "degenerate square family; perturb the curve before counting"
        ) from exc
    floor = cfg.genericity_floor
    worst = min(s.jacobian_sigma_min for s in sols)
    if worst < floor:
        raise GenericityFailure(
            f"root with sigma_min {worst:.3e} below floor {floor:.1e}; perturb the curve"
        )
    return ParityResult(count=len(sols), parity=len(sols) % 2)


# ---------------------------------------------------------------------------
# continuation from the canonical ellipse


@dataclass(frozen=True)
class FoldEvent:
    """A turning point of the tracked path: ds/d(arclength) changed sign."""

    s: float
    direction: int


@dataclass
class ContinuationTrace:
    s_values: list = field(default_factory=list)
    params: list = field(default_factory=list)
    fold_events: list = field(default_factory=list)
    endpoint: SquareSolution | None = None
    success: bool = False


def _pad(a: tuple, n: int) -> np.ndarray:
    return np.array(a + (0.0,) * (n - len(a)))


def _blend(g: RadialFunction, h: RadialFunction, s: float) -> RadialFunction:
    """The straight-line path (1-s) g + s h in coefficient space."""
    na = max(len(g.cos_coeffs), len(h.cos_coeffs))
    nb = max(len(g.sin_coeffs), len(h.sin_coeffs), 1)
    a = (1.0 - s) * _pad(g.cos_coeffs, na) + s * _pad(h.cos_coeffs, na)
    b = (1.0 - s) * _pad(g.sin_coeffs, nb) + s * _pad(h.sin_coeffs, nb)
    return RadialFunction(tuple(a), tuple(b))


def _path_delta(g: RadialFunction, h: RadialFunction) -> RadialFunction:
    na = max(len(g.cos_coeffs), len(h.cos_coeffs))
    nb = max(len(g.sin_coeffs), len(h.sin_coeffs), 1)
    return RadialFunction(
        tuple(_pad(h.cos_coeffs, na) - _pad(g.cos_coeffs, na)),
        tuple(_pad(h.sin_coeffs, nb) - _pad(g.sin_coeffs, nb)),
    )


def _residual_s_derivative(hs: RadialFunction, delta: RadialFunction, u: np.ndarray) -> np.ndarray:
    """d(residual)/ds along the path, via the vertex velocity delta(theta)."""
    ang = squares.angles_from_free(u[None, :])[0]
    red = reduce_angle(ang)
    r = hs.value(ang)
    dr = delta.value(ang)
    c, s = np.cos(red), np.sin(red)
    V = np.stack([r * c, r * s], axis=-1)
    dV = np.stack([dr * c, dr * s], axis=-1)
    D = V - np.roll(V, -1, axis=0)
    dD = dV - np.roll(dV, -1, axis=0)
    ds = 2.0 * np.einsum("jc,jc->j", D, dD)
    G0, dG0 = V[0] - V[2], dV[0] - dV[2]
    G1, dG1 = V[1] - V[3], dV[1] - dV[3]
    dd0 = 2.0 * float(G0 @ dG0)
    dd1 = 2.0 * float(G1 @ dG1)
    return np.array([ds[0] - ds[1], ds[1] - ds[2], ds[2] - ds[3], dd0 - dd1])


def _augmented_matrix(g, h, delta, y):
    hs = _blend(g, h, y[4])
    J = squares.jacobian_batch(hs, y[None, :4])[0]
    Rs = _residual_s_derivative(hs, delta, y[:4])
    return np.column_stack([J, Rs]), hs


def _tangent(g, h, delta, y, previous=None):
    A, _ = _augmented_matrix(g, h, delta, y)
    T = np.linalg.svd(A)[2][-1]
    if previous is not None and float(T @ previous) < 0.0:
        T = -T
    return T


def _correct_on_plane(g, h, delta, y, T, tol):
    """Newton for [residual; T.(y - y_pred)] = 0, the orthogonal-plane corrector."""
    y_pred = y.copy()
    for _ in range(12):
        A, hs = _augmented_matrix(g, h, delta, y)
        R = squares.residual_batch(hs, y[None, :4])[0]
        F = np.append(R, float(T @ (y - y_pred)))
        if np.abs(F).max() <= tol:
            return y, True
        M = np.vstack([A, T])
        try:
            step = np.linalg.solve(M, F)
        except np.linalg.LinAlgError:
            return y, False
        y = y - step
        if not np.isfinite(y).all():
            return y, False
    return y, False


def continue_from_ellipse(
    h_target: RadialFunction, cfg: SolveConfig | None = None, steps: int = 200
) -> ContinuationTrace:
    """Track the canonical ellipse's square along (1-s) g + s h_target.

    The path is parametrized by arclength, so simple folds are traversed
    smoothly; each fold (sign change of ds) is recorded.  The endpoint, when
    s = 1 is reached, is a graceful square of the target curve.
    """
    cfg = cfg or SolveConfig()
    require_valid(h_target)
    g = ellipse_radial()
    delta = _path_delta(g, h_target)

    u0, ok = polish_square(g, np.array([math.pi / 4.0, 0.5, 0.5, 0.5]), cfg.newton_tol)
    if not ok:
        raise TrackingLoss("could not refine the ellipse start square")

    trace = ContinuationTrace()
    y = np.append(u0, 0.0)
    T = _tangent(g, h_target, delta, y)
    if T[4] < 0.0:
        T = -T
    trace.s_values.append(0.0)
    trace.params.append(param_from_free(y[:4]))

    ell = 1.0 / steps
    ell_min, ell_max = 1e-9, max(4.0 / steps, 0.02)
    budget = 50 * steps
    for _ in range(budget):
        if y[4] >= 1.0 - 1e-12:
            break
        # endgame: once the predictor would cross s = 1, try a fixed-s solve
        if y[4] + ell * T[4] >= 1.0 and T[4] > 0.0:
            hs = _blend(g, h_target, 1.0)
            u_end, ok = polish_square(hs, y[:4], cfg.newton_tol)
            if ok and orbit_distance(param_from_free(u_end), param_from_free(y[:4])) < 0.5:
                y = np.append(u_end, 1.0)
                trace.s_values.append(1.0)
                trace.params.append(param_from_free(u_end))
                break
        y_new, ok = _correct_on_plane(g, h_target, delta, y + ell * T, T, cfg.newton_tol)
        if not ok or y_new[4] < -0.05:
            ell *= 0.5
            if ell < ell_min:
                raise TrackingLoss(f"corrector diverged near s = {y[4]:.6f}")
            continue
        T_new = _tangent(g, h_target, delta, y_new, previous=T)
        if T[4] != 0.0 and np.sign(T_new[4]) != np.sign(T[4]) and T_new[4] != 0.0:
            trace.fold_events.append(FoldEvent(s=float(y_new[4]), direction=int(np.sign(T_new[4]))))
        y, T = y_new, T_new
        trace.s_values.append(float(y[4]))
        trace.params.append(param_from_free(y[:4]))
        if not validate_positive(_blend(g, h_target, min(max(y[4], 0.0), 1.0)), 0.0).ok:
            raise PositivityLost(f"path not certified positive at s = {y[4]:.6f}")
        ell = min(ell * 1.4, ell_max)
    else:
        raise TrackingLoss(f"step budget exhausted at s = {y[4]:.6f}")

    p = z4_canonical(param_from_free(y[:4]))
    trace.endpoint = _solution_from_param(h_target, p)
    trace.success = True
    return trace
