"""Tables for scalar fields on the sphere.

Two independent routes find squares of fixed radius with equal field values
at the vertices: a direct damped Newton on the three-dimensional residual
(base-point chart plus frame angle), and the fiber route, which inscribes
graceful squares in the field-deformed circle of each tangent plane and
root-finds the center map over the base point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import pegs, squares, sphere
from .pegs import DegenerateFamily, SolveConfig, SolverCoverageFailure
from .radial import FitFailure, PositivityError, RadialFunction, fit_from_samples
from .sphere import ScalarField, SpherePoint, TableSolution

PI = math.pi
TWO_PI = 2.0 * math.pi
_FD_EPS = 1e-6

# Tolerances of the equal-value certificate checked on every fiber-route table.
CENTER_GATE = 1e-8
SPREAD_TOL = 1e-6
SQUARE_TOL = 1e-8


class BranchJump(RuntimeError):
    """The tracked fiber square changed discontinuously between base points."""


class CertificateFailure(RuntimeError):
    """A vanishing center failed the equal-value certificate: a solver bug."""


@dataclass(frozen=True, eq=False)
class FiberCurve:
    """Star-shaped curve cut out of one tangent plane by the field.

    The radial profile is theta -> a * f(exp(x, a * (cos theta e1 + sin theta
    e2))), fitted by a Fourier series whose residual against the exact values
    is certified below 1e-9.
    """

    x: SpherePoint
    a: float
    radial: RadialFunction
    frame: tuple
    fit_error: float


@dataclass(frozen=True)
class FiberParityPoint:
    x: np.ndarray
    count: int | None
    parity: int | None
    flag: str | None


@dataclass(frozen=True)
class FiberParityReport:
    """Per-base-point graceful-square counts over a sweep grid."""

    a: float
    entries: tuple

    @property
    def generic(self):
        return [e for e in self.entries if e.flag is None]

    @property
    def flagged_fraction(self) -> float:
        return 1.0 - len(self.generic) / len(self.entries)

    @property
    def parity_ok(self) -> bool:
        return all(e.parity == 1 for e in self.generic)


# ---------------------------------------------------------------------------
# residual


def residual_batch(f: ScalarField, X, E1, E2, a: float, PHI) -> np.ndarray:
    """Consecutive field-value differences (S, 3) over the tangent squares."""
    pts = sphere.square_points_batch(X, E1, E2, a, PHI)
    vals = f.value_many(pts)
    return vals[:, :3] - vals[:, 1:]


def table_residual(f: ScalarField, x: SpherePoint, a: float, phi: float) -> np.ndarray:
    """The 3-vector (f(p1)-f(p2), f(p2)-f(p3), f(p3)-f(p4)); zero iff a table."""
    a = sphere.check_radius(a)
    e1, e2 = sphere.frame_at(x)
    return residual_batch(
        f, x.xyz[None, :], e1.vec[None, :], e2.vec[None, :], a, np.array([phi])
    )[0]


# ---------------------------------------------------------------------------
# direct route


def _advance(X, E1, E2, PHI, dU):
    """Move each start by chart offsets (du1, du2, dphi), re-centering the chart.

    The base point moves orthographically inside the current tangent frame and
    the frame is carried along by projection, so the angle coordinate keeps a
    smooth meaning across steps.
    """
    Xn = X + dU[:, 0:1] * E1 + dU[:, 1:2] * E2
    Xn /= np.linalg.norm(Xn, axis=1, keepdims=True)
    E1n, E2n = sphere.transport_frame(E1, Xn)
    return Xn, E1n, E2n, PHI + dU[:, 2]


def _fd_jacobian(f, X, E1, E2, a, PHI):
    n = len(X)
    J = np.empty((n, 3, 3))
    for dim in range(3):
        offs = np.zeros((n, 3))
        offs[:, dim] = _FD_EPS
        Xp, E1p, E2p, Pp = _advance(X, E1, E2, PHI, offs)
        Xm, E1m, E2m, Pm = _advance(X, E1, E2, PHI, -offs)
        Rp = residual_batch(f, Xp, E1p, E2p, a, Pp)
        Rm = residual_batch(f, Xm, E1m, E2m, a, Pm)
        J[:, :, dim] = (Rp - Rm) / (2.0 * _FD_EPS)
    return J


def _seed_states(cfg: SolveConfig):
    g = cfg.grid_density
    lat = PI * (np.arange(g) + 0.5) / g
    lon = TWO_PI * np.arange(2 * g) / (2 * g)
    phis = (PI / 2.0) * (np.arange(4) + 0.5) / 4.0
    LAT, LON, PHI = np.meshgrid(lat, lon, phis, indexing="ij")
    lat, lon, phi = LAT.ravel(), LON.ravel(), PHI.ravel()
    X = np.column_stack([np.sin(lat) * np.cos(lon), np.sin(lat) * np.sin(lon), np.cos(lat)])
    return X, phi


def _point_set_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Hausdorff-style distance between two 4-point sets on the sphere."""
    D = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=2)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def _canonical_table(f: ScalarField, a: float, x: np.ndarray, e1, e2, phi: float,
                     center_norm: float | None = None) -> TableSolution:
    """Rebuild a solution on the deterministic frame at its base point."""
    xp = SpherePoint(x)
    u = math.cos(phi) * e1 + math.sin(phi) * e2
    c1, c2 = sphere.frame_at(xp)
    phi_c = math.atan2(float(u @ c2.vec), float(u @ c1.vec)) % (PI / 2.0)
    pts = sphere.table_points(xp, a, phi_c)
    return TableSolution(
        x=xp, a=a, phi=phi_c, points=pts,
        value_spread=sphere.value_spread(f, pts), center_norm=center_norm,
    )


def _dedupe_tables(cands: list[TableSolution], tol: float) -> list[TableSolution]:
    cands = sorted(cands, key=lambda s: tuple(np.sort(s.point_array(), axis=0).ravel()))
    out: list[TableSolution] = []
    for c in cands:
        if all(_point_set_distance(c.point_array(), k.point_array()) > tol for k in out):
            out.append(c)
    return out


def find_tables_direct(f: ScalarField, a: float, cfg: SolveConfig | None = None) -> list[TableSolution]:
    """Multi-start damped Newton on (base-point chart, frame angle).

    Solutions are deduplicated by their 4-point sets (which also quotients the
    phi -> phi + pi/2 relabeling) and sorted deterministically.  An empty
    result for an even field, or for any field at the great-circle radius,
    contradicts the existence guarantees and raises SolverCoverageFailure.
    """
    cfg = cfg or SolveConfig()
    a = sphere.check_radius(a)
    X, PHI = _seed_states(cfg)
    E1, E2 = sphere.frame_batch(X)

    converged = np.zeros(len(X), dtype=bool)
    alive = np.ones(len(X), dtype=bool)
    for _ in range(cfg.newton_max_iter):
        active = np.flatnonzero(alive & ~converged)
        if not len(active):
            break
        Xa, E1a, E2a, Pa = X[active], E1[active], E2[active], PHI[active]
        R = residual_batch(f, Xa, E1a, E2a, a, Pa)
        rn = np.abs(R).max(axis=1)
        done = rn <= cfg.newton_tol
        converged[active[done]] = True
        live = ~done
        idx = active[live]
        if not len(idx):
            continue
        Xa, E1a, E2a, Pa, R, rn = Xa[live], E1a[live], E2a[live], Pa[live], R[live], rn[live]
        J = _fd_jacobian(f, Xa, E1a, E2a, a, Pa)
        step = np.einsum("sij,sj->si", np.linalg.pinv(J, rcond=1e-12), R)
        norms = np.linalg.norm(step, axis=1)
        step *= np.minimum(1.0, 0.5 / np.maximum(norms, 1e-300))[:, None]

        improved = np.zeros(len(idx), dtype=bool)
        for _try in range(8):
            rows = np.flatnonzero(~improved)
            if not len(rows):
                break
            Xc, E1c, E2c, Pc = _advance(Xa[rows], E1a[rows], E2a[rows], Pa[rows], -step[rows])
            rc = np.abs(residual_batch(f, Xc, E1c, E2c, a, Pc)).max(axis=1)
            good = rc < rn[rows]
            g = rows[good]
            X[idx[g]], E1[idx[g]], E2[idx[g]], PHI[idx[g]] = Xc[good], E1c[good], E2c[good], Pc[good]
            improved[g] = True
            step[rows[~good]] *= 0.5
        alive[idx[~improved]] = False

    sols: list[TableSolution] = []
    sig_maxs: list[float] = []
    for i in np.flatnonzero(converged):
        sols.append(_canonical_table(f, a, X[i], E1[i], E2[i], float(PHI[i])))
        Ji = _fd_jacobian(f, X[i][None, :], E1[i][None, :], E2[i][None, :], a, PHI[i][None])[0]
        sig_maxs.append(float(np.linalg.svd(Ji, compute_uv=False)[0]))

    # a vanishing largest singular value means the residual is locally
    # constant: every nearby (x, phi) solves, as for a constant field.
    # (Positive-dimensional but proper families, such as the great-circle
    # tables of an even field, keep sigma_max healthy and are returned.)
    floor = cfg.genericity_floor
    flat = [s for s, sm in zip(sols, sig_maxs) if sm < floor]
    flat = _dedupe_tables(flat, cfg.dedupe_tol)
    if len(flat) >= 8:
        raise DegenerateFamily(
            "the residual vanishes on an open set (constant-like field)",
            representative=flat[0], count=len(flat),
        )
    out = _dedupe_tables(sols, cfg.dedupe_tol)
    if not out and (f.even_only or a >= PI / 2.0 - 1e-12):
        raise SolverCoverageFailure(
            "no table found although one must exist; raise grid_density"
        )
    return out


# ---------------------------------------------------------------------------
# fiber route


def positive_shift(f: ScalarField, n_samples: int = 2048) -> ScalarField:
    """Shift the field by 1 + |min sampled value| unless already positive.

    Tables are invariant under constant shifts, so solving for the shifted
    field solves the original problem.
    """
    i = np.arange(n_samples)
    z = 1.0 - 2.0 * (i + 0.5) / n_samples
    phi = i * PI * (3.0 - math.sqrt(5.0))
    r = np.sqrt(1.0 - z**2)
    P = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    mn = float(f.value_many(P).min())
    if mn > 1e-9:
        return f
    return sphere.shift_field(f, 1.0 + abs(mn))


def _fiber_samples(f, x, e1, e2, a, thetas):
    dirs = np.cos(thetas)[:, None] * e1 + np.sin(thetas)[:, None] * e2
    pts = math.cos(a) * x + math.sin(a) * dirs
    return a * f.value_many(pts)


def _fiber_radial(f, x, e1, e2, a, degree, n_samples=None):
    n = n_samples or max(64, 4 * degree + 4)
    thetas = TWO_PI * np.arange(n) / n
    vals = _fiber_samples(f, x, e1, e2, a, thetas)
    if vals.min() <= 0.0:
        raise PositivityError("field is not positive on the geodesic circle")
    return fit_from_samples(vals, degree)


def fiber_curve_at(f: ScalarField, x: SpherePoint, a: float, frame=None) -> FiberCurve:
    """Deformed-circle curve of the tangent plane at x, with certified fit.

    A harmonic field of degree L restricted to a geodesic circle is a
    trigonometric polynomial of degree at most L, so the Fourier fit is exact
    up to rounding; the certificate still measures it on a 1024-point grid.
    """
    a = sphere.check_radius(a)
    if frame is None:
        e1t, e2t = sphere.frame_at(x)
        frame = (e1t.vec, e2t.vec)
    e1, e2 = frame
    degree = max(4, f.max_degree)
    thetas = (np.arange(1024) + 0.5) * (TWO_PI / 1024)
    exact = _fiber_samples(f, x.xyz, e1, e2, a, thetas)
    while True:
        h = _fiber_radial(f, x.xyz, e1, e2, a, degree)
        err = float(np.max(np.abs(h.value(thetas) - exact)))
        if err < 1e-9:
            return FiberCurve(x=x, a=a, radial=h, frame=(e1, e2), fit_error=err)
        if degree >= 64:
            raise FitFailure(f"fiber fit residual {err:.3e} at degree cap")
        degree = min(64, 2 * degree)


def fiber_graceful_squares(f: ScalarField, x: SpherePoint, a: float,
                           cfg: SolveConfig | None = None, frame=None):
    """Graceful squares of the fiber curve, each paired with its center value.

    The center value is the mean of the four planar vertices, expressed in
    the frame coordinates of the tangent plane; a vanishing center certifies
    a table at this base point.
    """
    cfg = cfg or SolveConfig()
    fc = fiber_curve_at(f, x, a, frame=frame)
    sols = pegs.find_graceful_squares(fc.radial, cfg)
    return [(s, s.vertices.mean(axis=0)) for s in sols]


def check_table_certificate(f: ScalarField, x: np.ndarray, e1, e2, a: float,
                            u: np.ndarray, center_norm: float) -> None:
    """Equal-value certificate: vanishing center forces a genuine table.

    Whenever the center residual is below the gate, the four field values
    must agree to SPREAD_TOL and the four tangent directions must form a
    square to SQUARE_TOL.  Violations are solver bugs, not data.
    """
    if center_norm > CENTER_GATE:
        return
    ang = squares.angles_from_free(u[None, :])[0]
    dirs = np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2
    vals = f.value_many(math.cos(a) * x + math.sin(a) * dirs)
    spread = float(vals.max() - vals.min())
    sq = max(
        float(np.linalg.norm(dirs[0] + dirs[2])),
        float(np.linalg.norm(dirs[1] + dirs[3])),
        abs(float(dirs[0] @ dirs[1])),
    )
    if spread > SPREAD_TOL or sq > SQUARE_TOL:
        raise CertificateFailure(
            f"center {center_norm:.3e} but value spread {spread:.3e}, "
            f"square defect {sq:.3e}"
        )


def _resolve_square(h: RadialFunction, u: np.ndarray, cfg: SolveConfig):
    un, ok = pegs.polish_square(h, u, cfg.newton_tol)
    if not ok:
        return None
    t3 = 2.0 - un[1:].sum()
    if (un[1:] <= 1e-9).any() or t3 <= 1e-9:
        return None
    return un


def _center_of(h: RadialFunction, u: np.ndarray) -> np.ndarray:
    return squares.vertices_batch(h, u[None, :])[0].mean(axis=0)


def _track_center_zero(f: ScalarField, x0, e10, e20, a: float, u0, cfg: SolveConfig):
    """Newton on the center map over the base point, along one square branch.

    The square is re-solved from its previous parameters after every base
    move; a re-solve that fails or lands far away even at the smallest step
    raises BranchJump.  Returns None when the center does not converge.
    """
    x, e1, e2, u = x0.copy(), e10.copy(), e20.copy(), u0.copy()
    deg = max(4, f.max_degree)
    step_cap = 0.4
    accept = 100.0 * cfg.newton_tol

    def fiber(xc, e1c, e2c):
        return _fiber_radial(f, xc, e1c, e2c, a, deg)

    c = _center_of(fiber(x, e1, e2), u)
    for _ in range(40):
        if float(np.linalg.norm(c)) <= accept:
            return x, e1, e2, u, float(np.linalg.norm(c))
        J = np.empty((2, 2))
        failed = False
        for dim in range(2):
            leg = e1 if dim == 0 else e2
            cc = []
            for sgn in (1.0, -1.0):
                xp = x + sgn * _FD_EPS * leg
                xp /= np.linalg.norm(xp)
                e1p, e2p = sphere.transport_frame(e1[None, :], xp[None, :])
                up = _resolve_square(fiber(xp, e1p[0], e2p[0]), u, cfg)
                if up is None:
                    failed = True
                    break
                cc.append(_center_of(fiber(xp, e1p[0], e2p[0]), up))
            if failed:
                break
            J[:, dim] = (cc[0] - cc[1]) / (2.0 * _FD_EPS)
        if failed:
            break
        try:
            delta = np.linalg.solve(J, c)
        except np.linalg.LinAlgError:
            delta, *_ = np.linalg.lstsq(J, c, rcond=None)
        nd = float(np.linalg.norm(delta))
        if nd > step_cap:
            delta = delta * (step_cap / nd)

        # damped step: back-track until the center residual actually drops,
        # falling back to the shortest step that still tracks the square
        moved = False
        fallback = None
        cn_now = float(np.linalg.norm(c))
        for _half in range(4):
            xn = x - delta[0] * e1 - delta[1] * e2
            xn /= np.linalg.norm(xn)
            e1n, e2n = sphere.transport_frame(e1[None, :], xn[None, :])
            un = _resolve_square(fiber(xn, e1n[0], e2n[0]), u, cfg)
            if un is not None and np.abs(un - u).max() < max(1.0, 40.0 * float(np.linalg.norm(delta))):
                cn = _center_of(fiber(xn, e1n[0], e2n[0]), un)
                fallback = (xn, e1n[0], e2n[0], un, cn)
                if float(np.linalg.norm(cn)) < 0.9 * cn_now:
                    break
            delta = delta * 0.5
        if fallback is not None:
            x, e1, e2, u, c = fallback
            moved = True
        if not moved:
            raise BranchJump(
                f"tracked square lost near base ({x[0]:.4f}, {x[1]:.4f}, {x[2]:.4f})"
            )
    return None


def find_tables_via_center(f: ScalarField, a: float, cfg: SolveConfig | None = None,
                           events: list | None = None) -> list[TableSolution]:
    """Fiber route: sweep base points, track graceful squares, zero the center.

    Every accepted solution passes the equal-value certificate; results agree
    with the direct route as 4-point sets up to the dedupe tolerance.
    """
    cfg = cfg or SolveConfig()
    a = sphere.check_radius(a)
    fp = positive_shift(f)

    # every center zero is reachable from many sweep seeds, so the sweep can
    # be coarser than the per-fiber peg search without losing tables
    n_lat = max(4, 3 * cfg.grid_density // 4)
    lats = PI * (np.arange(n_lat) + 0.5) / n_lat
    lons = TWO_PI * np.arange(2 * n_lat) / (2 * n_lat)
    found: list[TableSolution] = []
    degenerate_hits = 0
    light = SolveConfig(
        grid_density=min(cfg.grid_density, 5),
        newton_tol=cfg.newton_tol,
        newton_max_iter=cfg.newton_max_iter,
        dedupe_tol=cfg.dedupe_tol,
        genericity_floor=cfg.genericity_floor,
    )

    for i, lat in enumerate(lats):
        row = lons if i % 2 == 0 else lons[::-1]  # serpentine sweep
        for lon in row:
            x = np.array([
                math.sin(lat) * math.cos(lon),
                math.sin(lat) * math.sin(lon),
                math.cos(lat),
            ])
            e1, e2 = sphere.frame_batch(x)
            try:
                pairs = fiber_graceful_squares(fp, SpherePoint(x), a, light, frame=(e1, e2))
            except DegenerateFamily as exc:
                degenerate_hits += 1
                if degenerate_hits == 1:
                    if events is not None:
                        events.append({"type": "DegenerateFamily", "detail": str(exc)})
                    rep = exc.representative
                    u = rep.param.free_vector()
                    cn = float(np.linalg.norm(rep.vertices.mean(axis=0)))
                    if cn <= CENTER_GATE:
                        check_table_certificate(fp, x, e1, e2, a, u, cn)
                        found.append(_center_table(f, x, e1, e2, a, u, cn))
                if degenerate_hits >= 3 and found:
                    return _dedupe_tables(found, cfg.dedupe_tol)
                continue
            except SolverCoverageFailure as exc:
                if events is not None:
                    events.append({"type": "SolverCoverageFailure", "detail": str(exc)})
                continue
            for sq, _center in pairs:
                try:
                    hit = _track_center_zero(fp, x, e1, e2, a, sq.param.free_vector(), cfg)
                except BranchJump as exc:
                    if events is not None:
                        events.append({"type": "BranchJump", "detail": str(exc)})
                    continue
                if hit is None:
                    continue
                xh, e1h, e2h, uh, cn = hit
                check_table_certificate(fp, xh, e1h, e2h, a, uh, cn)
                found.append(_center_table(f, xh, e1h, e2h, a, uh, cn))

    out = _dedupe_tables(found, cfg.dedupe_tol)
    if not out and f.even_only:
        raise SolverCoverageFailure(
            "fiber route found no table for an even field; refine the sweep grid"
        )
    return out


def _center_table(f: ScalarField, x, e1, e2, a: float, u, center_norm: float) -> TableSolution:
    """Build the reported table from a tracked square with vanishing center."""
    ang = squares.angles_from_free(u[None, :])[0]
    rel = np.unwrap(ang - ang[0] - (PI / 2.0) * np.arange(4) + PI) - PI
    phi_local = float(ang[0] + rel.mean())
    uv = math.cos(phi_local) * e1 + math.sin(phi_local) * e2
    xp = SpherePoint(x)
    c1, c2 = sphere.frame_at(xp)
    phi = math.atan2(float(uv @ c2.vec), float(uv @ c1.vec)) % (PI / 2.0)
    pts = sphere.table_points(xp, a, phi)
    return TableSolution(
        x=xp, a=a, phi=phi, points=pts,
        value_spread=sphere.value_spread(f, pts), center_norm=center_norm,
    )


def fiber_parity_sweep(f: ScalarField, a: float, grid: int = 12,
                       cfg: SolveConfig | None = None) -> FiberParityReport:
    """Count graceful fiber squares over a grid x 2*grid sweep of base points.

    Each generic point should report parity 1; degenerate families, coverage
    failures and near-singular roots are flagged instead of thrown.
    """
    cfg = cfg or SolveConfig(grid_density=6)
    a = sphere.check_radius(a)
    fp = positive_shift(f)
    lats = PI * (np.arange(grid) + 0.5) / grid
    lons = TWO_PI * np.arange(2 * grid) / (2 * grid)
    entries = []
    for lat in lats:
        for lon in lons:
            x = np.array([
                math.sin(lat) * math.cos(lon),
                math.sin(lat) * math.sin(lon),
                math.cos(lat),
            ])
            count = parity_val = None
            flag = None
            try:
                pairs = fiber_graceful_squares(fp, SpherePoint(x), a, cfg)
            except DegenerateFamily:
                flag = "degenerate"
            except SolverCoverageFailure:
                flag = "coverage"
            else:
                count = len(pairs)
                parity_val = count % 2
                if min(s.jacobian_sigma_min for s, _ in pairs) < cfg.genericity_floor:
                    flag = "non-generic"
            entries.append(FiberParityPoint(x=x, count=count, parity=parity_val, flag=flag))
    return FiberParityReport(a=a, entries=tuple(entries))
