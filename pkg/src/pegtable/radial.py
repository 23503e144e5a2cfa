"""Star-shaped planar curves defined by positive radial Fourier series."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Hard cap on the Fourier degree of any radial function.
DEGREE_CAP = 64

# Grid size used by the positivity certificate.
POSITIVITY_GRID = 4096


class PositivityError(ValueError):
    """An operation required a certified-positive radial function and got none."""


class FitFailure(RuntimeError):
    """A Fourier fit could not reach its residual target within the degree cap."""


def reduce_angle(theta):
    """Map angles into [0, 2*pi).

    Reduction happens before any trig evaluation, so whenever ``theta + 2*pi``
    is an exact floating-point sum the reduced angle (and hence every curve
    evaluation) is bit-identical to the unshifted one.
    """
    return np.mod(theta, TWO_PI)


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Truncated Fourier series h(t) = sum_k a_k cos(k t) + sum_k b_k sin(k t).

    ``cos_coeffs[k]`` multiplies cos(k*t), with index 0 the constant term;
    ``sin_coeffs[k]`` multiplies sin(k*t), so index 0 is inert and exists only
    to keep the two arrays indexed alike.  Values and derivatives are exact
    trigonometric sums, never interpolations.
    """

    cos_coeffs: tuple
    sin_coeffs: tuple = ()

    def __post_init__(self):
        a = tuple(float(c) for c in self.cos_coeffs)
        b = tuple(float(c) for c in self.sin_coeffs)
        if not a:
            raise ValueError("cos_coeffs must contain at least the constant term")
        n = max(len(a), len(b))
        if n - 1 > DEGREE_CAP:
            raise ValueError(f"Fourier degree {n - 1} exceeds cap {DEGREE_CAP}")
        if not all(math.isfinite(c) for c in a + b):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "cos_coeffs", a)
        object.__setattr__(self, "sin_coeffs", b)
        object.__setattr__(self, "_a", np.array(a + (0.0,) * (n - len(a))))
        object.__setattr__(self, "_b", np.array(b + (0.0,) * (n - len(b))))
        object.__setattr__(self, "_k", np.arange(n, dtype=float))

    @property
    def degree(self) -> int:
        return len(self._k) - 1

    def _trig_sum(self, theta, order: int):
        th = reduce_angle(np.asarray(theta, dtype=float))
        scalar = th.ndim == 0
        kt = np.multiply.outer(np.atleast_1d(th), self._k)
        c, s = np.cos(kt), np.sin(kt)
        k = self._k
        if order == 0:
            out = c @ self._a + s @ self._b
        elif order == 1:
            out = c @ (k * self._b) - s @ (k * self._a)
        elif order == 2:
            out = -(c @ (k * k * self._a)) - s @ (k * k * self._b)
        else:
            raise ValueError("only derivatives up to order 2 are implemented")
        if scalar:
            return float(out[0])
        return out.reshape(np.shape(th))

    def value(self, theta):
        return self._trig_sum(theta, 0)

    def derivative(self, theta):
        return self._trig_sum(theta, 1)

    def second_derivative(self, theta):
        return self._trig_sum(theta, 2)

    def lipschitz_bound(self) -> float:
        """Upper bound on |h'| from coefficient magnitudes: sum k(|a_k|+|b_k|)."""
        return float(np.sum(self._k * (np.abs(self._a) + np.abs(self._b))))


def evaluate(h: RadialFunction, theta):
    """Radial value h(theta); exact trig sum after angle reduction."""
    return h.value(theta)


@dataclass(frozen=True, eq=False)
class StarCurve:
    """Planar curve theta -> h(theta) * (cos theta, sin theta)."""

    radial: RadialFunction

    def point(self, theta):
        th = np.asarray(theta, dtype=float)
        r = self.radial.value(th)
        red = reduce_angle(th)
        return np.stack([r * np.cos(red), r * np.sin(red)], axis=-1)


def curve_point(curve: StarCurve, theta):
    """Point of the curve at the given angle, as an (..., 2) array."""
    return curve.point(theta)


@dataclass(frozen=True)
class PositivityReport:
    """Outcome of the grid + Lipschitz positivity certificate."""

    ok: bool
    certified_min: float
    grid_min: float
    violating_interval: tuple | None = None


def validate_positive(h: RadialFunction, margin: float = 0.0) -> PositivityReport:
    """Certify min h > margin on a 4096-point grid with a Lipschitz correction.

    The certified minimum is (grid minimum) - (half grid spacing) * L with
    L = sum k(|a_k|+|b_k|), a rigorous lower bound for the true minimum.
    When the certificate fails, the report carries the violating angle
    interval around the grid minimizer.
    """
    theta = np.linspace(0.0, TWO_PI, POSITIVITY_GRID, endpoint=False)
    vals = h.value(theta)
    spacing = TWO_PI / POSITIVITY_GRID
    certified = float(vals.min()) - 0.5 * spacing * h.lipschitz_bound()
    ok = certified > margin
    violating = None
    if not ok:
        i = int(np.argmin(vals))
        lo, hi = i, i
        low_mask = vals <= margin
        if low_mask[i]:
            while low_mask[(lo - 1) % POSITIVITY_GRID] and hi - lo < POSITIVITY_GRID - 1:
                lo -= 1
            while low_mask[(hi + 1) % POSITIVITY_GRID] and hi - lo < POSITIVITY_GRID - 1:
                hi += 1
        violating = ((lo - 1) * spacing, (hi + 1) * spacing)
    return PositivityReport(ok, certified, float(vals.min()), violating)


def require_valid(h: RadialFunction, margin: float = 1e-9) -> PositivityReport:
    """Raise PositivityError unless h is certified positive above the margin."""
    report = validate_positive(h, margin)
    if not report.ok:
        raise PositivityError(
            f"radial function not certified > {margin}: certified min "
            f"{report.certified_min:.6g}, violating interval {report.violating_interval}"
        )
    return report


def fit_from_samples(values, degree: int) -> RadialFunction:
    """Fourier fit of equispaced samples over [0, 2*pi) by FFT projection."""
    vals = np.asarray(values, dtype=float)
    n = len(vals)
    if n < 2 * degree + 2:
        raise ValueError(f"{n} samples cannot resolve degree {degree}")
    spec = np.fft.rfft(vals)
    a = np.zeros(degree + 1)
    b = np.zeros(degree + 1)
    a[0] = spec[0].real / n
    a[1:] = 2.0 * spec[1 : degree + 1].real / n
    b[1:] = -2.0 * spec[1 : degree + 1].imag / n
    return RadialFunction(tuple(a), tuple(b))


def fit_radial(fn, degree: int, n_samples: int = 4096) -> RadialFunction:
    """Least-squares Fourier fit of a 2*pi-periodic callable.

    On an equispaced grid the least-squares trigonometric fit coincides with
    the FFT projection used here; for smooth fn the aliasing error is far
    below the certification targets used in this package.
    """
    theta = np.linspace(0.0, TWO_PI, n_samples, endpoint=False)
    return fit_from_samples(np.asarray(fn(theta), dtype=float), degree)


def fit_error(fn, h: RadialFunction, n_grid: int = 1024) -> float:
    """Max |h - fn| over an off-node grid (shifted half a spacing)."""
    theta = (np.arange(n_grid) + 0.5) * (TWO_PI / n_grid)
    return float(np.max(np.abs(h.value(theta) - np.asarray(fn(theta), dtype=float))))


def ellipse_radial(semi_x: float = 1.0, semi_y: float = 2.0**-0.5, degree: int = 32) -> RadialFunction:
    """Radial Fourier fit of the origin-centered axis-aligned ellipse.

    The default axes give the ellipse u^2 + 2 v^2 = 1 used as the canonical
    continuation start; its radial profile is 1/sqrt(1 + sin^2 theta).
    """
    if semi_x <= 0 or semi_y <= 0:
        raise ValueError("semi-axes must be positive")

    def radial(theta):
        c, s = np.cos(theta), np.sin(theta)
        return 1.0 / np.sqrt((c / semi_x) ** 2 + (s / semi_y) ** 2)

    return fit_radial(radial, degree)


def ellipse_square_half_width(semi_x: float, semi_y: float) -> float:
    """Half-width of the unique inscribed square of an axis-aligned ellipse.

    The square has vertices (+-s, +-s) with s = A B / sqrt(A^2 + B^2).
    """
    return semi_x * semi_y / math.hypot(semi_x, semi_y)


def random_radial(rng, degree: int = 6, rho: float = 0.5, min_value: float = 0.2) -> RadialFunction:
    """Random star-shaped radial function with 1/k^2 coefficient decay.

    Coefficients a_k, b_k are uniform in [-rho/k^2, rho/k^2] around the
    constant 1; the draw is rescaled (deterministically, given the generator
    state) until the certified minimum exceeds ``min_value``, which also keeps
    curvature bounded.
    """
    k = np.arange(1, degree + 1, dtype=float)
    a = rng.uniform(-1.0, 1.0, degree) * rho / k**2
    b = rng.uniform(-1.0, 1.0, degree) * rho / k**2
    for _ in range(200):
        h = RadialFunction((1.0, *a), (0.0, *b))
        if validate_positive(h, min_value).ok:
            return h
        a = 0.8 * a
        b = 0.8 * b
    raise RuntimeError("could not scale the draw into the positive cone")
