import math

import numpy as np
import pytest

from pegtable import RadialFunction, ScalarField, ellipse_radial

# Even fixture fields: generic mixes (no rotational symmetry, mixed l+m
# parity so no great circle is an accidental level set).
EVEN_FIELDS = {
    "E1": ScalarField(
        ((0, 0, 1.9), (2, 0, 0.41), (2, 1, 0.33), (2, -2, 0.24), (4, 3, 0.15), (4, -1, 0.11)),
        even_only=True,
    ),
    "E2": ScalarField(
        ((0, 0, 1.5), (2, 2, 0.37), (4, 0, 0.21), (4, -4, 0.13), (2, -1, 0.29)),
        even_only=True,
    ),
    "E3": ScalarField(
        ((0, 0, 2.2), (2, -2, 0.31), (2, 0, -0.18), (4, 2, 0.12), (4, -3, 0.09), (2, 1, 0.21)),
        even_only=True,
    ),
}

NONEVEN_FIELDS = {
    "N1": ScalarField(((0, 0, 1.8), (1, 1, 0.42), (2, 1, 0.27), (3, -2, 0.14), (2, 0, 0.2))),
    "N2": ScalarField(
        ((0, 0, 1.6), (1, -1, 0.38), (2, 0, 0.22), (3, 3, 0.1), (2, -1, 0.17), (1, 0, 0.2))
    ),
}


def constant_field(value: float) -> ScalarField:
    return ScalarField(((0, 0, value * 2.0 * math.sqrt(math.pi)),))


def z_squared_field() -> ScalarField:
    alpha = 2.0 * math.sqrt(math.pi) / 3.0
    beta = 4.0 / 3.0 * math.sqrt(math.pi / 5.0)
    return ScalarField(((0, 0, alpha), (2, 0, beta)), even_only=True)


@pytest.fixture(scope="session")
def ellipse() -> RadialFunction:
    return ellipse_radial()


@pytest.fixture(scope="session")
def even_fields():
    return EVEN_FIELDS


@pytest.fixture(scope="session")
def noneven_fields():
    return NONEVEN_FIELDS


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
