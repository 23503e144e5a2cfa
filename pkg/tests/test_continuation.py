import numpy as np
import pytest

from pegtable import (
    PositivityError,
    RadialFunction,
    continue_from_ellipse,
    find_graceful_squares,
    random_radial,
)
from pegtable.squares import orbit_distance


def test_trivial_path_keeps_the_start_square(ellipse):
    trace = continue_from_ellipse(ellipse)
    assert trace.success
    assert not trace.fold_events
    assert orbit_distance(trace.params[0], trace.endpoint.param) < 1e-8


def test_endpoint_matches_a_multistart_solution(rng):
    for _ in range(4):
        h = random_radial(rng)
        trace = continue_from_ellipse(h)
        assert trace.success
        sols = find_graceful_squares(h)
        assert min(orbit_distance(trace.endpoint.param, s.param) for s in sols) < 1e-6


def test_fold_fixture_records_turning_points():
    # frozen fixture: this seeded curve makes the tracked path fold back and
    # forth once each before reaching the target
    h = random_radial(np.random.default_rng(3010), degree=6, rho=2.5)
    trace = continue_from_ellipse(h)
    assert trace.success
    assert len(trace.fold_events) >= 1
    directions = {e.direction for e in trace.fold_events}
    assert directions <= {-1, 1}
    # parity of the endpoint curve's square count is still odd
    assert len(find_graceful_squares(h)) % 2 == 1


def test_trace_steps_stay_small(rng):
    h = random_radial(rng)
    trace = continue_from_ellipse(h)
    params = [p.free_vector() for p in trace.params]
    for a, b in zip(params, params[1:]):
        assert np.linalg.norm(b - a) < 0.5


def test_invalid_target_is_rejected():
    with pytest.raises(PositivityError):
        continue_from_ellipse(RadialFunction((1.0, -1.5)))


def test_monotone_s_values_without_folds(rng):
    h = random_radial(rng)
    trace = continue_from_ellipse(h)
    if not trace.fold_events:
        assert (np.diff(trace.s_values) > -1e-12).all()
    assert trace.s_values[0] == 0.0
    assert abs(trace.s_values[-1] - 1.0) < 1e-9
