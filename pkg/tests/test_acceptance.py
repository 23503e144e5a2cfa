"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them all);
the assertions carry the same tolerances, so a red line is a red test.
"""

import json
import math
import time

import numpy as np
import pytest

from pegtable import (
    GenericityFailure,
    antipodal_transport,
    continue_from_ellipse,
    ellipse_radial,
    find_graceful_squares,
    find_tables_direct,
    find_tables_via_center,
    fiber_parity_sweep,
    parity,
    random_radial,
)
from pegtable.cli import main
from pegtable.pegs import polish_square
from pegtable.squares import QuadParam, orbit_distance, residual_batch, residual_jacobian, square_residual
from pegtable.tables import CENTER_GATE, SPREAD_TOL, _point_set_distance
from conftest import EVEN_FIELDS, NONEVEN_FIELDS
from oracles import brute_force_squares

RADII = (math.pi / 12, math.pi / 6, math.pi / 4, math.pi / 3, 0.99 * math.pi / 2)
CROSS_ROUTE_RADII = (math.pi / 6, math.pi / 4)


def report(number: int, name: str, ok: bool, detail: str = "") -> bool:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {number} {name}: {status} {detail}".rstrip())
    return ok


def seeded_curve(i: int):
    return random_radial(np.random.default_rng(1000 + i))


@pytest.fixture(scope="module")
def center_route_runs():
    """Fiber-route solutions for the even fixtures (shared by criteria 6+8)."""
    runs = {}
    for name, f in EVEN_FIELDS.items():
        for a in CROSS_ROUTE_RADII:
            events = []
            sols = find_tables_via_center(f, a, events=events)
            runs[(name, a)] = (sols, events)
    return runs


def test_criterion_1_ellipse_uniqueness():
    t0 = time.perf_counter()
    sols = find_graceful_squares(ellipse_radial())
    elapsed = time.perf_counter() - t0
    s = 1.0 / math.sqrt(3.0)
    want = np.sort(np.array([[s, s], [-s, s], [-s, -s], [s, -s]]), axis=0)
    ok = (
        len(sols) == 1
        and np.abs(np.sort(sols[0].vertices, axis=0) - want).max() < 1e-8
        and elapsed < 1.0
    )
    assert report(1, "ellipse-uniqueness", ok, f"({len(sols)} square, {elapsed:.2f}s)")


def test_criterion_2_parity_law():
    t0 = time.perf_counter()
    failures, counts = 0, {}
    for i in range(25):
        h = seeded_curve(i)
        try:
            res = parity(h)
        except GenericityFailure:
            failures += 1
            continue
        counts[i] = res.count
        assert res.parity == 1, f"curve {i} has even count {res.count}"
    oracle_ok = True
    for i in range(5):
        oracle = brute_force_squares(seeded_curve(i))
        if len(oracle) != counts[i]:
            oracle_ok = False
    elapsed = time.perf_counter() - t0
    ok = oracle_ok and all(c % 2 == 1 for c in counts.values()) and elapsed < 300.0
    assert report(
        2, "parity-law", ok,
        f"({len(counts)} generic curves, {failures} genericity failures, "
        f"5 oracle matches, {elapsed:.0f}s)",
    )


def test_criterion_3_continuation_consistency():
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(10):
        h = seeded_curve(i)
        trace = continue_from_ellipse(h)
        assert trace.success
        sols = find_graceful_squares(h)
        d = min(orbit_distance(trace.endpoint.param, s.param) for s in sols)
        worst = max(worst, d)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 120.0
    assert report(3, "continuation-consistency", ok, f"(worst match {worst:.1e}, {elapsed:.0f}s)")


def test_criterion_4_great_circle_case():
    t0 = time.perf_counter()
    spreads = {}
    for name, f in {**EVEN_FIELDS, **NONEVEN_FIELDS}.items():
        sols = find_tables_direct(f, math.pi / 2)
        assert sols, f"no table for {name} at the great-circle radius"
        spreads[name] = min(s.value_spread for s in sols)
    elapsed = time.perf_counter() - t0
    ok = max(spreads.values()) < 1e-8 and elapsed < 60.0
    assert report(
        4, "great-circle-case", ok,
        f"(5 fields, worst spread {max(spreads.values()):.1e}, {elapsed:.0f}s)",
    )


def test_criterion_5_fixed_radius_tables_and_antipodal_lift():
    t0 = time.perf_counter()
    worst_spread, worst_pair = 0.0, 0.0
    for name, f in EVEN_FIELDS.items():
        for a in RADII:
            sols = find_tables_direct(f, a)
            assert sols, f"no table for {name} at a={a:.3f}"
            worst_spread = max(worst_spread, max(s.value_spread for s in sols))
            for s in sols:
                comp = antipodal_transport(f, s)
                d = min(
                    _point_set_distance(comp.point_array(), t.point_array()) for t in sols
                )
                worst_pair = max(worst_pair, d)
    elapsed = time.perf_counter() - t0
    ok = worst_spread < 1e-8 and worst_pair < 1e-8 and elapsed < 300.0
    assert report(
        5, "fixed-radius-tables", ok,
        f"(worst spread {worst_spread:.1e}, worst companion gap {worst_pair:.1e}, {elapsed:.0f}s)",
    )


def test_criterion_6_table_certificate(center_route_runs):
    checked = 0
    ok = True
    for (name, a), (sols, events) in center_route_runs.items():
        assert not any(e["type"] == "CertificateFailure" for e in events)
        for s in sols:
            if s.center_norm is None or s.center_norm > CENTER_GATE:
                continue
            checked += 1
            if s.value_spread > SPREAD_TOL:
                ok = False
            P = s.point_array()
            x = s.x.xyz
            dirs = (P - math.cos(s.a) * x) / math.sin(s.a)
            square_defect = max(
                float(np.linalg.norm(dirs[0] + dirs[2])),
                float(np.linalg.norm(dirs[1] + dirs[3])),
                abs(float(dirs[0] @ dirs[1])),
            )
            if square_defect > 1e-8:
                ok = False
    assert checked > 0
    assert report(6, "table-certificate", ok, f"({checked} certified tables, 0 failures)")


def test_criterion_7_fiber_parity_sweep():
    t0 = time.perf_counter()
    rep = fiber_parity_sweep(EVEN_FIELDS["E1"], math.pi / 6, grid=12)
    elapsed = time.perf_counter() - t0
    generic = rep.generic
    ok = (
        rep.flagged_fraction < 0.05
        and all(e.parity == 1 for e in generic)
        and elapsed < 600.0
    )
    assert report(
        7, "fiber-parity-sweep", ok,
        f"({len(generic)}/{len(rep.entries)} generic, flags {rep.flagged_fraction:.1%}, {elapsed:.0f}s)",
    )


def test_criterion_8_cross_route_agreement(center_route_runs):
    worst = 0.0
    for (name, a), (center_sols, _events) in center_route_runs.items():
        direct = find_tables_direct(EVEN_FIELDS[name], a)
        assert center_sols and direct
        for s in center_sols:
            worst = max(
                worst,
                min(_point_set_distance(s.point_array(), t.point_array()) for t in direct),
            )
        for t in direct:
            worst = max(
                worst,
                min(_point_set_distance(s.point_array(), t.point_array()) for s in center_sols),
            )
    ok = worst < 1e-5
    assert report(8, "cross-route-agreement", ok, f"(worst 4-point-set distance {worst:.1e})")


def test_criterion_9_numerical_hygiene():
    rng = np.random.default_rng(99)
    eps, worst = 1e-6, 0.0
    for _ in range(50):
        h = random_radial(rng)
        t = rng.dirichlet([3.0, 3.0, 3.0, 3.0]) * 2.0
        p = QuadParam(rng.uniform(0.0, 2 * math.pi), tuple(t))
        J = residual_jacobian(h, p)
        u0 = p.free_vector()
        for k in range(4):
            d = np.zeros(4)
            d[k] = eps
            col = (
                residual_batch(h, (u0 + d)[None, :])[0]
                - residual_batch(h, (u0 - d)[None, :])[0]
            ) / (2 * eps)
            worst = max(worst, float(np.abs(J[:, k] - col).max()))
    jac_ok = worst < 1e-5

    e = ellipse_radial()
    root, _ = polish_square(e, np.array([math.pi / 4, 0.5, 0.5, 0.5]), 1e-14)
    u = root + np.array([8e-3, -6e-3, 5e-3, -4e-3])
    errors = []
    for _ in range(6):
        errors.append(float(np.linalg.norm(u - root)))
        p = QuadParam(u[0], (*u[1:], 2.0 - u[1:].sum()))
        u = u - np.linalg.solve(residual_jacobian(e, p), square_residual(e, p))
    ratios = [
        errors[k + 1] / errors[k] ** 2 for k in range(len(errors) - 1) if errors[k + 1] > 1e-13
    ]
    newton_ok = bool(ratios) and max(ratios) < 50.0
    ok = jac_ok and newton_ok
    assert report(
        9, "numerical-hygiene", ok,
        f"(worst jacobian gap {worst:.1e}, quadratic ratios max {max(ratios):.2f})",
    )


def test_criterion_10_determinism(tmp_path):
    e = ellipse_radial()
    field_block = {
        "terms": [[int(l), int(m), c] for l, m, c in EVEN_FIELDS["E1"].terms],
        "even_only": True,
    }
    configs = {
        "peg-find": {"command": "peg-find", "seed": 3,
                     "curve": {"cos": list(e.cos_coeffs), "sin": list(e.sin_coeffs)}},
        "peg-parity": {"command": "peg-parity", "seed": 3,
                       "curve": {"cos": [1.0, 0.12, 0.07], "sin": [0.0, 0.05, -0.08]}},
        "peg-continue": {"command": "peg-continue", "seed": 3, "steps": 100,
                         "curve": {"cos": [1.0, 0.1, -0.04], "sin": [0.0, -0.06, 0.02]}},
        "table-find": {"command": "table-find", "seed": 3, "field": field_block,
                       "radius": math.pi / 6},
        "table-center": {"command": "table-center", "seed": 3, "field": field_block,
                         "radius": math.pi / 6},
        "fiber-parity": {"command": "fiber-parity", "seed": 3, "field": field_block,
                         "radius": math.pi / 6, "grid": 3},
    }
    ok = True
    for command, payload in configs.items():
        cfg = tmp_path / f"{command}.json"
        cfg.write_text(json.dumps(payload))
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{command}-{tag}.json"
            code = main([command, "--config", str(cfg), "--out", str(out), "--seed", "3"])
            assert code == 0, f"{command} exited {code}"
            outs.append(out.read_bytes())
        if outs[0] != outs[1]:
            ok = False
    assert report(10, "determinism", ok, f"({len(configs)} commands byte-identical)")
