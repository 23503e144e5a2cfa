"""Command-line surface: config ingestion, solver orchestration, result
documents, and SVG plots.

Configs are JSON with explicit keys (schema in the README); unknown keys are
rejected.  Result documents are JSON with every float printed at 17
significant digits, so documents round-trip losslessly and identical runs are
byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .pegs import (
    ContinuationTrace,
    DegenerateFamily,
    GenericityFailure,
    PositivityLost,
    SolveConfig,
    SolverCoverageFailure,
    TrackingLoss,
    continue_from_ellipse,
    find_graceful_squares,
    parity,
)
from .radial import PositivityError, RadialFunction, StarCurve
from .sphere import ScalarField, TableSolution
from .tables import CertificateFailure, find_tables_direct, find_tables_via_center, fiber_parity_sweep

PI = math.pi

_CURVE_COMMANDS = ("peg-find", "peg-parity", "peg-continue")
_FIELD_COMMANDS = ("table-find", "table-center", "fiber-parity")
_COMMANDS = _CURVE_COMMANDS + _FIELD_COMMANDS

_KEYS_BY_COMMAND = {
    "peg-find": {"command", "curve", "solve", "seed", "include_timing"},
    "peg-parity": {"command", "curve", "solve", "seed", "include_timing"},
    "peg-continue": {"command", "curve", "solve", "steps", "seed", "include_timing"},
    "table-find": {"command", "field", "radius", "solve", "seed", "include_timing"},
    "table-center": {"command", "field", "radius", "solve", "seed", "include_timing"},
    "fiber-parity": {"command", "field", "radius", "grid", "solve", "seed", "include_timing"},
}

_SOLVE_KEYS = {"grid_density", "newton_tol", "newton_max_iter", "dedupe_tol", "genericity_floor"}


class ConfigError(ValueError):
    """Invalid configuration; the message carries the offending key path."""


def _expect(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _number_list(value, path: str) -> list:
    _expect(isinstance(value, list), f"{path} must be a list of numbers")
    out = []
    for i, v in enumerate(value):
        _expect(isinstance(v, (int, float)) and not isinstance(v, bool),
                f"{path}[{i}] must be a number")
        out.append(float(v))
    return out


def parse_curve(block, path: str = "curve") -> RadialFunction:
    _expect(isinstance(block, dict), f"{path} must be an object")
    unknown = set(block) - {"cos", "sin"}
    _expect(not unknown, f"unknown keys in {path}: {sorted(unknown)}")
    _expect("cos" in block, f"{path}.cos is required")
    cos = _number_list(block["cos"], f"{path}.cos")
    sin = _number_list(block.get("sin", []), f"{path}.sin")
    try:
        return RadialFunction(tuple(cos), tuple(sin))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_field(block, path: str = "field") -> ScalarField:
    _expect(isinstance(block, dict), f"{path} must be an object")
    unknown = set(block) - {"terms", "even_only"}
    _expect(not unknown, f"unknown keys in {path}: {sorted(unknown)}")
    _expect("terms" in block and isinstance(block["terms"], list) and block["terms"],
            f"{path}.terms must be a non-empty list of [l, m, coefficient]")
    terms = []
    for i, t in enumerate(block["terms"]):
        _expect(isinstance(t, list) and len(t) == 3, f"{path}.terms[{i}] must be [l, m, coefficient]")
        l, m, c = t
        _expect(isinstance(l, int) and isinstance(m, int) and not isinstance(l, bool)
                and not isinstance(m, bool), f"{path}.terms[{i}]: l and m must be integers")
        _expect(isinstance(c, (int, float)) and not isinstance(c, bool),
                f"{path}.terms[{i}]: coefficient must be a number")
        terms.append((l, m, float(c)))
    even = block.get("even_only", False)
    _expect(isinstance(even, bool), f"{path}.even_only must be true or false")
    try:
        return ScalarField(tuple(terms), even_only=even)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_solve(block, path: str = "solve") -> SolveConfig:
    if block is None:
        return SolveConfig()
    _expect(isinstance(block, dict), f"{path} must be an object")
    unknown = set(block) - _SOLVE_KEYS
    _expect(not unknown, f"unknown keys in {path}: {sorted(unknown)}")
    kwargs = {}
    for key, value in block.items():
        if key in ("grid_density", "newton_max_iter"):
            _expect(isinstance(value, int) and not isinstance(value, bool),
                    f"{path}.{key} must be an integer")
            kwargs[key] = value
        else:
            _expect(isinstance(value, (int, float)) and not isinstance(value, bool),
                    f"{path}.{key} must be a number")
            kwargs[key] = float(value)
    try:
        return SolveConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def validate_config(raw: dict) -> dict:
    _expect(isinstance(raw, dict), "config root must be an object")
    _expect("command" in raw, "config.command is required")
    command = raw["command"]
    _expect(command in _COMMANDS, f"unknown command {command!r}; choose from {list(_COMMANDS)}")
    allowed = _KEYS_BY_COMMAND[command]
    unknown = set(raw) - allowed
    _expect(not unknown, f"unknown keys for {command}: {sorted(unknown)}")

    cfg = {"command": command}
    if command in _CURVE_COMMANDS:
        _expect("curve" in raw, f"{command} requires a curve block")
        cfg["curve"] = raw["curve"]
        parse_curve(raw["curve"])
    else:
        _expect("field" in raw, f"{command} requires a field block")
        cfg["field"] = raw["field"]
        parse_field(raw["field"])
        _expect("radius" in raw, f"{command} requires radius")
        radius = raw["radius"]
        _expect(isinstance(radius, (int, float)) and not isinstance(radius, bool),
                "radius must be a number")
        _expect(0.0 < float(radius) <= PI / 2.0 + 1e-15,
                f"radius must lie in (0, pi/2], got {radius}")
        cfg["radius"] = float(radius)
    if command == "peg-continue":
        steps = raw.get("steps", 200)
        _expect(isinstance(steps, int) and not isinstance(steps, bool) and steps >= 1,
                "steps must be a positive integer")
        cfg["steps"] = steps
    if command == "fiber-parity":
        grid = raw.get("grid", 12)
        _expect(isinstance(grid, int) and not isinstance(grid, bool) and grid >= 1,
                "grid must be a positive integer")
        cfg["grid"] = grid
    if "solve" in raw:
        parse_solve(raw["solve"])
        cfg["solve"] = raw["solve"]
    seed = raw.get("seed", 0)
    _expect(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
            "seed must be a non-negative integer")
    cfg["seed"] = seed
    timing = raw.get("include_timing", False)
    _expect(isinstance(timing, bool), "include_timing must be true or false")
    cfg["include_timing"] = timing
    return cfg


# ---------------------------------------------------------------------------
# serialization


def _fmt_float(x: float) -> str:
    s = format(float(x), ".17g")
    if not any(ch in s for ch in ".eEn"):
        s += ".0"
    return s


def render_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with floats at 17 significant digits."""
    pad = "  " * indent
    child = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [f"{child}{json.dumps(str(k))}: {render_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not len(obj):
            return "[]"
        rows = [f"{child}{render_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _square_dict(sol) -> dict:
    return {
        "vertices": [[float(v[0]), float(v[1])] for v in sol.vertices],
        "param": {"x": sol.param.x, "t": list(sol.param.t)},
        "side": sol.side,
        "jacobian_sigma_min": sol.jacobian_sigma_min,
    }


def _table_dict(sol: TableSolution) -> dict:
    return {
        "x": [float(v) for v in sol.x.xyz],
        "a": sol.a,
        "phi": sol.phi,
        "points": [[float(c) for c in p.xyz] for p in sol.points],
        "value_spread": sol.value_spread,
        "center_norm": sol.center_norm,
    }


def _trace_dict(trace: ContinuationTrace) -> dict:
    return {
        "s": [float(s) for s in trace.s_values],
        "params": [{"x": p.x, "t": list(p.t)} for p in trace.params],
        "fold_events": [{"s": e.s, "direction": e.direction} for e in trace.fold_events],
        "success": trace.success,
    }


# ---------------------------------------------------------------------------
# command execution


def execute(cfg: dict) -> tuple[int, dict]:
    """Run the configured command; returns (exit code, result document)."""
    command = cfg["command"]
    solve_cfg = parse_solve(cfg.get("solve"))
    events: list = []
    solutions: list = []
    extra: dict = {}
    exit_code = 0
    started = time.perf_counter()

    if command in _CURVE_COMMANDS:
        h = parse_curve(cfg["curve"])
        if command == "peg-find":
            try:
                solutions = [_square_dict(s) for s in find_graceful_squares(h, solve_cfg)]
            except DegenerateFamily as exc:
                events.append({"type": "DegenerateFamily", "detail": str(exc),
                               "distinct_roots": exc.count})
                solutions = [_square_dict(exc.representative)]
            except SolverCoverageFailure as exc:
                events.append({"type": "SolverCoverageFailure", "detail": str(exc)})
                exit_code = 2
        elif command == "peg-parity":
            try:
                res = parity(h, solve_cfg)
                extra["summary"] = {"count": res.count, "parity": res.parity}
            except GenericityFailure as exc:
                cause = exc.__cause__
                if isinstance(cause, DegenerateFamily):
                    events.append({"type": "DegenerateFamily", "detail": str(cause),
                                   "distinct_roots": cause.count})
                else:
                    events.append({"type": "GenericityFailure", "detail": str(exc)})
            except SolverCoverageFailure as exc:
                events.append({"type": "SolverCoverageFailure", "detail": str(exc)})
                exit_code = 2
        else:
            try:
                trace = continue_from_ellipse(h, solve_cfg, steps=cfg["steps"])
                extra["trace"] = _trace_dict(trace)
                if trace.endpoint is not None:
                    solutions = [_square_dict(trace.endpoint)]
            except (TrackingLoss, PositivityLost) as exc:
                events.append({"type": type(exc).__name__, "detail": str(exc)})
                exit_code = 2
    else:
        f = parse_field(cfg["field"])
        a = cfg["radius"]
        if command == "table-find":
            try:
                solutions = [_table_dict(s) for s in find_tables_direct(f, a, solve_cfg)]
            except DegenerateFamily as exc:
                events.append({"type": "DegenerateFamily", "detail": str(exc)})
                solutions = [_table_dict(exc.representative)]
            except SolverCoverageFailure as exc:
                events.append({"type": "SolverCoverageFailure", "detail": str(exc)})
                exit_code = 2
        elif command == "table-center":
            try:
                sols = find_tables_via_center(f, a, solve_cfg, events=events)
                solutions = [_table_dict(s) for s in sols]
            except SolverCoverageFailure as exc:
                events.append({"type": "SolverCoverageFailure", "detail": str(exc)})
                exit_code = 2
            except CertificateFailure as exc:
                events.append({"type": "CertificateFailure", "detail": str(exc)})
                exit_code = 2
        else:
            report = fiber_parity_sweep(f, a, grid=cfg["grid"], cfg=solve_cfg)
            points = [
                {
                    "x": [float(v) for v in e.x],
                    "count": e.count,
                    "parity": e.parity,
                    "flag": e.flag,
                }
                for e in report.entries
            ]
            extra["summary"] = {
                "points": points,
                "flagged_fraction": report.flagged_fraction,
                "parity_ok": report.parity_ok,
            }

    doc = {
        "command": command,
        "solver_version": __version__,
        "config": cfg,
        "solutions": solutions,
        "events": events,
    }
    doc.update(extra)
    if cfg.get("include_timing"):
        doc["wall_clock_seconds"] = time.perf_counter() - started
    return exit_code, doc


# ---------------------------------------------------------------------------
# SVG emission


def _svg_header(extent: float) -> tuple[list, float]:
    scale = 280.0 / extent
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" width="640" height="640" viewBox="0 0 640 640">',
        '<rect width="640" height="640" fill="white"/>',
        f'<g transform="translate(320,320) scale({scale:.9f},-{scale:.9f})">',
    ]
    return lines, scale


def _polyline(points, stroke: str, width: float, fill: str = "none", dashed: bool = False) -> str:
    pts = " ".join(f"{p[0]:.9f},{p[1]:.9f}" for p in points)
    dash = ' stroke-dasharray="0.04,0.03"' if dashed else ""
    return (f'<polyline points="{pts}" fill="{fill}" stroke="{stroke}" '
            f'stroke-width="{width:.9f}"{dash}/>')


def _svg_planar(doc: dict) -> str:
    h = parse_curve(doc["config"]["curve"])
    curve = StarCurve(h)
    theta = np.linspace(0.0, 2.0 * PI, 721)
    pts = curve.point(theta)
    extent = 1.25 * float(np.abs(pts).max() + 1e-9)
    lines, scale = _svg_header(extent)
    lines.append(_polyline(pts, "#1f4e79", 2.0 / scale))
    for sol in doc.get("solutions", []):
        verts = sol["vertices"] + sol["vertices"][:1]
        lines.append(_polyline(verts, "#c0392b", 1.6 / scale))
        for v in sol["vertices"]:
            lines.append(f'<circle cx="{v[0]:.9f}" cy="{v[1]:.9f}" r="{4.0 / scale:.9f}" fill="#c0392b"/>')
    lines.extend(["</g>", "</svg>", ""])
    return "\n".join(lines)


def _front_runs(points3):
    """Split a sampled sphere circle into visible (z >= 0) polyline runs."""
    runs, current = [], []
    for p in points3:
        if p[2] >= 0.0:
            current.append((p[0], p[1]))
        elif current:
            runs.append(current)
            current = []
    if current:
        runs.append(current)
    return runs


def _svg_sphere(doc: dict) -> str:
    lines, scale = _svg_header(1.25)
    t = np.linspace(0.0, 2.0 * PI, 241)
    lines.append(_polyline(np.column_stack([np.cos(t), np.sin(t)]), "#555555", 1.2 / scale))
    for lat in (-60, -30, 0, 30, 60):
        z = math.sin(math.radians(lat))
        r = math.cos(math.radians(lat))
        ring = np.column_stack([r * np.cos(t), r * np.sin(t), np.full_like(t, z)])
        for run in _front_runs(ring):
            if len(run) > 1:
                lines.append(_polyline(run, "#bbbbbb", 0.8 / scale))
    for lon in range(0, 180, 30):
        cl, sl = math.cos(math.radians(lon)), math.sin(math.radians(lon))
        ring = np.column_stack([np.cos(t) * cl, np.cos(t) * sl, np.sin(t)])
        for run in _front_runs(ring):
            if len(run) > 1:
                lines.append(_polyline(run, "#bbbbbb", 0.8 / scale))
    for sol in doc.get("solutions", []):
        for p in sol["points"]:
            front = p[2] >= 0.0
            fill = "#c0392b" if front else "none"
            lines.append(
                f'<circle cx="{p[0]:.9f}" cy="{p[1]:.9f}" r="{5.0 / scale:.9f}" '
                f'fill="{fill}" stroke="#c0392b" stroke-width="{1.2 / scale:.9f}"/>'
            )
    lines.extend(["</g>", "</svg>", ""])
    return "\n".join(lines)


def emit_svg(doc: dict, path: str) -> None:
    """Deterministic SVG of the computed geometry (skips when nothing plots).

    Planar commands draw the curve at 720 samples plus every solution square;
    sphere commands draw an orthographic graticule plus the table points, in
    raw mathematical coordinates inside a scaled group.
    """
    command = doc.get("command", "")
    if command in _CURVE_COMMANDS:
        content = _svg_planar(doc)
    elif command in _FIELD_COMMANDS:
        content = _svg_sphere(doc)
    else:
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)


# ---------------------------------------------------------------------------
# entry point


def run(config_path: str, out_path: str | None = None, svg_path: str | None = None,
        seed: int | None = None) -> tuple[int, dict | None]:
    """Load, validate and execute a config; write the document and SVG."""
    try:
        cfg = validate_config(load_config(config_path))
        if seed is not None:
            cfg["seed"] = seed
        code, doc = execute(cfg)
    except (ConfigError, PositivityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1, None
    text = render_json(doc) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if svg_path:
        emit_svg(doc, svg_path)
    return code, doc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pegtable",
        description="Graceful inscribed squares of star-shaped curves and "
        "equal-value tables on the sphere.",
    )
    parser.add_argument("command", choices=_COMMANDS, help="solver command (must match the config)")
    parser.add_argument("--config", required=True, help="path to the JSON config file")
    parser.add_argument("--out", help="write the result document here instead of stdout")
    parser.add_argument("--svg", help="also write an SVG plot of the results")
    parser.add_argument("--seed", type=int, help="override the config seed")
    args = parser.parse_args(argv)

    try:
        raw = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if isinstance(raw, dict) and raw.get("command") != args.command:
        print(
            f"error: config command {raw.get('command')!r} does not match "
            f"CLI command {args.command!r}",
            file=sys.stderr,
        )
        return 1
    code, _doc = run(args.config, args.out, args.svg, args.seed)
    return code


if __name__ == "__main__":
    sys.exit(main())
