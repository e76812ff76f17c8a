"""Configuration-driven command line front end.

Subcommands: ``fringe`` (phase scan), ``gain-sweep`` (visibility or rate vs
gain), ``fit`` (fringe / visibility / rate calibration fits on CSV data) and
``montecarlo`` (click counting tables).  Run configurations are strict JSON
(unknown keys rejected); all numeric output is written with 17 significant
digits so CSV files round-trip exactly, and files are written atomically.

Exit codes: 0 success, 2 configuration or input errors, 3 numerical
failures (truncation, positivity), 4 fit non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigError, PhysicalityError, TruncationError
from .fitting import fit_fringe, fit_rate_vs_gain, fit_visibility_vs_gain
from .montecarlo import simulate_counts
from .pipeline import (
    CoherentInput,
    Decoherence,
    DetectorCombo,
    FockBackend,
    FringeScan,
    GaussianBackend,
    MonteCarloBackend,
    PipelineConfig,
    VacuumInput,
    dominant_harmonic,
    run_fringe_scan,
    visibility_of_scan,
)
from .svg import render_line_svg

TWO_PI = 2.0 * math.pi

# ---------------------------------------------------------------------------
# config schemas

_INPUT_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"type": {"const": "vacuum"}},
            "required": ["type"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "type": {"const": "coherent"},
                "alpha_re": {"type": "number"},
                "alpha_im": {"type": "number"},
                "pol": {"enum": ["H", "V"]},
            },
            "required": ["type", "alpha_re", "alpha_im", "pol"],
            "additionalProperties": False,
        },
    ]
}

_DECOHERENCE_SCHEMA = {
    "oneOf": [
        {"type": "null"},
        {
            "type": "object",
            "properties": {
                "basis": {"enum": ["HV", "PM"]},
                "overlap": {"type": "number", "minimum": 0.0, "maximum": 1.0},
            },
            "required": ["basis", "overlap"],
            "additionalProperties": False,
        },
    ]
}

_BACKEND_SCHEMA = {
    "oneOf": [
        {"const": "gaussian"},
        {
            "type": "object",
            "properties": {
                "fock": {
                    "type": "object",
                    "properties": {"cutoff": {"type": "integer", "minimum": 0}},
                    "required": ["cutoff"],
                    "additionalProperties": False,
                }
            },
            "required": ["fock"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "montecarlo": {
                    "type": "object",
                    "properties": {
                        "shots": {"type": "integer", "minimum": 1},
                        "seed": {"type": "integer", "minimum": 0},
                        "chunk_size": {"type": "integer", "minimum": 1},
                    },
                    "required": ["shots", "seed"],
                    "additionalProperties": False,
                }
            },
            "required": ["montecarlo"],
            "additionalProperties": False,
        },
    ]
}

_OUTPUT_SCHEMA = {
    "type": "object",
    "properties": {
        "format": {"enum": ["csv", "json"]},
        "path": {"type": "string"},
        "svg": {"type": "string"},
    },
    "required": ["format", "path"],
    "additionalProperties": False,
}

_COMBOS = [c.value for c in DetectorCombo]

RUN_SCHEMA = {
    "type": "object",
    "properties": {
        "gain": {"type": "number", "minimum": 0.0},
        "input": _INPUT_SCHEMA,
        "phase_grid": {
            "type": "object",
            "properties": {
                "start": {"type": "number"},
                "stop": {"type": "number"},
                "points": {"type": "integer", "minimum": 1},
            },
            "required": ["start", "stop", "points"],
            "additionalProperties": False,
        },
        "decoherence": _DECOHERENCE_SCHEMA,
        "phase_offset": {"type": "number"},
        "detectors": {
            "type": "object",
            "properties": {
                "efficiency": {"type": "number", "exclusiveMinimum": 0.0, "maximum": 1.0},
                "combo": {"enum": _COMBOS},
            },
            "required": ["efficiency", "combo"],
            "additionalProperties": False,
        },
        "backend": _BACKEND_SCHEMA,
        "output": _OUTPUT_SCHEMA,
        "wavelength_nm": {"type": "number", "exclusiveMinimum": 0.0},
    },
    "required": ["gain", "input", "phase_grid", "detectors", "backend", "output"],
    "additionalProperties": False,
}

SWEEP_SCHEMA = {
    "type": "object",
    "properties": {
        "gains": {
            "type": "array",
            "items": {"type": "number", "minimum": 0.0},
            "minItems": 1,
        },
        "quantity": {"enum": ["visibility", "rate"]},
        "order": {"enum": [2, 3]},
        "decoherence": _DECOHERENCE_SCHEMA,
        "phase_offset": {"type": "number"},
        "detectors": {
            "type": "object",
            "properties": {
                "efficiency": {"type": "number", "exclusiveMinimum": 0.0, "maximum": 1.0}
            },
            "required": ["efficiency"],
            "additionalProperties": False,
        },
        "backend": _BACKEND_SCHEMA,
        "output": _OUTPUT_SCHEMA,
        "wavelength_nm": {"type": "number", "exclusiveMinimum": 0.0},
    },
    "required": ["gains", "quantity", "order", "detectors", "backend", "output"],
    "additionalProperties": False,
}


def _validate(config: dict, schema: dict) -> None:
    try:
        jsonschema.validate(config, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc.message}") from exc


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _parse_backend(raw) -> GaussianBackend | FockBackend | MonteCarloBackend:
    if raw == "gaussian":
        return GaussianBackend()
    if "fock" in raw:
        return FockBackend(cutoff=raw["fock"]["cutoff"])
    mc = raw["montecarlo"]
    return MonteCarloBackend(
        shots=mc["shots"], seed=mc["seed"], chunk_size=mc.get("chunk_size", 1 << 16)
    )


def _parse_input(raw) -> VacuumInput | CoherentInput:
    if raw["type"] == "vacuum":
        return VacuumInput()
    return CoherentInput(alpha=complex(raw["alpha_re"], raw["alpha_im"]), pol=raw["pol"])


def pipeline_config_from_dict(config: dict) -> PipelineConfig:
    deco_raw = config.get("decoherence")
    decoherence = (
        Decoherence(deco_raw["basis"], deco_raw["overlap"]) if deco_raw else None
    )
    return PipelineConfig(
        gain=config["gain"],
        input=_parse_input(config["input"]),
        decoherence=decoherence,
        phase_offset_delta=config.get("phase_offset", 0.0),
        detector_efficiency=config["detectors"]["efficiency"],
        backend=_parse_backend(config["backend"]),
        wavelength_nm=config.get("wavelength_nm", 795.0),
    )


def phase_grid_from_dict(config: dict) -> np.ndarray:
    spec = config["phase_grid"]
    start, stop, points = spec["start"], spec["stop"], spec["points"]
    if stop <= start:
        raise ConfigError("phase_grid stop must exceed start")
    return start + (stop - start) * np.arange(points) / points


# ---------------------------------------------------------------------------
# output helpers


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_text_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _metadata_lines(pairs: dict) -> list:
    lines = [f"# sqf {__version__}"]
    lines.extend(f"# {key}={value}" for key, value in pairs.items())
    return lines


def scan_to_csv(scan: FringeScan, meta: dict) -> str:
    lines = _metadata_lines(meta)
    if scan.stderr is None:
        lines.append("phi_rad,value")
        lines.extend(
            f"{_fmt(p)},{_fmt(v)}" for p, v in zip(scan.phi, scan.values)
        )
    else:
        lines.append("phi_rad,value,stderr")
        lines.extend(
            f"{_fmt(p)},{_fmt(v)},{_fmt(e)}"
            for p, v, e in zip(scan.phi, scan.values, scan.stderr)
        )
    return "\n".join(lines) + "\n"


def scan_to_json(scan: FringeScan, meta: dict) -> str:
    points = []
    for idx in range(scan.phi.size):
        point = {"phi_rad": scan.phi[idx], "value": scan.values[idx]}
        if scan.stderr is not None:
            point["stderr"] = scan.stderr[idx]
        points.append(point)
    return json.dumps({"metadata": meta, "points": points}) + "\n"


def read_csv_columns(path: str) -> dict:
    """Parse a '#'-commented CSV with a mandatory header into column arrays."""
    try:
        with open(path, encoding="utf-8") as handle:
            rows = [line.strip() for line in handle if line.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read CSV {path}: {exc}") from exc
    rows = [row for row in rows if not row.startswith("#")]
    if not rows:
        raise ConfigError(f"CSV {path} has no header row")
    header = [name.strip() for name in rows[0].split(",")]
    columns = {name: [] for name in header}
    for row in rows[1:]:
        cells = row.split(",")
        if len(cells) != len(header):
            raise ConfigError(f"CSV {path}: row has {len(cells)} cells, expected {len(header)}")
        for name, cell in zip(header, cells):
            try:
                columns[name].append(float(cell))
            except ValueError as exc:
                raise ConfigError(f"CSV {path}: bad number {cell!r}") from exc
    return {name: np.asarray(vals) for name, vals in columns.items()}


def _emit(text: str, quiet: bool) -> None:
    if not quiet:
        sys.stdout.write(text + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_fringe(config: dict, quiet: bool = False) -> int:
    _validate(config, RUN_SCHEMA)
    pipeline_cfg = pipeline_config_from_dict(config)
    combo = DetectorCombo(config["detectors"]["combo"])
    grid = phase_grid_from_dict(config)
    scan = run_fringe_scan(pipeline_cfg, grid, combo)

    meta = {
        "config_hash": config_hash(config),
        "backend": scan.backend_tag,
        "combo": combo.value,
        "columns": "phi_rad,value" + ("" if scan.stderr is None else ",stderr"),
    }
    out = config["output"]
    text = scan_to_csv(scan, meta) if out["format"] == "csv" else scan_to_json(scan, meta)
    write_text_atomic(out["path"], text)
    if "svg" in out:
        svg = render_line_svg(
            [(scan.phi, scan.values, combo.value)],
            title=f"{combo.value} fringe",
            xlabel="phi (rad)",
            ylabel="coincidence",
        )
        write_text_atomic(out["svg"], svg)

    method = "fit" if scan.stderr is not None else "extrema"
    visibility, vis_err = visibility_of_scan(scan, method=method)
    try:
        harmonic = dominant_harmonic(scan)
    except ValueError:
        harmonic = None
    summary = {
        "visibility": visibility,
        "visibility_stderr": vis_err,
        "harmonic": harmonic,
        "combo": combo.value,
        "backend": scan.backend_tag,
        "config_hash": meta["config_hash"],
    }
    _emit(json.dumps(summary), quiet)
    return 0


_SWEEP_COMBO = {2: DetectorCombo.D1A_D1B, 3: DetectorCombo.D1A_D1B_D1C}
_SWEEP_GRID_POINTS = 64


def cmd_gain_sweep(config: dict, quiet: bool = False) -> int:
    _validate(config, SWEEP_SCHEMA)
    gains = list(config["gains"])
    if len(set(gains)) != len(gains):
        raise ConfigError("gain values must be distinct")
    backend = _parse_backend(config["backend"])
    if isinstance(backend, MonteCarloBackend):
        raise ConfigError("gain sweeps use the exact backends")
    combo = _SWEEP_COMBO[config["order"]]
    quantity = config["quantity"]
    grid = TWO_PI * np.arange(_SWEEP_GRID_POINTS) / _SWEEP_GRID_POINTS

    rows = []
    for gain in gains:
        deco_raw = config.get("decoherence")
        pipeline_cfg = PipelineConfig(
            gain=gain,
            decoherence=Decoherence(deco_raw["basis"], deco_raw["overlap"]) if deco_raw else None,
            phase_offset_delta=config.get("phase_offset", 0.0),
            detector_efficiency=config["detectors"]["efficiency"],
            backend=backend,
        )
        scan = run_fringe_scan(pipeline_cfg, grid, combo)
        if quantity == "visibility":
            value, _ = visibility_of_scan(scan, method="extrema")
        else:
            value = float(np.mean(scan.values))
        rows.append((gain, math.sinh(gain) ** 2, value))

    meta = {
        "config_hash": config_hash(config),
        "backend": backend.name,
        "combo": combo.value,
        "quantity": quantity,
        "order": config["order"],
        "note": "rate is the phase-averaged fringe; cross-section scale not applied",
        "columns": "g,n_bar,value",
    }
    out = config["output"]
    if out["format"] == "csv":
        lines = _metadata_lines(meta) + ["g,n_bar,value"]
        lines.extend(f"{_fmt(g)},{_fmt(nb)},{_fmt(v)}" for g, nb, v in rows)
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(
            {"metadata": meta, "points": [{"g": g, "n_bar": nb, "value": v} for g, nb, v in rows]}
        ) + "\n"
    write_text_atomic(out["path"], text)
    if "svg" in out:
        arr = np.asarray(rows)
        svg = render_line_svg(
            [(arr[:, 0], arr[:, 2], quantity)],
            title=f"{quantity} vs gain (order {config['order']})",
            xlabel="gain g",
            ylabel=quantity,
        )
        write_text_atomic(out["svg"], svg)
    _emit(json.dumps({"points": len(rows), "config_hash": meta["config_hash"]}), quiet)
    return 0


def cmd_fit(
    kind: str,
    input_path: str,
    order: int = 2,
    weighted: bool = False,
    out_path: str | None = None,
    max_iterations: int = 100,
    quiet: bool = False,
) -> int:
    columns = read_csv_columns(input_path)

    def need(*names):
        for name in names:
            if name not in columns:
                raise ConfigError(f"CSV {input_path} lacks required column {name!r}")

    if kind == "fringe":
        need("phi_rad", "value")
        weights = None
        if weighted:
            need("stderr")
            err = np.asarray(columns["stderr"])
            if np.any(err <= 0.0):
                raise ConfigError("stderr column must be positive for weighting")
            weights = 1.0 / err**2
        result = fit_fringe(columns["phi_rad"], columns["value"], weights, max_iter=max_iterations)
    elif kind == "visibility_gain":
        need("g", "value")
        result = fit_visibility_vs_gain(columns["g"], columns["value"])
    elif kind == "rate_gain":
        need("g", "value")
        result = fit_rate_vs_gain(columns["g"], columns["value"], order, max_iter=max_iterations)
    else:
        raise ConfigError(f"unknown fit kind {kind!r}")

    payload = result.as_dict()
    payload["kind"] = kind
    text = json.dumps(payload)
    if out_path:
        write_text_atomic(out_path, text + "\n")
    _emit(text, quiet)
    return 0 if result.converged else 4


_COUNTS_HEADER = (
    "phi_rad,shots,singles_d1a,singles_d1b,singles_d1c,singles_d2,"
    "pairs_d1a_d1b,pairs_d1a_d2,triples_d1a_d1b_d1c,"
    "pair11_rate,pair11_stderr,pair12_rate,pair12_stderr,triple_rate,triple_stderr"
)


def cmd_montecarlo(config: dict, quiet: bool = False) -> int:
    _validate(config, RUN_SCHEMA)
    pipeline_cfg = pipeline_config_from_dict(config)
    if not isinstance(pipeline_cfg.backend, MonteCarloBackend):
        raise ConfigError("the montecarlo command needs a montecarlo backend")
    grid = phase_grid_from_dict(config)
    backend = pipeline_cfg.backend
    table = simulate_counts(pipeline_cfg, grid, backend.shots, backend.seed)

    p11, e11 = table.rate(table.pairs["d1a_d1b"])
    p12, e12 = table.rate(table.pairs["d1a_d2"])
    p111, e111 = table.rate(table.triples)
    meta = {
        "config_hash": config_hash(config),
        "backend": "montecarlo",
        **table.metadata,
        "columns": _COUNTS_HEADER,
    }
    out = config["output"]
    if out["format"] == "csv":
        lines = _metadata_lines(meta) + [_COUNTS_HEADER]
        for i in range(grid.size):
            cells = [
                _fmt(grid[i]),
                str(table.shots),
                str(int(table.singles["d1a"][i])),
                str(int(table.singles["d1b"][i])),
                str(int(table.singles["d1c"][i])),
                str(int(table.singles["d2"][i])),
                str(int(table.pairs["d1a_d1b"][i])),
                str(int(table.pairs["d1a_d2"][i])),
                str(int(table.triples[i])),
                _fmt(p11[i]),
                _fmt(e11[i]),
                _fmt(p12[i]),
                _fmt(e12[i]),
                _fmt(p111[i]),
                _fmt(e111[i]),
            ]
            lines.append(",".join(cells))
        text = "\n".join(lines) + "\n"
    else:
        points = [
            {
                "phi_rad": float(grid[i]),
                "shots": table.shots,
                "singles": {k: int(v[i]) for k, v in table.singles.items()},
                "pairs": {k: int(v[i]) for k, v in table.pairs.items()},
                "triples": int(table.triples[i]),
            }
            for i in range(grid.size)
        ]
        text = json.dumps({"metadata": meta, "points": points}) + "\n"
    write_text_atomic(out["path"], text)
    if "svg" in out:
        svg = render_line_svg(
            [(grid, p11, "pair D1A&D1B"), (grid, p12, "pair D1A&D2")],
            title="coincidence click rates",
            xlabel="phi (rad)",
            ylabel="rate per pulse",
        )
        write_text_atomic(out["svg"], svg)
    _emit(
        json.dumps({"shots": table.shots, "points": int(grid.size), "config_hash": meta["config_hash"]}),
        quiet,
    )
    return 0


# ---------------------------------------------------------------------------
# entry point


def _apply_overrides(config: dict, args) -> dict:
    if getattr(args, "out", None) or getattr(args, "svg", None):
        config = dict(config)
        output = dict(config.get("output", {}))
        if args.out:
            output["path"] = args.out
        if args.svg:
            output["svg"] = args.svg
        config["output"] = output
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqf",
        description="Sub-Rayleigh fringe simulator for an unseeded parametric amplifier",
    )
    parser.add_argument("--version", action="version", version=f"sqf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("fringe", "run a phase scan and write the fringe data"),
        ("gain-sweep", "sweep visibility or rate over gain values"),
        ("montecarlo", "simulate click counting tables"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="JSON run configuration")
        cmd.add_argument("--out", help="override output.path")
        cmd.add_argument("--svg", help="override output.svg")
        cmd.add_argument("--quiet", action="store_true", help="suppress stdout JSON")

    fit = sub.add_parser("fit", help="least-squares calibration fits on CSV data")
    fit.add_argument("--kind", required=True, choices=["fringe", "visibility_gain", "rate_gain"])
    fit.add_argument("--input", required=True, help="input CSV path")
    fit.add_argument("--order", type=int, choices=[2, 3], default=2)
    fit.add_argument("--weighted", action="store_true", help="weight by 1/stderr^2")
    fit.add_argument("--out", help="also write the fit result JSON to this path")
    fit.add_argument("--max-iterations", type=int, default=100)
    fit.add_argument("--quiet", action="store_true", help="suppress stdout JSON")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            return cmd_fit(
                kind=args.kind,
                input_path=args.input,
                order=args.order,
                weighted=args.weighted,
                out_path=args.out,
                max_iterations=args.max_iterations,
                quiet=args.quiet,
            )
        config = _apply_overrides(load_config(args.config), args)
        if args.command == "fringe":
            return cmd_fringe(config, quiet=args.quiet)
        if args.command == "gain-sweep":
            return cmd_gain_sweep(config, quiet=args.quiet)
        return cmd_montecarlo(config, quiet=args.quiet)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TruncationError, PhysicalityError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
