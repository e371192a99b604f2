"""Layout parsing, unit conversion, CSV/JSON emission, run manifests and the CLI.

File and flag units are micrometres, gauss, amperes and microkelvin; all
internal math is SI (1 G = 1e-4 T exactly).  Every subcommand writes a
``manifest.json`` beside its outputs; re-running an identical manifest
reproduces the outputs bit-for-bit (timestamps aside), at any thread count.
"""

from __future__ import annotations

import argparse
import json
import math
import struct
import sys
from dataclasses import dataclass, field as dc_field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .constants import GAUSS, UK, UM
from .dynamics import (
    EnsembleSpec,
    Fate,
    back_reflection_estimate,
    run_split_experiment,
)
from .field import total_field
from .geometry import (
    Circuit,
    WireSegment,
    YSplitterParams,
    build_y_splitter,
    validate_circuit,
)
from .modes import ModeSet, build_slice, solve_modes
from .potential import (
    AtomSpecies,
    LI7,
    classify_two_wire,
    harmonic_frequencies,
    side_guide_height,
    trace_minima,
)


class LayoutError(ValueError):
    """Layout JSON violates the schema; the message carries the JSON path."""


# --------------------------------------------------------------------------
# layout files
#
# { "segments": [ { "start": [x, y, z], "end": [x, y, z], "current": A } ],
#   "bias_gauss": [bx, by, bz],
#   "units": { "length": "um" } }


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise LayoutError(f"{path}: {message}")


def _float_triplet(value, path: str) -> list[float]:
    _require(isinstance(value, (list, tuple)), path, "expected an array of 3 numbers")
    _require(len(value) == 3, path, f"expected 3 numbers, got {len(value)}")
    out = []
    for i, x in enumerate(value):
        _require(isinstance(x, (int, float)) and not isinstance(x, bool),
                 f"{path}[{i}]", "expected a number")
        out.append(float(x))
    return out


def parse_layout(text: str) -> Circuit:
    """Parse a layout JSON document into a validated Circuit (SI units)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LayoutError(f"$: not valid JSON ({exc})") from exc
    _require(isinstance(doc, dict), "$", "expected a JSON object")
    units = doc.get("units", {"length": "um"})
    _require(isinstance(units, dict), "$.units", "expected an object")
    _require(units.get("length", "um") == "um", "$.units.length", "only 'um' is supported")

    raw_segments = doc.get("segments")
    _require(isinstance(raw_segments, list), "$.segments", "expected an array")
    _require(len(raw_segments) > 0, "$.segments", "at least one segment required")
    segments = []
    for i, raw in enumerate(raw_segments):
        path = f"$.segments[{i}]"
        _require(isinstance(raw, dict), path, "expected an object")
        for key in ("start", "end", "current"):
            _require(key in raw, f"{path}.{key}", "missing")
        start = np.array(_float_triplet(raw["start"], f"{path}.start")) * UM
        end = np.array(_float_triplet(raw["end"], f"{path}.end")) * UM
        _require(
            isinstance(raw["current"], (int, float)) and not isinstance(raw["current"], bool),
            f"{path}.current",
            "expected a number",
        )
        try:
            segments.append(WireSegment(start, end, float(raw["current"])))
        except ValueError as exc:
            raise LayoutError(f"{path}: {exc}") from exc

    bias = np.array(_float_triplet(doc.get("bias_gauss", [0, 0, 0]), "$.bias_gauss")) * GAUSS
    circuit = Circuit(tuple(segments), bias)
    violations = validate_circuit(circuit)
    if violations:
        raise LayoutError("; ".join(violations))
    return circuit


def layout_dict(circuit: Circuit) -> dict:
    """Inverse of parse_layout: a layout document in file units (um, gauss)."""
    return {
        "segments": [
            {
                "start": [s.start[0] / UM, s.start[1] / UM, s.start[2] / UM],
                "end": [s.end[0] / UM, s.end[1] / UM, s.end[2] / UM],
                "current": s.current,
            }
            for s in circuit.segments
        ],
        "bias_gauss": [b / GAUSS for b in circuit.bias],
        "units": {"length": "um"},
    }


# --------------------------------------------------------------------------
# emission


def format_value(x) -> str:
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def emit_csv(path: Path, header: list[str], rows) -> Path:
    """Write rows (iterables of values) with floats at 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
    return path


def emit_json(path: Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_modes_binary(path: Path, modes: ModeSet) -> Path:
    """Eigenfunction grids in a flat little-endian binary layout.

    Header: int64 n_modes, ny, nz; float64 y0, dy, z0, dz.  Then n_modes
    blocks of ny*nz float64 (C order), the L2-normalized eigenfunctions.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, ny, nz = modes.psi.shape
    with path.open("wb") as fh:
        fh.write(struct.pack("<3q", n, ny, nz))
        fh.write(
            struct.pack(
                "<4d", float(modes.grid.y[0]), modes.grid.dy, float(modes.grid.z[0]), modes.grid.dz
            )
        )
        fh.write(np.ascontiguousarray(modes.psi, dtype="<f8").tobytes())
    return path


def read_modes_binary(path: Path):
    """Counterpart of write_modes_binary; returns (psi, y, z)."""
    raw = Path(path).read_bytes()
    n, ny, nz = struct.unpack_from("<3q", raw, 0)
    y0, dy, z0, dz = struct.unpack_from("<4d", raw, 24)
    psi = np.frombuffer(raw, dtype="<f8", offset=56).reshape(n, ny, nz)
    y = y0 + dy * np.arange(ny)
    z = z0 + dz * np.arange(nz)
    return psi, y, z


@dataclass
class RunManifest:
    """Provenance of one CLI run, written beside every output artifact."""

    subcommand: str
    parameters: dict
    master_seed: int | None
    version: str = __version__
    created_utc: str = ""
    outputs: list[str] = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "parameters": self.parameters,
            "master_seed": self.master_seed,
            "version": self.version,
            "created_utc": self.created_utc,
            "outputs": self.outputs,
        }


def _write_manifest(out_dir: Path, manifest: RunManifest) -> None:
    manifest.created_utc = datetime.now(timezone.utc).isoformat()
    emit_json(out_dir / "manifest.json", manifest.to_dict())
    print(json.dumps(manifest.to_dict(), sort_keys=True))


# --------------------------------------------------------------------------
# CLI helpers


def _parse_range(text: str) -> tuple[float, float]:
    a, b = text.split(":")
    return float(a), float(b)


def _parse_fractions(text: str) -> list[float]:
    a, b, step = (float(v) for v in text.split(":"))
    if step <= 0:
        raise ValueError("fraction step must be positive")
    n = int(round((b - a) / step))
    return [a + i * step for i in range(n + 1)]


def _species(args) -> AtomSpecies:
    if args.mass_u is None and args.moment_ub is None:
        return LI7
    from .constants import AMU, MU_B

    mass = (args.mass_u if args.mass_u is not None else 7.016003437) * AMU
    moment = (args.moment_ub if args.moment_ub is not None else 1.0) * MU_B
    return AtomSpecies(mass=mass, moment=moment)


def _add_species_args(p) -> None:
    p.add_argument("--mass-u", type=float, default=None, help="atom mass in unified amu")
    p.add_argument("--moment-ub", type=float, default=None, help="magnetic moment in Bohr magnetons")


def _y_params_from_args(args) -> YSplitterParams:
    bias = (args.ioffe_gauss * GAUSS, args.bias_gauss * GAUSS, 0.0)
    r0 = side_guide_height(abs(args.current), abs(args.bias_gauss) * GAUSS)
    input_length = (args.input_length_um * UM) if args.input_length_um else 10.0 * r0
    arm_length = (args.arm_length_um * UM) if args.arm_length_um else 10.0 * r0
    return YSplitterParams(
        input_length=input_length,
        arm_length=arm_length,
        half_angle=math.radians(args.half_angle_deg),
        total_current=args.current,
        current_fraction_left=getattr(args, "fraction", 0.5),
        bias=bias,
    )


def _add_y_args(p, with_fraction=False) -> None:
    p.add_argument("--current", type=float, default=0.8, help="total wire current (A)")
    p.add_argument("--bias-gauss", type=float, default=12.0, help="bias field along y (G)")
    p.add_argument("--ioffe-gauss", type=float, default=0.0, help="axial field along x (G)")
    p.add_argument("--half-angle-deg", type=float, default=10.0)
    p.add_argument("--input-length-um", type=float, default=None, help="default 10x guide height")
    p.add_argument("--arm-length-um", type=float, default=None, help="default 10x guide height")
    if with_fraction:
        p.add_argument("--fraction", type=float, default=0.5, help="left-arm current fraction")


# --------------------------------------------------------------------------
# subcommand handlers


def _cmd_y_build(args, out_dir: Path) -> RunManifest:
    params = _y_params_from_args(args)
    circuit = build_y_splitter(params)
    path = emit_json(out_dir / "layout.json", layout_dict(circuit))
    manifest = RunManifest("y-build", _args_dict(args), args.seed)
    manifest.outputs.append(path.name)
    return manifest


def _cmd_field_map(args, out_dir: Path) -> RunManifest:
    circuit = parse_layout(Path(args.layout).read_text(encoding="utf-8"))
    ranges = args.grid.split(",")
    if len(ranges) != 3:
        raise ValueError("--grid expects 'x0:x1:nx,y0:y1:ny,z0:z1:nz' in um")
    axes = []
    for spec_text in ranges:
        a, b, n = spec_text.split(":")
        axes.append(np.linspace(float(a) * UM, float(b) * UM, int(n)))
    xs, ys, zs = axes
    rows = []
    for x in xs:
        for y in ys:
            pts = np.column_stack([np.full(zs.size, x), np.full(zs.size, y), zs])
            b = total_field(circuit, pts)
            bn = np.linalg.norm(b, axis=1)
            for z, bvec, bnorm in zip(zs, b, bn):
                rows.append(
                    (x / UM, y / UM, z / UM,
                     bvec[0] / GAUSS, bvec[1] / GAUSS, bvec[2] / GAUSS, bnorm / GAUSS)
                )
    path = emit_csv(
        out_dir / "field_map.csv",
        ["x_um", "y_um", "z_um", "bx_gauss", "by_gauss", "bz_gauss", "b_gauss"],
        rows,
    )
    manifest = RunManifest("field-map", _args_dict(args), args.seed)
    manifest.outputs.append(path.name)
    return manifest


def _cmd_minima_trace(args, out_dir: Path) -> RunManifest:
    circuit = parse_layout(Path(args.layout).read_text(encoding="utf-8"))
    species = _species(args)
    x_lo, x_hi = _parse_range(args.x_um)
    window = None
    if args.y_window_um and args.z_window_um:
        window = (
            tuple(v * UM for v in _parse_range(args.y_window_um)),
            tuple(v * UM for v in _parse_range(args.z_window_um)),
        )
    trace = trace_minima(
        circuit, species, (x_lo * UM, x_hi * UM), args.slices, window,
        with_barriers=not args.no_barriers,
    )
    rows = []
    for track in trace.tracks:
        for si, m in zip(track.slice_indices, track.points):
            sl = trace.slices[si]
            idx = next(i for i, mm in enumerate(sl.minima) if mm is m)
            barrier = sl.barriers[idx] if idx < len(sl.barriers) else math.nan
            try:
                w1, w2 = harmonic_frequencies(circuit, species, m)
            except Exception:
                w1 = w2 = math.nan
            rows.append(
                (sl.x / UM, track.track_id, m.y / UM, m.z / UM,
                 m.potential, m.field_norm / GAUSS, w1, w2, barrier)
            )
    rows.sort(key=lambda r: (r[0], r[1]))
    path = emit_csv(
        out_dir / "minima_trace.csv",
        ["x_um", "track_id", "y_um", "z_um", "potential_joule",
         "b_gauss", "omega1_rad_s", "omega2_rad_s", "barrier_joule"],
        rows,
    )
    summary = {
        "split_x_um": None if trace.split_x is None else trace.split_x / UM,
        "fourth_port_x_um": None
        if trace.fourth_port_range is None
        else [trace.fourth_port_range[0] / UM, trace.fourth_port_range[1] / UM],
        "n_tracks": len(trace.tracks),
        "n_ambiguous_links": len(trace.ambiguous_links),
    }
    spath = emit_json(out_dir / "trace_summary.json", summary)
    manifest = RunManifest("minima-trace", _args_dict(args), args.seed)
    manifest.outputs += [path.name, spath.name]
    return manifest


def _cmd_classify(args, out_dir: Path) -> RunManifest:
    case = classify_two_wire(
        args.separation_um * UM, args.current, args.bias_gauss * GAUSS
    )
    verdict = {
        "case": case.kind.value,
        "d_um": case.d / UM,
        "d_split_um": case.d_split / UM,
    }
    print(json.dumps(verdict, sort_keys=True))
    path = emit_json(out_dir / "verdict.json", verdict)
    manifest = RunManifest("classify", _args_dict(args), args.seed)
    manifest.outputs.append(path.name)
    return manifest


def _split_spec(args) -> EnsembleSpec:
    return EnsembleSpec(
        species=_species(args),
        temperature=args.temp_uk * UK,
        n_atoms=args.n_atoms,
        start_x=args.start_x_um * UM,
        master_seed=args.seed if args.seed is not None else 0,
    )


def _add_transport_args(p) -> None:
    p.add_argument("--temp-uk", type=float, default=250.0)
    p.add_argument("--n-atoms", type=int, default=10000)
    p.add_argument("--start-x-um", type=float, default=-500.0)
    p.add_argument("--dt", type=float, default=1.0e-7, help="base integrator step (s)")
    p.add_argument("--t-max-ms", type=float, default=16.0)
    _add_species_args(p)


def _cmd_split_curve(args, out_dir: Path) -> RunManifest:
    params = _y_params_from_args(args)
    spec = _split_spec(args)
    fractions = _parse_fractions(args.fractions)
    points = run_split_experiment(
        spec, params, fractions, dt=args.dt, t_max=args.t_max_ms * 1e-3
    )
    rows = []
    for pt in points:
        st = pt.stats
        n_lost = (
            st.counts[Fate.LOST_SURFACE]
            + st.counts[Fate.LOST_ESCAPE]
            + st.counts[Fate.TIMEOUT]
        )
        rows.append(
            (pt.fraction, st.counts[Fate.LEFT], st.counts[Fate.RIGHT],
             st.counts[Fate.BACK], n_lost, pt.left_fraction, pt.left_stderr)
        )
    path = emit_csv(
        out_dir / "split_curve.csv",
        ["fraction", "n_left", "n_right", "n_back", "n_lost", "left_frac", "err"],
        rows,
    )
    manifest = RunManifest("split-curve", _args_dict(args), args.seed)
    manifest.outputs.append(path.name)
    return manifest


def _cmd_back_reflection(args, out_dir: Path) -> RunManifest:
    params = _y_params_from_args(args)
    spec = _split_spec(args)
    result = back_reflection_estimate(spec, params, dt=args.dt, t_max=args.t_max_ms * 1e-3)
    payload = {
        "back_fraction_of_reached": result.fraction,
        "n_reached": result.n_reached,
        "n_back": result.n_back,
        "counts": {f.name: result.stats.counts[f] for f in Fate},
    }
    print(json.dumps(payload, sort_keys=True))
    path = emit_json(out_dir / "back_reflection.json", payload)
    manifest = RunManifest("back-reflection", _args_dict(args), args.seed)
    manifest.outputs.append(path.name)
    return manifest


def _cmd_modes(args, out_dir: Path) -> RunManifest:
    circuit = parse_layout(Path(args.layout).read_text(encoding="utf-8"))
    species = _species(args)
    y_window = _parse_range(args.y_window_um)
    z_window = _parse_range(args.z_window_um)
    grid = build_slice(
        circuit,
        species,
        args.slice_x_um * UM,
        y_range=(y_window[0] * UM, y_window[1] * UM),
        z_range=(z_window[0] * UM, z_window[1] * UM),
        shape=(args.grid, args.grid),
    )
    modeset = solve_modes(grid, species.mass, args.n_modes, seed=args.seed or 0)
    path = emit_csv(
        out_dir / "eigenvalues.csv",
        ["k", "energy_joule", "residual"],
        [(k, modeset.energies[k], modeset.residuals[k]) for k in range(args.n_modes)],
    )
    bpath = write_modes_binary(out_dir / "modes.bin", modeset)
    summary = {
        "resolution_ok": bool(modeset.resolution_ok),
        "ground_width_cells": modeset.ground_width_cells,
        "depth_ratio_at_top_mode": grid.depth_ratio(float(modeset.energies[-1])),
    }
    spath = emit_json(out_dir / "modes_summary.json", summary)
    manifest = RunManifest("modes", _args_dict(args), args.seed)
    manifest.outputs += [path.name, bpath.name, spath.name]
    return manifest


# --------------------------------------------------------------------------


def _args_dict(args) -> dict:
    skip = {"func", "out", "threads"}
    return {
        k: v for k, v in sorted(vars(args).items()) if k not in skip and not k.startswith("_")
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chipsplit",
        description="Magnetic microtrap and guided-atom beam splitter simulator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output directory (default out-<subcommand>)")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads; affects speed only, never results")

    p = sub.add_parser("y-build", help="emit a Y-splitter layout JSON")
    common(p)
    _add_y_args(p, with_fraction=True)
    p.set_defaults(func=_cmd_y_build)

    p = sub.add_parser("field-map", help="sample B on a grid into CSV (um/G)")
    common(p)
    p.add_argument("--layout", required=True)
    p.add_argument("--grid", required=True, help="x0:x1:nx,y0:y1:ny,z0:z1:nz in um")
    p.set_defaults(func=_cmd_field_map)

    p = sub.add_parser("minima-trace", help="trace transverse minima along the guide")
    common(p)
    p.add_argument("--layout", required=True)
    p.add_argument("--x-um", required=True, help="x0:x1 range in um")
    p.add_argument("--slices", type=int, default=120)
    p.add_argument("--y-window-um", default=None, help="y0:y1 in um")
    p.add_argument("--z-window-um", default=None, help="z0:z1 in um")
    p.add_argument("--no-barriers", action="store_true")
    _add_species_args(p)
    p.set_defaults(func=_cmd_minima_trace)

    p = sub.add_parser("classify", help="two-wire case verdict (single-line JSON)")
    common(p)
    p.add_argument("--separation-um", type=float, required=True)
    p.add_argument("--current", type=float, required=True, help="total current (A)")
    p.add_argument("--bias-gauss", type=float, required=True)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("split-curve", help="Monte Carlo switching curve")
    common(p)
    _add_y_args(p)
    p.add_argument("--fractions", default="0:1:0.1", help="a:b:step left-arm current fractions")
    _add_transport_args(p)
    p.set_defaults(func=_cmd_split_curve)

    p = sub.add_parser("back-reflection", help="equal-split back-reflection estimate")
    common(p)
    _add_y_args(p)
    _add_transport_args(p)
    p.set_defaults(func=_cmd_back_reflection)

    p = sub.add_parser("modes", help="solve transverse quantum modes on a slice")
    common(p)
    p.add_argument("--layout", required=True)
    p.add_argument("--slice-x-um", type=float, required=True)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--n-modes", type=int, default=35)
    p.add_argument("--y-window-um", required=True, help="y0:y1 in um")
    p.add_argument("--z-window-um", required=True, help="z0:z1 in um")
    _add_species_args(p)
    p.set_defaults(func=_cmd_modes)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        import numba

        numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
    out_dir = Path(args.out if args.out else f"out-{args.subcommand}")
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        manifest = args.func(args, out_dir)
    except (LayoutError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_manifest(out_dir, manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
