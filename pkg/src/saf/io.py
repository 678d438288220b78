"""File formats: layout/design JSON, pattern CSV, trace JSONL, run manifests.

JSON numbers are written with Python's shortest round-trip repr and the CSV
with 17 significant digits, so any value read back compares exactly. No
reader mutates its input file.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .beamforming import Pattern
from .geometry import ArrayLayout, ElementSize, ForbiddenZone, GridSpec
from .metrics import MetricsReport
from .optimizer import DesignSpec, OptimizerTrace

DB_FLOOR = -120.0


class SchemaError(ValueError):
    """Raised for structurally invalid layout/config/trace files."""


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise SchemaError(f"{context}: missing field {key!r}")
    return mapping[key]


def _coords(raw, context: str) -> tuple[tuple[int, int], ...]:
    out = []
    for i, pair in enumerate(raw):
        if len(pair) != 2:
            raise SchemaError(f"{context}[{i}]: expected [m, n], got {pair!r}")
        out.append((int(pair[0]), int(pair[1])))
    return tuple(out)


def _size_from(raw: dict, context: str) -> ElementSize:
    return ElementSize(float(_require(raw, "w", context)), float(_require(raw, "h", context)))


def zone_to_dict(zone: ForbiddenZone) -> dict:
    return {
        "y_mc": zone.y_mc,
        "z_mc": zone.z_mc,
        "center": list(zone.center),
        "kind": zone.kind,
    }


def zone_from_dict(raw: dict, context: str = "zone") -> ForbiddenZone:
    center = _require(raw, "center", context)
    return ForbiddenZone(
        y_mc=float(_require(raw, "y_mc", context)),
        z_mc=float(_require(raw, "z_mc", context)),
        center=(int(center[0]), int(center[1])),
        kind=raw.get("kind", "both-excluded"),
    )


def layout_to_dict(layout: ArrayLayout, zones: Sequence[ForbiddenZone] = ()) -> dict:
    g = layout.grid
    return {
        "grid": {"d_y": g.d_y, "d_z": g.d_z, "M": g.M, "N": g.N},
        "tx": [list(p) for p in layout.tx_positions],
        "rx": [list(p) for p in layout.rx_positions],
        "tx_size": {"w": layout.tx_size.width, "h": layout.tx_size.height},
        "rx_size": {"w": layout.rx_size.width, "h": layout.rx_size.height},
        "enforced_tx": [list(p) for p in layout.enforced_tx],
        "enforced_rx": [list(p) for p in layout.enforced_rx],
        "zones": [zone_to_dict(z) for z in zones],
    }


def layout_from_dict(raw: dict) -> tuple[ArrayLayout, tuple[ForbiddenZone, ...]]:
    grid_raw = _require(raw, "grid", "layout")
    grid = GridSpec(
        d_y=float(_require(grid_raw, "d_y", "grid")),
        d_z=float(_require(grid_raw, "d_z", "grid")),
        M=int(_require(grid_raw, "M", "grid")),
        N=int(_require(grid_raw, "N", "grid")),
    )
    try:
        layout = ArrayLayout(
            grid=grid,
            tx_positions=_coords(_require(raw, "tx", "layout"), "tx"),
            rx_positions=_coords(_require(raw, "rx", "layout"), "rx"),
            tx_size=_size_from(_require(raw, "tx_size", "layout"), "tx_size"),
            rx_size=_size_from(_require(raw, "rx_size", "layout"), "rx_size"),
            enforced_tx=_coords(raw.get("enforced_tx", []), "enforced_tx"),
            enforced_rx=_coords(raw.get("enforced_rx", []), "enforced_rx"),
        )
    except ValueError as exc:
        raise SchemaError(f"layout: {exc}") from exc
    zones = tuple(zone_from_dict(z, f"zones[{i}]") for i, z in enumerate(raw.get("zones", [])))
    return layout, zones


def save_layout(layout: ArrayLayout, path: Path, zones: Sequence[ForbiddenZone] = ()) -> None:
    Path(path).write_text(json.dumps(layout_to_dict(layout, zones), indent=2) + "\n")


def load_layout(path: Path) -> tuple[ArrayLayout, tuple[ForbiddenZone, ...]]:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return layout_from_dict(raw)


def spec_to_dict(spec: DesignSpec) -> dict:
    return {
        "dimensionality": spec.dimensionality,
        "n_tx": spec.n_tx,
        "n_rx": spec.n_rx,
        "target_ufov_az": spec.target_ufov_az,
        "target_hpbw_az": spec.target_hpbw_az,
        "target_ufov_el": spec.target_ufov_el,
        "target_hpbw_el": spec.target_hpbw_el,
        "tx_size": {"w": spec.tx_size.width, "h": spec.tx_size.height},
        "rx_size": {"w": spec.rx_size.width, "h": spec.rx_size.height},
        "zones": [zone_to_dict(z) for z in spec.zones],
        "enforced_tx": [list(p) for p in spec.enforced_tx],
        "enforced_rx": [list(p) for p in spec.enforced_rx],
        "desired_pslr_db": spec.desired_pslr_db,
        "k_max": spec.k_max,
        "seed": spec.seed,
        "q_phi": spec.q_phi,
        "q_theta": spec.q_theta,
        "intensity": spec.intensity,
        "use_hia": spec.use_hia,
        "plateau_interval": spec.plateau_interval,
    }


def spec_from_dict(raw: dict) -> DesignSpec:
    try:
        spec = DesignSpec(
            dimensionality=str(_require(raw, "dimensionality", "config")),
            n_tx=int(_require(raw, "n_tx", "config")),
            n_rx=int(_require(raw, "n_rx", "config")),
            target_ufov_az=float(_require(raw, "target_ufov_az", "config")),
            target_hpbw_az=float(_require(raw, "target_hpbw_az", "config")),
            tx_size=_size_from(_require(raw, "tx_size", "config"), "tx_size"),
            rx_size=_size_from(_require(raw, "rx_size", "config"), "rx_size"),
            target_ufov_el=float(raw.get("target_ufov_el", 90.0)),
            target_hpbw_el=(
                float(raw["target_hpbw_el"]) if raw.get("target_hpbw_el") is not None else None
            ),
            zones=tuple(zone_from_dict(z, f"zones[{i}]") for i, z in enumerate(raw.get("zones", []))),
            enforced_tx=_coords(raw.get("enforced_tx", []), "enforced_tx"),
            enforced_rx=_coords(raw.get("enforced_rx", []), "enforced_rx"),
            desired_pslr_db=float(raw.get("desired_pslr_db", math.inf)),
            k_max=int(raw.get("k_max", 1000)),
            seed=int(raw.get("seed", 0)),
            q_phi=int(raw.get("q_phi", 8)),
            q_theta=int(raw.get("q_theta", 8)),
            intensity=int(raw.get("intensity", 3)),
            use_hia=bool(raw.get("use_hia", True)),
            plateau_interval=int(raw.get("plateau_interval", 100)),
        )
    except SchemaError:
        raise
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"config: {exc}") from exc
    return spec


def load_design_config(path: Path) -> tuple[DesignSpec, Optional[list[dict]]]:
    """Read a design config; returns the spec and an optional hyperparameter grid."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    spec = spec_from_dict(raw)
    outer = raw.get("outer_loop")
    if outer is not None and not isinstance(outer, list):
        raise SchemaError("config: outer_loop must be a list of override objects")
    return spec, outer


def spec_hash(raw_config: dict) -> str:
    """Stable digest of a canonicalized (sorted keys, compact) config object."""
    canonical = json.dumps(raw_config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_pattern_csv(pattern: Pattern, path: Path) -> None:
    """Pattern lattice as CSV: u,v,re,im,mag_db row-major over v then u.

    mag_db is relative to the pattern maximum and floored at -120 dB.
    """
    mag = pattern.magnitude
    peak = float(mag.max())
    lines = ["u,v,re,im,mag_db"]
    u_samples = pattern.grid.u_samples
    v_samples = pattern.grid.v_samples
    for iv in range(v_samples.size):
        v = v_samples[iv]
        for iu in range(u_samples.size):
            value = pattern.values[iv, iu]
            if peak > 0 and mag[iv, iu] > 0:
                db = max(DB_FLOOR, 20.0 * math.log10(mag[iv, iu] / peak))
            else:
                db = DB_FLOOR
            lines.append(
                f"{u_samples[iu]:.17g},{v:.17g},{value.real:.17g},{value.imag:.17g},{db:.17g}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def write_metrics_json(report: MetricsReport, path: Path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")


def write_trace_jsonl(trace: OptimizerTrace, path: Path, seed: int, k_max: int) -> None:
    """Trace as JSON lines: a meta line, one line per iteration, and a summary line."""
    lines = [
        json.dumps(
            {"type": "meta", "seed": seed, "k_max": k_max, "initial_pslr_db": trace.initial_pslr_db}
        )
    ]
    for r in trace.records:
        lines.append(
            json.dumps(
                {
                    "type": "iteration",
                    "k": r.k,
                    "candidate_pslr_db": r.candidate_pslr_db,
                    "best_pslr_db": r.best_pslr_db,
                    "accepted": r.accepted,
                }
            )
        )
    lines.append(
        json.dumps(
            {
                "type": "summary",
                "termination": trace.termination,
                "final_pslr_db": trace.final_pslr_db,
                "improvements": trace.improvements,
                "iterations": len(trace.records),
            }
        )
    )
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class TraceSummary:
    """Validated digest of a trace file, as shown by the report command."""

    iterations: int
    termination: str
    initial_pslr_db: float
    final_pslr_db: float
    improvements: int


def read_trace_summary(path: Path) -> TraceSummary:
    """Parse and validate a trace JSONL file.

    Checks the meta/iterations/summary structure, the 1..n iteration indexing,
    the nondecreasing best-PSLR sequence, and the summary counters.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    records = []
    for ln, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: line {ln}: {exc.msg}") from exc
    if len(records) < 2 or records[0].get("type") != "meta" or records[-1].get("type") != "summary":
        raise SchemaError(f"{path}: truncated trace (missing meta or summary line)")
    meta, summary = records[0], records[-1]
    iterations = records[1:-1]
    best_prev = -math.inf
    improvements = 0
    for i, rec in enumerate(iterations, start=1):
        if rec.get("type") != "iteration" or rec.get("k") != i:
            raise SchemaError(f"{path}: iteration line {i} is out of sequence")
        best = float(rec["best_pslr_db"])
        if best < best_prev - 1e-12:
            raise SchemaError(f"{path}: best PSLR decreases at iteration {i}")
        if rec.get("accepted"):
            improvements += 1
        best_prev = best
    if summary.get("iterations") != len(iterations):
        raise SchemaError(f"{path}: summary iteration count does not match the records")
    if summary.get("improvements") != improvements:
        raise SchemaError(f"{path}: summary improvement count does not match the records")
    final = float(summary["final_pslr_db"])
    initial = float(meta["initial_pslr_db"])
    if iterations and abs(final - float(iterations[-1]["best_pslr_db"])) > 1e-12:
        raise SchemaError(f"{path}: summary final PSLR does not match the last record")
    return TraceSummary(
        iterations=len(iterations),
        termination=str(summary["termination"]),
        initial_pslr_db=initial,
        final_pslr_db=final,
        improvements=improvements,
    )


def write_manifest(
    path: Path,
    tool_version: str,
    config_digest: str,
    seed: int,
    started_at: str,
    finished_at: str,
    outputs: Sequence[str],
) -> None:
    manifest = {
        "tool_version": tool_version,
        "spec_hash": config_digest,
        "seed": seed,
        "started_at": started_at,
        "finished_at": finished_at,
        "outputs": list(outputs),
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")
