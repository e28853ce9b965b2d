"""Deterministic run artefacts: snapshot files, CSV series, JSON reports.

CSV bytes are reproducible: fixed column order, shortest-roundtrip float
formatting, newline-terminated rows.  The manifest is written atomically
(temp file then rename) as the last act of a run.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dc_field

from . import __version__
from .claims import UniquenessReport, energy_balance_series
from .nsf1 import write_field
from .solvers import Trajectory


@dataclass(frozen=True)
class RunManifest:
    """What a finished command produced; written atomically as its last act."""

    command: str
    scenario: str
    config: dict
    outputs: dict
    duration_seconds: float
    toolkit_version: str = __version__
    extra: dict = dc_field(default_factory=dict)

    def as_dict(self) -> dict:
        doc = {
            "command": self.command,
            "scenario": self.scenario,
            "config": self.config,
            "outputs": self.outputs,
            "duration_seconds": self.duration_seconds,
            "toolkit_version": self.toolkit_version,
        }
        doc.update(self.extra)
        return doc


def fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(cell) for cell in row) + "\n")


def write_trajectory(out_dir, prefix, traj: Trajectory, forcing, mu,
                     w_norms=None) -> dict:
    """Snapshot files plus the index and diagnostics tables.

    Returns the path map for the manifest.
    """
    os.makedirs(out_dir, exist_ok=True)
    index_rows = []
    for k, (t, v, p) in enumerate(zip(traj.times, traj.velocities, traj.pressures)):
        vel_name = f"{prefix}_vel_{k:06d}.nsf"
        prs_name = f"{prefix}_prs_{k:06d}.nsf"
        write_field(os.path.join(out_dir, vel_name), v)
        write_field(os.path.join(out_dir, prs_name), p)
        d = traj.diagnostics[k]
        index_rows.append((t, vel_name, d.energy, d.div_max, d.conv_residual))
    index_path = os.path.join(out_dir, f"{prefix}_index.csv")
    _write_csv(index_path, ("t", "file", "energy", "div_max", "conv_residual"), index_rows)

    balance = energy_balance_series(traj, forcing, mu) if len(traj.times) >= 3 else [0.0] * len(traj.times)
    header = ["t", "energy", "enstrophy", "div_max", "conv_residual",
              "energy_balance_residual", "boundary_flux"]
    if w_norms is not None:
        header.append("w_norm")
    rows = []
    for k, (t, d) in enumerate(zip(traj.times, traj.diagnostics)):
        row = [t, d.energy, d.enstrophy, d.div_max, d.conv_residual,
               balance[k], d.boundary_flux]
        if w_norms is not None:
            row.append(w_norms[k])
        rows.append(tuple(row))
    diag_path = os.path.join(out_dir, f"{prefix}_diagnostics.csv")
    _write_csv(diag_path, tuple(header), rows)
    return {"index": index_path, "diagnostics": diag_path}


def write_identity_reports(out_dir, prefix, timed_reports, config_echo) -> dict:
    """JSON document plus a flat CSV, one row per identity per sample time."""
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, f"{prefix}_identities.json")
    csv_path = os.path.join(out_dir, f"{prefix}_identities.csv")
    doc = {
        "toolkit_version": __version__,
        "config": config_echo,
        "identities": [dict(t=t, **rep.as_dict()) for t, rep in timed_reports],
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    rows = [
        (t, rep.identity_name, rep.lhs, rep.rhs, rep.residual, rep.tolerance, rep.verdict)
        for t, rep in timed_reports
    ]
    _write_csv(
        csv_path,
        ("t", "identity", "lhs", "rhs", "residual", "tolerance", "verdict"),
        rows,
    )
    return {"identities_json": json_path, "identities_csv": csv_path}


def write_uniqueness_report(out_dir, prefix, report: UniquenessReport, config_echo) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, f"{prefix}_uniqueness.json")
    csv_path = os.path.join(out_dir, f"{prefix}_uniqueness.csv")
    doc = {
        "toolkit_version": __version__,
        "config": config_echo,
        "scenario": report.scenario,
        "preamble": report.preamble,
        "verdict": report.verdict,
        "aborted": report.aborted,
        "confirmation": report.confirmation,
        "series": {
            "t": list(report.times),
            "w_norm": list(report.w_norm),
            "w_norm_sq": list(report.w_norm_sq),
            "dwdt": list(report.dwdt),
            "dwdt_uncertainty": list(report.dwdt_uncertainty),
            "conv_residual": list(report.conv_residual),
            "q_norm": list(report.q_norm),
            "identity_residuals": {k: list(v) for k, v in report.identity_residuals.items()},
        },
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    names = sorted(report.identity_residuals)
    header = ["t", "w_norm", "w_norm_sq", "dwdt", "dwdt_uncertainty",
              "conv_residual", "q_norm"] + names
    rows = []
    for k, t in enumerate(report.times):
        row = [t, report.w_norm[k], report.w_norm_sq[k], report.dwdt[k],
               report.dwdt_uncertainty[k], report.conv_residual[k], report.q_norm[k]]
        row += [report.identity_residuals[n][k] for n in names]
        rows.append(tuple(row))
    _write_csv(csv_path, tuple(header), rows)
    return {"uniqueness_json": json_path, "uniqueness_csv": csv_path}


def write_manifest(out_dir, prefix, manifest) -> str:
    """Atomic write: the manifest appears only when the run is complete.

    Every referenced output path must already exist.
    """
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{prefix}_manifest.json")
    tmp = path + ".tmp"
    doc = manifest.as_dict() if isinstance(manifest, RunManifest) else dict(manifest)
    doc.setdefault("toolkit_version", __version__)
    for name, out_path in (doc.get("outputs") or {}).items():
        if not os.path.exists(out_path):
            raise FileNotFoundError(f"manifest output {name!r} missing: {out_path}")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path
