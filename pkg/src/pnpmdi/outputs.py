"""Deterministic output files.

Column layouts:

``tally.csv``
    ``mu,pol_a,pol_b,outcome,count,stddev`` with outcome ``psi+``/``psi-``;
    ``mu`` is Alice's mean photon number of the session the row belongs to.
``scan.csv``
    ``x,y,y_err`` with ``x`` in radians and ``y`` in events per trial.

Floats are written with 12 significant digits; JSON keys are sorted.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

from . import __version__
from .experiments import ScanCurve, SineFit
from .protocol import QberReport, TallyTable

TALLY_COLUMNS = ("mu", "pol_a", "pol_b", "outcome", "count", "stddev")
SCAN_COLUMNS = ("x", "y", "y_err")


def fmt(x: float) -> str:
    return format(float(x), ".12g")


def _round(obj):
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def write_json(path: Path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_round(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_tally_csv(path: Path, tallies: list[tuple[float, TallyTable]]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TALLY_COLUMNS)
        for mu, tally in tallies:
            for pa, pb, outcome, count, sd in tally.rows():
                w.writerow([fmt(mu), pa, pb, outcome, fmt(count), fmt(sd)])
    return path


def write_qber_json(path: Path, reports: list[QberReport]) -> Path:
    rows = [{"mu": r.mu, "e_z": r.e_z, "e_x": r.e_x, "se_z": r.se_z, "se_x": r.se_x,
             "n_z": r.n_z, "n_x": r.n_x} for r in reports]
    return write_json(path, {"schema_version": 1, "reports": rows})


def write_scan_csv(path: Path, curve: ScanCurve) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCAN_COLUMNS)
        for x, y, e in zip(curve.x, curve.y, curve.y_err):
            w.writerow([fmt(x), fmt(y), fmt(e)])
    return path


def fit_payload(fit: SineFit, v_hom: float | None, **extra) -> dict:
    return {"B": fit.offset, "A": fit.amplitude, "delta": fit.phase,
            "v_sine": fit.visibility, "v_hom": v_hom, "harmonic": fit.harmonic, **extra}


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, command: str, files: list[Path], config_hash: str | None,
                   seed: int | None, engine: str | None, duration_s: float) -> Path:
    """List every emitted file with its digest. ``duration_s`` is the only run-dependent field."""
    payload = {
        "tool": "pnpmdi",
        "version": __version__,
        "command": command,
        "config_hash": config_hash,
        "seed": seed,
        "engine": engine,
        "files": [{"name": Path(f).name, "sha256": sha256_file(f)} for f in files],
        "duration_s": duration_s,
    }
    return write_json(Path(out_dir) / "manifest.json", payload)
