"""Run configuration files (JSON, schema version 1).

Unknown keys are rejected so that a typo in a physics parameter fails loudly
instead of silently falling back to a default. Angles are given in degrees.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .channel import ChannelModel
from .errors import ConfigError, InvalidArgument
from .optics import DetectorParams
from .protocol import SessionConfig

SCHEMA_VERSION = 1

_prob = {"type": "number", "minimum": 0, "maximum": 1}
_nonneg = {"type": "number", "minimum": 0}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "description": {"type": "string"},
        "mu": {"type": "array", "items": _nonneg, "minItems": 1},
        "mu_b": {"type": "array", "items": _nonneg, "minItems": 1},
        "overlap": _prob,
        "detector": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"efficiency": _prob, "dark_prob": _prob},
        },
        "misalignment_deg": {"type": "number"},
        "n_trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "engine": {"enum": ["analytic", "mc", "monte-carlo"]},
        "basis_probs": {
            "type": "object",
            "additionalProperties": False,
            "required": ["Z", "X"],
            "properties": {"Z": _prob, "X": _prob},
        },
        "eq2_as_printed": {"type": "boolean"},
        "phase_nodes": {"type": "integer", "minimum": 1},
        "blocks": {"type": "integer", "minimum": 2},
        "loss_db": {"type": "array", "items": _nonneg, "minItems": 2, "maxItems": 2},
        "intensities": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["label", "factor", "prob"],
                "properties": {"label": {"type": "string"}, "factor": _nonneg, "prob": _prob},
            },
        },
        "workers": {"type": "integer", "minimum": 1},
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hwp1_deg": {"type": "number"},
                "angles_deg": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "phase_points": {"type": "integer", "minimum": 1},
                "port": {"enum": [0, 1]},
            },
        },
    },
}

DEFAULT_ANGLES_DEG = [float(a) for a in range(0, 90, 4)]


@dataclass
class RunConfig:
    """A validated config file: one base session plus the list of mean photon numbers."""

    session: SessionConfig
    mus: list[tuple[float, float]]
    raw: dict
    hwp1: float = 0.0
    angles: list[float] = field(default_factory=lambda: [math.radians(a) for a in DEFAULT_ANGLES_DEG])
    phase_points: int = 16
    port: int = 0

    def sessions(self):
        for mu_a, mu_b in self.mus:
            yield self.session.replace(mu_a=mu_a, mu_b=mu_b)

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    """SHA-256 of the canonical JSON form; independent of key order."""
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _path(err: jsonschema.ValidationError) -> str:
    out = ""
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def parse_config(raw: dict, seed: int | None = None, engine: str | None = None) -> RunConfig:
    """Validate ``raw`` and build a :class:`RunConfig`; ``seed``/``engine`` override the file."""
    if not isinstance(raw, dict):
        raise ConfigError({"<root>": "configuration must be a JSON object"})
    raw = json.loads(json.dumps(raw))
    if seed is not None:
        raw["seed"] = seed
    if engine is not None:
        raw["engine"] = engine
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw), key=_path)
    if errors:
        problems: dict[str, str] = {}
        for err in errors:
            problems.setdefault(_path(err), err.message)
        raise ConfigError(problems)

    mus = [float(m) for m in raw.get("mu", [0.5])]
    mus_b = [float(m) for m in raw.get("mu_b", mus)]
    if len(mus_b) != len(mus):
        raise ConfigError({"mu_b": "must have the same length as mu"})
    det = raw.get("detector", {})
    bp = raw.get("basis_probs", {"Z": 0.5, "X": 0.5})
    loss = raw.get("loss_db", [0.0, 0.0])
    intens = raw.get("intensities", [{"label": "signal", "factor": 1.0, "prob": 1.0}])
    eng = raw.get("engine", "analytic")
    try:
        session = SessionConfig(
            mu_a=mus[0], mu_b=mus_b[0],
            overlap=raw.get("overlap", 1.0),
            detector=DetectorParams(det.get("efficiency", 0.5), det.get("dark_prob", 1e-5)),
            misalignment=math.radians(raw.get("misalignment_deg", 0.0)),
            n_trials=raw.get("n_trials", 1_000_000),
            seed=raw.get("seed", 0),
            engine="monte-carlo" if eng == "mc" else eng,
            basis_probs=(bp["Z"], bp["X"]),
            eq2_as_printed=raw.get("eq2_as_printed", False),
            phase_nodes=raw.get("phase_nodes", 256),
            blocks=raw.get("blocks", 10),
            intensities=tuple((i["label"], float(i["factor"]), float(i["prob"])) for i in intens),
            channel_a=ChannelModel(one_way_loss_db=loss[0]),
            channel_b=ChannelModel(one_way_loss_db=loss[1]),
            workers=raw.get("workers", 1),
        )
    except InvalidArgument as exc:
        raise ConfigError({"<root>": str(exc)}) from exc

    scan = raw.get("scan", {})
    return RunConfig(
        session=session,
        mus=list(zip(mus, mus_b)),
        raw=raw,
        hwp1=math.radians(scan.get("hwp1_deg", 0.0)),
        angles=[math.radians(a) for a in scan.get("angles_deg", DEFAULT_ANGLES_DEG)],
        phase_points=scan.get("phase_points", 16),
        port=scan.get("port", 0),
    )


def load_config(path, seed: int | None = None, engine: str | None = None) -> RunConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError({"<file>": f"{path}: not valid JSON ({exc})"}) from exc
    return parse_config(raw, seed=seed, engine=engine)


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package, e.g. ``"table1.json"``."""
    return Path(__file__).parent / "configs" / name
