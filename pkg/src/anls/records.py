"""Text records for fields and potentials (schema ``anls.field/1``)."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ParameterError, ShapeError
from .harmonic import FourierField
from .potential import Potential

SCHEMA_ID = "anls.field/1"


@lru_cache(maxsize=None)
def field_schema() -> dict:
    return json.loads(resources.files("anls").joinpath("schemas/field.schema.json").read_text())


def to_record(u: FourierField, meta: dict | None = None) -> dict:
    inter = np.empty(2 * len(u.coeffs))
    inter[0::2] = u.coeffs.real
    inter[1::2] = u.coeffs.imag
    rec = {"schema": SCHEMA_ID, "max_freq": u.max_freq, "reality": u.reality, "coeffs": inter.tolist()}
    if meta:
        rec["meta"] = dict(meta)
    return rec


def from_record(rec: dict) -> FourierField:
    try:
        jsonschema.validate(rec, field_schema())
    except jsonschema.ValidationError as exc:
        raise ParameterError(f"invalid field record: {exc.message}") from exc
    M = rec["max_freq"]
    inter = np.asarray(rec["coeffs"], dtype=float)
    if len(inter) != 2 * (2 * M + 1):
        raise ShapeError(f"field record with M={M} needs {2 * (2 * M + 1)} numbers, got {len(inter)}")
    return FourierField(M, inter[0::2] + 1j * inter[1::2], rec["reality"])


def dumps(obj) -> str:
    """Canonical JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def save_field(path, u: FourierField, meta: dict | None = None) -> Path:
    path = Path(path)
    path.write_text(dumps(to_record(u, meta)))
    return path


def load_record(path) -> dict:
    return json.loads(Path(path).read_text())


def load_field(path) -> FourierField:
    return from_record(load_record(path))


def save_potential(path, V: Potential) -> tuple[Path, Path]:
    """Write the field record (with metadata) and the ``.meta.json`` sidecar."""
    path = Path(path)
    save_field(path, V.field, V.metadata())
    side = path.with_name(path.stem + ".meta.json")
    side.write_text(dumps(V.metadata()))
    return path, side


def load_potential(path, kappa: float | None = None) -> Potential:
    """Load a potential; metadata comes from the record or its sidecar."""
    path = Path(path)
    rec = load_record(path)
    u = from_record(rec)
    meta = rec.get("meta")
    side = path.with_name(path.stem + ".meta.json")
    if meta is None and side.exists():
        meta = json.loads(side.read_text())
    meta = meta or {}
    k = kappa if kappa is not None else meta.get("kappa")
    if k is None:
        raise ParameterError(f"{path}: no kappa recorded; pass it explicitly")
    if not u.reality:
        raise ParameterError(f"{path}: a potential must be a real field")
    return Potential(u, float(k), meta.get("kind", "custom"), meta.get("seed"))
