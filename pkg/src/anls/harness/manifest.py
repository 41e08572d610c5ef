"""Run manifests: what was run, how long it took, and digests of inputs and outputs."""
from __future__ import annotations

import hashlib
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def input_digests(paths) -> dict[str, str]:
    out = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for f in sorted(x for x in p.rglob("*") if x.is_file() and x.name != MANIFEST_NAME):
                out[str(f)] = file_digest(f)
        else:
            out[str(p)] = file_digest(p)
    return out


def output_digests(out_dir) -> dict[str, str]:
    """Digests of every file below ``out_dir`` except the manifest, keyed by relative path."""
    root = Path(out_dir)
    return {str(f.relative_to(root)): file_digest(f)
            for f in sorted(root.rglob("*")) if f.is_file() and f.name != MANIFEST_NAME}


@dataclass
class RunManifest:
    config: dict
    config_hash: str
    version: str
    wall_clock: float = 0.0
    stages: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    status: str = "pass"
    summary: dict = field(default_factory=dict)

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - t0

    def to_dict(self) -> dict:
        return {"config": self.config, "config_hash": self.config_hash, "version": self.version,
                "wall_clock": self.wall_clock, "stages": self.stages, "inputs": self.inputs,
                "outputs": self.outputs, "status": self.status, "summary": self.summary}

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        return cls(**data)


def diff_digests(expected: dict, actual: dict) -> list[str]:
    """Human-readable per-file differences between two digest maps."""
    lines = []
    for name in sorted(set(expected) | set(actual)):
        a, b = expected.get(name), actual.get(name)
        if a == b:
            continue
        if a is None:
            lines.append(f"unexpected file: {name}")
        elif b is None:
            lines.append(f"missing file: {name}")
        else:
            lines.append(f"digest mismatch: {name} ({a[:12]} != {b[:12]})")
    return lines
