"""Run experiments with manifests, and re-run them from a manifest."""
from __future__ import annotations

import shutil
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path

from .. import __version__, kernels
from ..errors import ParameterError
from .config import ExperimentConfig
from .experiments import EXPERIMENTS, PRINT_ONLY
from .manifest import MANIFEST_NAME, RunManifest, diff_digests, file_digest, input_digests, output_digests

EXIT_OK, EXIT_ERROR, EXIT_FAIL, EXIT_MISMATCH = 0, 1, 2, 3


@dataclass
class RunResult:
    manifest: RunManifest
    passed: bool
    stdout: str

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.passed else EXIT_FAIL


def _prepare_out(out_dir) -> Path:
    """Create the output directory; only an empty one or a previous run's directory is reused."""
    out = Path(out_dir)
    if out.exists():
        if not out.is_dir():
            raise ParameterError(f"output path {out} exists and is not a directory")
        entries = list(out.iterdir())
        if entries:
            old = out / MANIFEST_NAME
            if not old.exists():
                raise ParameterError(f"output directory {out} is not empty and holds no manifest")
            for name in RunManifest.read(old).outputs:
                target = out / name
                if target.is_file():
                    target.unlink()
            for sub in sorted((p for p in out.rglob("*") if p.is_dir()), reverse=True):
                if not any(sub.iterdir()):
                    sub.rmdir()
            old.unlink()
            if any(out.iterdir()):
                raise ParameterError(f"output directory {out} holds files from another source")
    out.mkdir(parents=True, exist_ok=True)
    return out


def run(cfg: ExperimentConfig) -> RunResult:
    """Dispatch ``cfg`` and write outputs plus ``manifest.json`` to ``cfg.output_dir``."""
    missing = [p for p in cfg.inputs() if not Path(p).exists()]
    if missing:
        raise FileNotFoundError(f"missing input: {missing[0]}")
    man = RunManifest(cfg.to_dict(), cfg.digest(), f"anls {__version__} ({kernels.BACKEND} kernels)")
    man.inputs = input_digests(cfg.inputs())
    out = None
    if cfg.output_dir is not None:
        out = _prepare_out(cfg.output_dir)
    elif cfg.experiment not in PRINT_ONLY:
        raise ParameterError(f"{cfg.experiment} needs an output directory (--out DIR)")
    t0 = time.perf_counter()
    passed, summary, stdout = EXPERIMENTS[cfg.experiment](cfg, out, man)
    man.wall_clock = time.perf_counter() - t0
    man.status = "pass" if passed else "fail"
    man.summary = summary
    if out is not None:
        man.outputs = output_digests(out)
        man.write(out)
    return RunResult(man, bool(passed), stdout)


@dataclass
class ReproduceResult:
    manifest: RunManifest
    differences: list

    @property
    def exit_code(self) -> int:
        return EXIT_OK if not self.differences else EXIT_MISMATCH


def reproduce(manifest_path) -> ReproduceResult:
    """Verify the recorded outputs on disk, then re-run the config and compare digests."""
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    man = RunManifest.read(path)
    cfg = ExperimentConfig.from_dict(man.config)
    for p in [*cfg.inputs(), *man.inputs]:
        if not Path(p).exists():
            raise FileNotFoundError(f"missing input: {p}")
    diffs = [f"on disk: {d}" for d in diff_digests(man.outputs, output_digests(path.parent))]
    current = input_digests(cfg.inputs())
    current.update({p: file_digest(p) for p in man.inputs if p not in current})
    diffs += [f"input: {d}" for d in diff_digests(man.inputs, current)]
    tmp = Path(tempfile.mkdtemp(prefix="anls-reproduce-"))
    try:
        fresh = run(replace(cfg, output_dir=str(tmp / "out")))
        diffs += [f"rerun: {d}" for d in diff_digests(man.outputs, fresh.manifest.outputs)]
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return ReproduceResult(fresh.manifest, diffs)
